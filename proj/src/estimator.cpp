#include "mqe/estimator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <string>

#include "mqe/error.hpp"
#include "mqe/features.hpp"
#include "mqe/kernels.hpp"
#include "mqe/parallel.hpp"
#include "mqe/rng.hpp"

namespace mqe {
namespace {

constexpr const char* kModule = "estimator";
constexpr std::size_t kRowGrain = 32;

// C[i,:] = bias + sum_p A[i,p] * B[p,:]
template <class T>
void matmul_bias(const Matrix<T>& a, const Matrix<T>& b, const Matrix<T>& bias, Matrix<T>& c) {
    const std::size_t inner = a.cols();
    const std::size_t width = b.cols();
    parallel_for(0, a.rows(), kRowGrain, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            T* dst = c.row(i).data();
            std::copy_n(bias.data(), width, dst);
            const T* ai = a.row(i).data();
            for (std::size_t p = 0; p < inner; ++p) {
                if (ai[p] != T{0}) kernels::axpy(ai[p], b.row(p).data(), dst, width);
            }
        }
    });
}

// C[p,:] += sum_i A[i,p] * B[i,:]  (C += A^T B). Parallel over output rows p,
// each summing over i in ascending order.
template <class T>
void matmul_tn_accumulate(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c) {
    const std::size_t width = b.cols();
    parallel_for(0, a.cols(), 8, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t p = lo; p < hi; ++p) {
            T* dst = c.row(p).data();
            for (std::size_t i = 0; i < a.rows(); ++i) {
                const T coef = a(i, p);
                if (coef != T{0}) kernels::axpy(coef, b.row(i).data(), dst, width);
            }
        }
    });
}

// C[i,q] (+)= dot(A[i,:], B[q,:])  (C = A B^T).
template <class T>
void matmul_nt(const Matrix<T>& a, const Matrix<T>& b, Matrix<T>& c, bool accumulate) {
    const std::size_t inner = a.cols();
    parallel_for(0, a.rows(), kRowGrain, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            const T* ai = a.row(i).data();
            T* dst = c.row(i).data();
            for (std::size_t q = 0; q < b.rows(); ++q) {
                const T v = kernels::dot(ai, b.row(q).data(), inner);
                dst[q] = accumulate ? dst[q] + v : v;
            }
        }
    });
}

// Column sums of A added into the 1-row matrix `out`.
template <class T>
void column_sum_accumulate(const Matrix<T>& a, Matrix<T>& out) {
    for (std::size_t i = 0; i < a.rows(); ++i) kernels::axpy(T{1}, a.row(i).data(), out.data(), a.cols());
}

template <class T>
T softplus(T a) {
    return a > T{0} ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

template <class T>
T sigmoid(T a) {
    if (a >= T{0}) return T{1} / (T{1} + std::exp(-a));
    const T e = std::exp(a);
    return e / (T{1} + e);
}

template <class T>
void fill_uniform(Matrix<T>& m, double bound, Rng& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : m.flat()) v = static_cast<T>(dist(rng));
}

template <class T>
HopEstimator<T> zero_hop(const ModelShape& s) {
    return HopEstimator<T>{
        Matrix<T>(s.latent, s.hidden), Matrix<T>(1, s.hidden), Matrix<T>(s.hidden, s.dim), Matrix<T>(1, s.dim),
        Matrix<T>(s.latent, s.hidden), Matrix<T>(1, s.hidden), Matrix<T>(s.hidden, 1),     Matrix<T>(1, 1),
    };
}

template <class T>
void check_target_shape(const BasicMqeModel<T>& model, const Matrix<T>& target) {
    if (target.rows() != model.shape.nodes || target.cols() != model.shape.dim) {
        throw InputError(kModule, "target layer is " + std::to_string(target.rows()) + "x" +
                                      std::to_string(target.cols()) + ", model expects " +
                                      std::to_string(model.shape.nodes) + "x" + std::to_string(model.shape.dim));
    }
}

}  // namespace

void ModelShape::validate() const {
    if (latent < 1 || hidden < 1) throw ConfigError(kModule, "latent and hidden widths must be >= 1");
    if (!(sigma_floor > 0.0)) throw ConfigError(kModule, "sigma floor must be > 0");
}

bool LossOptions::includes(std::size_t hop) const {
    return hops.empty() || std::find(hops.begin(), hops.end(), hop) != hops.end();
}

std::vector<std::size_t> LossOptions::resolve(std::size_t max_hop) const {
    std::vector<std::size_t> out;
    for (std::size_t l = 0; l <= max_hop; ++l) {
        if (includes(l)) out.push_back(l);
    }
    for (std::size_t l : hops) {
        if (l > max_hop) throw ConfigError(kModule, "loss hop " + std::to_string(l) + " exceeds L=" + std::to_string(max_hop));
    }
    return out;
}

double log_sigma_weight(LogSigmaTerm term, std::size_t dim) noexcept {
    switch (term) {
        case LogSigmaTerm::per_dimension: return static_cast<double>(dim);
        case LogSigmaTerm::single: return 1.0;
        case LogSigmaTerm::none: return 0.0;
    }
    return 0.0;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError(kModule, "learning rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError(kModule, "adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) throw ConfigError(kModule, "adam epsilon must be > 0");
}

template <class T>
std::vector<std::span<T>> parameter_tensors(BasicMqeModel<T>& model) {
    std::vector<std::span<T>> out;
    out.reserve(1 + 8 * model.hops.size());
    out.push_back(model.z.flat());
    for (auto& e : model.hops) {
        for (Matrix<T>* m : {&e.mu_w1, &e.mu_b1, &e.mu_w2, &e.mu_b2, &e.sigma_w1, &e.sigma_b1, &e.sigma_w2,
                             &e.sigma_b2}) {
            out.push_back(m->flat());
        }
    }
    return out;
}

template <class T>
std::vector<std::span<const T>> parameter_tensors(const BasicMqeModel<T>& model) {
    auto spans = parameter_tensors(const_cast<BasicMqeModel<T>&>(model));
    return {spans.begin(), spans.end()};
}

template <class T>
BasicMqeModel<T> zeros_like(const ModelShape& shape) {
    BasicMqeModel<T> m;
    m.shape = shape;
    m.z = Matrix<T>(shape.nodes, shape.latent);
    m.hops.reserve(shape.hops + 1);
    for (std::size_t l = 0; l <= shape.hops; ++l) m.hops.push_back(zero_hop<T>(shape));
    return m;
}

template <class T>
BasicMqeModel<T> init_model(const ModelShape& shape, std::uint64_t seed) {
    shape.validate();
    BasicMqeModel<T> m = zeros_like<T>(shape);
    Rng rng = make_rng(seed);
    const double first = 1.0 / std::sqrt(static_cast<double>(shape.latent));
    const double second = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
    fill_uniform(m.z, first, rng);
    for (auto& e : m.hops) {
        fill_uniform(e.mu_w1, first, rng);
        fill_uniform(e.mu_w2, second, rng);
        fill_uniform(e.sigma_w1, first, rng);
        fill_uniform(e.sigma_w2, second, rng);
    }
    return m;
}

template <class T>
BasicMqeModel<T> cast_model(const BasicMqeModel<double>& model) {
    BasicMqeModel<T> out = zeros_like<T>(model.shape);
    auto dst = parameter_tensors(out);
    auto src = parameter_tensors(model);
    for (std::size_t t = 0; t < dst.size(); ++t) {
        std::transform(src[t].begin(), src[t].end(), dst[t].begin(), [](double v) { return static_cast<T>(v); });
    }
    return out;
}

template <class T>
HopEstimate<T> forward(const BasicMqeModel<T>& model, std::size_t hop) {
    const ModelShape& s = model.shape;
    if (hop >= model.hops.size()) {
        throw InputError(kModule, "hop " + std::to_string(hop) + " out of range (L=" + std::to_string(s.hops) + ")");
    }
    const HopEstimator<T>& e = model.hops[hop];
    const std::size_t n = s.nodes;

    HopEstimate<T> out;
    out.mu_hidden_pre = Matrix<T>(n, s.hidden);
    out.sigma_hidden_pre = Matrix<T>(n, s.hidden);
    out.mu = Matrix<T>(n, s.dim);
    out.sigma.resize(n);
    out.sigma_pre.resize(n);

    matmul_bias(model.z, e.mu_w1, e.mu_b1, out.mu_hidden_pre);
    matmul_bias(model.z, e.sigma_w1, e.sigma_b1, out.sigma_hidden_pre);

    Matrix<T> hidden(n, s.hidden);
    for (std::size_t k = 0; k < hidden.size(); ++k) hidden.data()[k] = std::max(out.mu_hidden_pre.data()[k], T{0});
    matmul_bias(hidden, e.mu_w2, e.mu_b2, out.mu);

    const T floor = static_cast<T>(s.sigma_floor);
    const T* w2 = e.sigma_w2.data();
    std::vector<T> relu(s.hidden);
    bool finite = true;
    for (std::size_t i = 0; i < n; ++i) {
        const T* pre = out.sigma_hidden_pre.row(i).data();
        for (std::size_t p = 0; p < s.hidden; ++p) relu[p] = std::max(pre[p], T{0});
        const T a = kernels::dot(relu.data(), w2, s.hidden) + e.sigma_b2(0, 0);
        out.sigma_pre[i] = a;
        out.sigma[i] = softplus(a) + floor;
        finite = finite && std::isfinite(out.sigma[i]);
    }
    for (T v : out.mu.flat()) finite = finite && std::isfinite(v);
    if (!finite) throw NumericalError(kModule, "non-finite estimate at hop " + std::to_string(hop));
    return out;
}

template <class T>
double hop_loss(const HopEstimate<T>& est, const Matrix<T>& target, LogSigmaTerm term) {
    const std::size_t d = target.cols();
    const double c = log_sigma_weight(term, d);
    double loss = 0.0;
    for (std::size_t i = 0; i < target.rows(); ++i) {
        const double sq = kernels::sqdist(target.row(i).data(), est.mu.row(i).data(), d);
        const double sigma = static_cast<double>(est.sigma[i]);
        loss += sq / (2.0 * sigma * sigma);
        if (c != 0.0) loss += c * std::log(sigma);
    }
    return loss;
}

template <class T>
double nll_loss(std::span<const HopEstimate<T>> estimates, std::span<const Matrix<T>> targets,
                const LossOptions& opts) {
    if (estimates.size() != targets.size()) throw InputError(kModule, "estimate and target hop counts differ");
    if (estimates.empty()) throw InputError(kModule, "no hops to evaluate");
    double loss = 0.0;
    for (std::size_t l : opts.resolve(estimates.size() - 1)) {
        if (estimates[l].mu.rows() != targets[l].rows() || estimates[l].mu.cols() != targets[l].cols()) {
            throw InputError(kModule, "estimate and target shapes differ at hop " + std::to_string(l));
        }
        loss += hop_loss(estimates[l], targets[l], opts.log_sigma);
    }
    if (!std::isfinite(loss)) throw NumericalError(kModule, "non-finite loss");
    return loss;
}

template <class T>
void backward_hop(const BasicMqeModel<T>& model, std::size_t hop, const HopEstimate<T>& est,
                  const Matrix<T>& target, LogSigmaTerm term, BasicMqeModel<T>& grad) {
    const ModelShape& s = model.shape;
    check_target_shape(model, target);
    if (grad.hops.size() != model.hops.size() || grad.z.rows() != model.z.rows() || grad.z.cols() != model.z.cols()) {
        throw InputError(kModule, "gradient buffer does not match model shape");
    }
    const HopEstimator<T>& e = model.hops[hop];
    HopEstimator<T>& g = grad.hops[hop];
    const std::size_t n = s.nodes;
    const std::size_t d = s.dim;
    const std::size_t h = s.hidden;
    const double c = log_sigma_weight(term, d);

    // dL/dmu_i = (mu_i - x_i) / sigma_i^2 ; dL/da_i = dL/dsigma_i * softplus'(a_i)
    Matrix<T> g_mu(n, d);
    std::vector<T> g_a(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double sigma = static_cast<double>(est.sigma[i]);
        const double inv_var = 1.0 / (sigma * sigma);
        const T* mu = est.mu.row(i).data();
        const T* x = target.row(i).data();
        T* gm = g_mu.row(i).data();
        for (std::size_t j = 0; j < d; ++j) gm[j] = static_cast<T>((static_cast<double>(mu[j]) - x[j]) * inv_var);
        const double sq = kernels::sqdist(x, mu, d);
        const double g_sigma = -sq / (sigma * sigma * sigma) + c / sigma;
        g_a[i] = static_cast<T>(g_sigma * static_cast<double>(sigmoid(est.sigma_pre[i])));
    }

    // Mean path.
    Matrix<T> hidden(n, h);
    for (std::size_t k = 0; k < hidden.size(); ++k) hidden.data()[k] = std::max(est.mu_hidden_pre.data()[k], T{0});
    matmul_tn_accumulate(hidden, g_mu, g.mu_w2);
    column_sum_accumulate(g_mu, g.mu_b2);
    Matrix<T> g_pre(n, h);
    matmul_nt(g_mu, e.mu_w2, g_pre, false);
    for (std::size_t k = 0; k < g_pre.size(); ++k) {
        if (!(est.mu_hidden_pre.data()[k] > T{0})) g_pre.data()[k] = T{0};
    }
    matmul_tn_accumulate(model.z, g_pre, g.mu_w1);
    column_sum_accumulate(g_pre, g.mu_b1);
    matmul_nt(g_pre, e.mu_w1, grad.z, true);

    // Sigma path.
    const T* w2 = e.sigma_w2.data();
    T* gw2 = g.sigma_w2.data();
    for (std::size_t i = 0; i < n; ++i) {
        const T* pre = est.sigma_hidden_pre.row(i).data();
        T* gp = g_pre.row(i).data();
        for (std::size_t p = 0; p < h; ++p) {
            const bool on = pre[p] > T{0};
            gw2[p] += on ? g_a[i] * pre[p] : T{0};
            gp[p] = on ? g_a[i] * w2[p] : T{0};
        }
        g.sigma_b2(0, 0) += g_a[i];
    }
    matmul_tn_accumulate(model.z, g_pre, g.sigma_w1);
    column_sum_accumulate(g_pre, g.sigma_b1);
    matmul_nt(g_pre, e.sigma_w1, grad.z, true);
}

template <class T>
BasicMqeModel<T> backward(const BasicMqeModel<T>& model, std::span<const HopEstimate<T>> estimates,
                          std::span<const Matrix<T>> targets, const LossOptions& opts) {
    if (estimates.size() != model.hops.size() || targets.size() != model.hops.size()) {
        throw InputError(kModule, "backward needs one estimate and one target per hop");
    }
    BasicMqeModel<T> grad = zeros_like<T>(model.shape);
    for (std::size_t l : opts.resolve(model.shape.hops)) {
        backward_hop(model, l, estimates[l], targets[l], opts.log_sigma, grad);
    }
    return grad;
}

template <class T>
double loss_and_gradient(const BasicMqeModel<T>& model, std::span<const Matrix<T>> targets,
                         const LossOptions& opts, BasicMqeModel<T>& grad) {
    if (targets.size() != model.hops.size()) {
        throw InputError(kModule, "expected " + std::to_string(model.hops.size()) + " target layers, got " +
                                      std::to_string(targets.size()));
    }
    for (auto t : parameter_tensors(grad)) std::fill(t.begin(), t.end(), T{0});
    double loss = 0.0;
    for (std::size_t l : opts.resolve(model.shape.hops)) {
        check_target_shape(model, targets[l]);
        const HopEstimate<T> est = forward(model, l);
        loss += hop_loss(est, targets[l], opts.log_sigma);
        backward_hop(model, l, est, targets[l], opts.log_sigma, grad);
    }
    return loss;
}

template <class T>
std::vector<Matrix<T>> stack_targets(const PropagatedStack& stack) {
    std::vector<Matrix<T>> out;
    out.reserve(stack.layer_count());
    for (const auto& layer : stack.layers()) out.push_back(layer.template cast<T>());
    return out;
}

template <class T>
TrainResult<T> train(BasicMqeModel<T> model, const PropagatedStack& targets, const TrainConfig& cfg) {
    cfg.validate();
    if (targets.layer_count() != model.hops.size()) {
        throw InputError(kModule, "stack has " + std::to_string(targets.layer_count()) + " layers but model has " +
                                      std::to_string(model.hops.size()) + " hops");
    }
    const std::vector<Matrix<T>> layers = stack_targets<T>(targets);

    TrainResult<T> result;
    result.loss_trace.reserve(cfg.epochs);
    BasicMqeModel<T> grad = zeros_like<T>(model.shape);
    BasicMqeModel<T> m1 = zeros_like<T>(model.shape);
    BasicMqeModel<T> m2 = zeros_like<T>(model.shape);
    auto params = parameter_tensors(model);
    auto grads = parameter_tensors(grad);
    auto first = parameter_tensors(m1);
    auto second = parameter_tensors(m2);

    const T lr = static_cast<T>(cfg.learning_rate);
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const T eps = static_cast<T>(cfg.epsilon);
    double b1_pow = 1.0;
    double b2_pow = 1.0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double loss = 0.0;
        try {
            loss = loss_and_gradient(model, std::span<const Matrix<T>>(layers), cfg.loss, grad);
        } catch (const NumericalError&) {
            throw NumericalError(kModule, "non-finite estimate at epoch " + std::to_string(epoch));
        }
        if (!std::isfinite(loss)) throw NumericalError(kModule, "non-finite loss at epoch " + std::to_string(epoch));
        result.loss_trace.push_back(loss);

        b1_pow *= cfg.beta1;
        b2_pow *= cfg.beta2;
        const T c1 = static_cast<T>(1.0 / (1.0 - b1_pow));
        const T c2 = static_cast<T>(1.0 / (1.0 - b2_pow));
        for (std::size_t t = 0; t < params.size(); ++t) {
            T* p = params[t].data();
            const T* gr = grads[t].data();
            T* m = first[t].data();
            T* v = second[t].data();
            for (std::size_t k = 0; k < params[t].size(); ++k) {
                m[k] = b1 * m[k] + (T{1} - b1) * gr[k];
                v[k] = b2 * v[k] + (T{1} - b2) * gr[k] * gr[k];
                p[k] -= lr * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
            }
        }
    }

    try {
        result.final_loss = loss_and_gradient(model, std::span<const Matrix<T>>(layers), cfg.loss, grad);
    } catch (const NumericalError&) {
        throw NumericalError(kModule, "non-finite estimate at epoch " + std::to_string(cfg.epochs));
    }
    if (!std::isfinite(result.final_loss)) {
        throw NumericalError(kModule, "non-finite loss at epoch " + std::to_string(cfg.epochs));
    }
    result.model = std::move(model);
    return result;
}

template <class T>
void write_embeddings(const std::filesystem::path& path, const Matrix<T>& z) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(kModule, "cannot write " + path.string());
    write_u64_le(out, z.rows());
    write_u64_le(out, z.cols());
    for (T v : z.flat()) write_f32_le(out, static_cast<float>(v));
}

Matrix<float> read_embeddings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(kModule, "cannot open " + path.string());
    const auto n = read_u64_le(in);
    const auto f = read_u64_le(in);
    Matrix<float> z(n, f);
    for (float& v : z.flat()) v = read_f32_le(in);
    return z;
}

namespace {
constexpr char kModelMagic[8] = {'M', 'Q', 'E', 'M', 'O', 'D', 'L', '1'};
}

void write_model(const std::filesystem::path& path, const MqeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(kModule, "cannot write " + path.string());
    out.write(kModelMagic, sizeof(kModelMagic));
    const ModelShape& s = model.shape;
    for (std::uint64_t v : {s.nodes, s.dim, s.latent, s.hidden, s.hops}) write_u64_le(out, v);
    write_u64_le(out, std::bit_cast<std::uint64_t>(s.sigma_floor));
    for (auto tensor : parameter_tensors(model)) {
        for (float v : tensor) write_f32_le(out, v);
    }
}

MqeModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(kModule, "cannot open " + path.string());
    char magic[sizeof(kModelMagic)];
    if (!in.read(magic, sizeof(magic)) || !std::equal(magic, magic + sizeof(magic), kModelMagic)) {
        throw InputError(kModule, path.string() + " is not a model checkpoint");
    }
    ModelShape s;
    s.nodes = read_u64_le(in);
    s.dim = read_u64_le(in);
    s.latent = read_u64_le(in);
    s.hidden = read_u64_le(in);
    s.hops = read_u64_le(in);
    s.sigma_floor = std::bit_cast<double>(read_u64_le(in));
    s.validate();
    MqeModel model = zeros_like<float>(s);
    for (auto tensor : parameter_tensors(model)) {
        for (float& v : tensor) v = read_f32_le(in);
    }
    return model;
}

void write_loss_trace(const std::filesystem::path& path, std::span<const double> trace) {
    std::ofstream out(path);
    if (!out) throw InputError(kModule, "cannot write " + path.string());
    out << "epoch,loss\n" << std::setprecision(17);
    for (std::size_t e = 0; e < trace.size(); ++e) out << e << ',' << trace[e] << '\n';
}

#define MQE_INSTANTIATE(T)                                                                                       \
    template std::vector<std::span<T>> parameter_tensors(BasicMqeModel<T>&);                                     \
    template std::vector<std::span<const T>> parameter_tensors(const BasicMqeModel<T>&);                         \
    template BasicMqeModel<T> zeros_like<T>(const ModelShape&);                                                  \
    template BasicMqeModel<T> init_model<T>(const ModelShape&, std::uint64_t);                                   \
    template BasicMqeModel<T> cast_model<T>(const BasicMqeModel<double>&);                                       \
    template HopEstimate<T> forward(const BasicMqeModel<T>&, std::size_t);                                       \
    template double hop_loss(const HopEstimate<T>&, const Matrix<T>&, LogSigmaTerm);                             \
    template double nll_loss(std::span<const HopEstimate<T>>, std::span<const Matrix<T>>, const LossOptions&);   \
    template void backward_hop(const BasicMqeModel<T>&, std::size_t, const HopEstimate<T>&, const Matrix<T>&,    \
                               LogSigmaTerm, BasicMqeModel<T>&);                                                 \
    template BasicMqeModel<T> backward(const BasicMqeModel<T>&, std::span<const HopEstimate<T>>,                 \
                                       std::span<const Matrix<T>>, const LossOptions&);                          \
    template double loss_and_gradient(const BasicMqeModel<T>&, std::span<const Matrix<T>>, const LossOptions&,   \
                                      BasicMqeModel<T>&);                                                        \
    template std::vector<Matrix<T>> stack_targets<T>(const PropagatedStack&);                                    \
    template TrainResult<T> train(BasicMqeModel<T>, const PropagatedStack&, const TrainConfig&);                 \
    template void write_embeddings(const std::filesystem::path&, const Matrix<T>&);

MQE_INSTANTIATE(float)
MQE_INSTANTIATE(double)

#undef MQE_INSTANTIATE

}  // namespace mqe
