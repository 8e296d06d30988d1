#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "mqe/error.hpp"
#include "mqe/estimator.hpp"
#include "oracles.hpp"

using namespace mqe;

namespace {

ModelShape tiny_shape(std::size_t n, std::size_t d, std::size_t f, std::size_t h, std::size_t L) {
    ModelShape s;
    s.nodes = n;
    s.dim = d;
    s.latent = f;
    s.hidden = h;
    s.hops = L;
    return s;
}

// Random model with biases perturbed away from zero so every path is exercised.
BasicMqeModel<double> random_model(const ModelShape& s, std::mt19937_64& rng) {
    auto m = init_model<double>(s, rng());
    std::normal_distribution<double> nd(0.0, 0.3);
    for (auto& e : m.hops) {
        for (double& v : e.mu_b1.flat()) v = nd(rng);
        for (double& v : e.mu_b2.flat()) v = nd(rng);
        for (double& v : e.sigma_b1.flat()) v = nd(rng);
        for (double& v : e.sigma_b2.flat()) v = nd(rng);
    }
    return m;
}

std::vector<Matrix<double>> random_targets(const ModelShape& s, std::mt19937_64& rng) {
    std::vector<Matrix<double>> t;
    for (std::size_t l = 0; l <= s.hops; ++l) t.push_back(oracle::random_matrix(s.nodes, s.dim, rng));
    return t;
}

std::vector<HopEstimate<double>> forward_all(const BasicMqeModel<double>& m) {
    std::vector<HopEstimate<double>> out;
    for (std::size_t l = 0; l <= m.shape.hops; ++l) out.push_back(forward(m, l));
    return out;
}

double library_loss(const BasicMqeModel<double>& m, const std::vector<Matrix<double>>& t, const LossOptions& opts) {
    const auto est = forward_all(m);
    return nll_loss(std::span<const HopEstimate<double>>(est), std::span<const Matrix<double>>(t), opts);
}

// Largest relative error between analytic and finite-difference gradients.
// Coordinates whose both values are below `floor` are compared absolutely.
double max_relative_error(const BasicMqeModel<double>& grad, const std::vector<std::vector<double>>& fd, double floor) {
    const auto g = parameter_tensors(grad);
    double worst = 0.0;
    for (std::size_t t = 0; t < g.size(); ++t)
        for (std::size_t k = 0; k < g[t].size(); ++k) {
            const double a = g[t][k];
            const double b = fd[t][k];
            const double denom = std::max({std::abs(a), std::abs(b), floor});
            worst = std::max(worst, std::abs(a - b) / denom);
        }
    return worst;
}

}  // namespace

TEST(Init, DeterministicAndBounded) {
    const auto s = tiny_shape(7, 5, 3, 4, 2);
    const auto a = init_model<float>(s, 99);
    const auto b = init_model<float>(s, 99);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, init_model<float>(s, 100));
    const float bf = 1.0f / std::sqrt(3.0f);
    const float bh = 1.0f / std::sqrt(4.0f);
    for (float v : a.z.flat()) EXPECT_LE(std::abs(v), bf);
    for (const auto& e : a.hops) {
        for (float v : e.mu_w1.flat()) EXPECT_LE(std::abs(v), bf);
        for (float v : e.sigma_w1.flat()) EXPECT_LE(std::abs(v), bf);
        for (float v : e.mu_w2.flat()) EXPECT_LE(std::abs(v), bh);
        for (float v : e.sigma_w2.flat()) EXPECT_LE(std::abs(v), bh);
        for (float v : e.mu_b1.flat()) EXPECT_EQ(v, 0.0f);
        for (float v : e.mu_b2.flat()) EXPECT_EQ(v, 0.0f);
        for (float v : e.sigma_b1.flat()) EXPECT_EQ(v, 0.0f);
        for (float v : e.sigma_b2.flat()) EXPECT_EQ(v, 0.0f);
    }
}

TEST(Init, MinimalShape) {
    const auto m = init_model<float>(tiny_shape(1, 1, 1, 1, 0), 1);
    EXPECT_EQ(m.z.cols(), 1u);
    EXPECT_EQ(m.hops.size(), 1u);
    // Z plus eight per-hop tensors: six weights/biases and the two output biases.
    EXPECT_EQ(parameter_tensors(m).size(), 1u + 8u);
}

TEST(Forward, AllZeroParameters) {
    const auto s = tiny_shape(3, 2, 2, 3, 1);
    const auto m = zeros_like<double>(s);
    const auto est = forward(m, 1);
    for (double v : est.mu.flat()) EXPECT_EQ(v, 0.0);
    for (double v : est.sigma) EXPECT_NEAR(v, std::log(2.0) + 1e-3, 1e-15);
}

TEST(Forward, HandArithmetic) {
    auto m = zeros_like<double>(tiny_shape(1, 1, 1, 1, 0));
    m.z(0, 0) = 1.5;
    m.hops[0].mu_w1(0, 0) = 1.0;
    m.hops[0].mu_w2(0, 0) = 2.0;
    m.hops[0].mu_b2(0, 0) = 0.5;
    EXPECT_DOUBLE_EQ(forward(m, 0).mu(0, 0), 3.5);
}

TEST(Forward, SoftplusSaturatesToFloor) {
    auto m = zeros_like<double>(tiny_shape(1, 1, 1, 1, 0));
    m.hops[0].sigma_b2(0, 0) = -1000.0;
    const auto est = forward(m, 0);
    EXPECT_NEAR(est.sigma[0], 1e-3, 1e-12);
    EXPECT_GE(est.sigma[0], 1e-3);

    m.hops[0].sigma_b2(0, 0) = 1000.0;
    EXPECT_NEAR(forward(m, 0).sigma[0], 1000.0 + 1e-3, 1e-9);
}

TEST(Forward, NonFiniteParameterRaises) {
    auto m = zeros_like<double>(tiny_shape(1, 1, 1, 1, 0));
    m.hops[0].mu_b2(0, 0) = std::nan("");
    EXPECT_THROW(forward(m, 0), NumericalError);
    EXPECT_THROW(forward(m, 1), InputError);
}

TEST(Loss, PerfectFitUnitSigmaIsZero) {
    // sigma = softplus(a) + floor = 1  =>  a = ln(e^{1-floor} - 1).
    auto m = zeros_like<double>(tiny_shape(2, 3, 1, 1, 1));
    for (auto& e : m.hops) e.sigma_b2(0, 0) = std::log(std::exp(1.0 - 1e-3) - 1.0);
    std::vector<Matrix<double>> targets(2, Matrix<double>(2, 3));
    EXPECT_NEAR(library_loss(m, targets, {}), 0.0, 1e-12);
}

TEST(Loss, SingleResidualHalf) {
    auto m = zeros_like<double>(tiny_shape(1, 1, 1, 1, 0));
    m.hops[0].sigma_b2(0, 0) = std::log(std::exp(1.0 - 1e-3) - 1.0);
    std::vector<Matrix<double>> targets{Matrix<double>(1, 1)};
    targets[0](0, 0) = 1.0;
    EXPECT_NEAR(library_loss(m, targets, {}), 0.5, 1e-12);
}

TEST(Loss, MatchesReferenceForEveryVariant) {
    std::mt19937_64 rng(31);
    const auto s = tiny_shape(5, 4, 3, 4, 3);
    const auto m = random_model(s, rng);
    const auto t = random_targets(s, rng);
    for (LogSigmaTerm term : {LogSigmaTerm::per_dimension, LogSigmaTerm::single, LogSigmaTerm::none}) {
        for (const std::vector<std::size_t>& hops : {std::vector<std::size_t>{}, std::vector<std::size_t>{3}}) {
            LossOptions opts;
            opts.log_sigma = term;
            opts.hops = hops;
            const double want = oracle::reference_loss(m, t, opts);
            EXPECT_NEAR(library_loss(m, t, opts), want, 1e-10 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST(Loss, ClosedFormSigmaOptimum) {
    std::mt19937_64 rng(37);
    std::uniform_real_distribution<double> su(1e-3, 50.0);
    std::uniform_int_distribution<int> du(1, 64);
    for (int trial = 0; trial < 100; ++trial) {
        const double S = su(rng);
        const double d = du(rng);
        auto f = [&](double sigma) { return S / (2.0 * sigma * sigma) + d * std::log(sigma); };
        const double best = oracle::golden_section_min(f, 1e-4, 100.0, 1e-10);
        const double closed = std::sqrt(S / d);
        EXPECT_NEAR(best, closed, 1e-6);
        EXPECT_NEAR(f(closed), d / 2.0 + d * std::log(closed), 1e-12 * std::max(1.0, std::abs(f(closed))));
    }
}

TEST(Loss, DecomposesOverNodes) {
    std::mt19937_64 rng(41);
    const auto s = tiny_shape(4, 3, 2, 3, 1);
    const auto m = random_model(s, rng);
    auto t = random_targets(s, rng);
    const double before = library_loss(m, t, {});
    const auto est = forward_all(m);
    // Replace node 2's targets by its means: only node 2's residual term changes.
    double node_residual = 0.0;
    for (std::size_t l = 0; l <= s.hops; ++l) {
        double sq = 0.0;
        for (std::size_t j = 0; j < s.dim; ++j) {
            const double r = t[l](2, j) - est[l].mu(2, j);
            sq += r * r;
            t[l](2, j) = est[l].mu(2, j);
        }
        node_residual += sq / (2.0 * est[l].sigma[2] * est[l].sigma[2]);
    }
    EXPECT_NEAR(library_loss(m, t, {}), before - node_residual, 1e-10);
}

TEST(Gradient, ZeroResidualGivesZeroMuGradients) {
    std::mt19937_64 rng(43);
    const auto s = tiny_shape(4, 3, 2, 3, 1);
    const auto m = random_model(s, rng);
    const auto est = forward_all(m);
    std::vector<Matrix<double>> t;
    for (const auto& e : est) t.push_back(e.mu);
    auto grad = zeros_like<double>(s);
    loss_and_gradient(m, std::span<const Matrix<double>>(t), {}, grad);
    for (const auto& e : grad.hops) {
        for (double v : e.mu_w1.flat()) EXPECT_EQ(v, 0.0);
        for (double v : e.mu_b1.flat()) EXPECT_EQ(v, 0.0);
        for (double v : e.mu_w2.flat()) EXPECT_EQ(v, 0.0);
        for (double v : e.mu_b2.flat()) EXPECT_EQ(v, 0.0);
    }
}

TEST(Gradient, FiniteDifferenceFixedInstance) {
    std::mt19937_64 rng(47);
    const auto s = tiny_shape(4, 3, 2, 3, 2);
    const auto m = random_model(s, rng);
    const auto t = random_targets(s, rng);
    for (LogSigmaTerm term : {LogSigmaTerm::per_dimension, LogSigmaTerm::single, LogSigmaTerm::none}) {
        LossOptions opts;
        opts.log_sigma = term;
        auto grad = zeros_like<double>(s);
        const double loss = loss_and_gradient(m, std::span<const Matrix<double>>(t), opts, grad);
        EXPECT_NEAR(loss, oracle::reference_loss(m, t, opts), 1e-10 * std::max(1.0, std::abs(loss)));
        const auto fd = oracle::finite_difference_gradient(
            m, [&](const BasicMqeModel<double>& p) { return oracle::reference_loss(p, t, opts); }, 1e-5);
        EXPECT_LT(max_relative_error(grad, fd, 1e-9), 1e-6);
    }
}

TEST(Gradient, MaskedHopMatchesSingleHopChainRule) {
    std::mt19937_64 rng(53);
    const auto s = tiny_shape(5, 3, 3, 4, 3);
    const auto m = random_model(s, rng);
    const auto t = random_targets(s, rng);
    LossOptions only;
    only.hops = {2};
    auto grad = zeros_like<double>(s);
    loss_and_gradient(m, std::span<const Matrix<double>>(t), only, grad);
    // Z gradient from hop 2 alone equals backward_hop's contribution for hop 2.
    auto direct = zeros_like<double>(s);
    const auto est2 = forward(m, 2);
    backward_hop(m, 2, est2, t[2], only.log_sigma, direct);
    EXPECT_EQ(grad.z, direct.z);
    const auto fd = oracle::finite_difference_gradient(
        m, [&](const BasicMqeModel<double>& p) { return oracle::reference_loss(p, t, only); }, 1e-5);
    EXPECT_LT(max_relative_error(grad, fd, 1e-9), 1e-6);
    // Masked hops receive no gradient at all.
    for (std::size_t l : {0u, 1u, 3u})
        for (double v : grad.hops[l].mu_w1.flat()) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, ZAccumulatesAcrossHops) {
    std::mt19937_64 rng(59);
    const auto s = tiny_shape(4, 2, 2, 3, 2);
    const auto m = random_model(s, rng);
    const auto t = random_targets(s, rng);
    auto total = zeros_like<double>(s);
    loss_and_gradient(m, std::span<const Matrix<double>>(t), {}, total);
    Matrix<double> sum(s.nodes, s.latent);
    for (std::size_t l = 0; l <= s.hops; ++l) {
        LossOptions one;
        one.hops = {l};
        auto g = zeros_like<double>(s);
        loss_and_gradient(m, std::span<const Matrix<double>>(t), one, g);
        for (std::size_t k = 0; k < sum.size(); ++k) sum.flat()[k] += g.z.flat()[k];
    }
    for (std::size_t k = 0; k < sum.size(); ++k) EXPECT_NEAR(total.z.flat()[k], sum.flat()[k], 1e-12);
}

TEST(Train, ZeroEpochsLeavesModel) {
    std::mt19937_64 rng(61);
    const auto s = tiny_shape(4, 3, 2, 3, 1);
    const auto m = init_model<float>(s, 5);
    const PropagatedStack stack({oracle::random_matrix(4, 3, rng), oracle::random_matrix(4, 3, rng)});
    TrainConfig cfg;
    cfg.epochs = 0;
    const auto r = train(m, stack, cfg);
    EXPECT_EQ(r.model, m);
    EXPECT_TRUE(r.loss_trace.empty());
    EXPECT_EQ(embeddings(r.model), m.z);
}

TEST(Train, LossDecreasesOnSeeds) {
    const auto s = tiny_shape(8, 4, 3, 6, 2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        std::mt19937_64 rng(seed);
        std::vector<FeatureSet> layers;
        for (std::size_t l = 0; l <= s.hops; ++l) layers.push_back(oracle::random_matrix(8, 4, rng));
        TrainConfig cfg;
        cfg.epochs = 500;
        const auto r = train(init_model<float>(s, seed), PropagatedStack(layers), cfg);
        ASSERT_EQ(r.loss_trace.size(), 500u);
        EXPECT_LT(r.final_loss, r.loss_trace.front()) << "seed " << seed;
    }
}

TEST(Train, Deterministic) {
    std::mt19937_64 rng(67);
    const auto s = tiny_shape(10, 4, 3, 5, 2);
    std::vector<FeatureSet> layers;
    for (std::size_t l = 0; l <= s.hops; ++l) layers.push_back(oracle::random_matrix(10, 4, rng));
    TrainConfig cfg;
    cfg.epochs = 50;
    const auto a = train(init_model<float>(s, 3), PropagatedStack(layers), cfg);
    const auto b = train(init_model<float>(s, 3), PropagatedStack(layers), cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(a.loss_trace, b.loss_trace);
}

TEST(Train, SigmaTracksRmsResidualAtConvergence) {
    // h = 8 hidden units cannot span 24 random 64-d targets, so most residuals
    // stay far above the floor. f = 2h lets z steer the mu and sigma hidden
    // layers independently, which makes any per-node sigma reachable. A short
    // low-rate phase settles the Adam oscillation around the optimum.
    std::mt19937_64 rng(71);
    const auto s = tiny_shape(24, 64, 16, 8, 1);
    std::vector<FeatureSet> layers;
    for (std::size_t l = 0; l <= s.hops; ++l) layers.push_back(oracle::random_matrix(24, 64, rng));
    const PropagatedStack stack(layers);
    TrainConfig cfg;
    cfg.epochs = 10000;
    auto r = train(init_model<double>(s, 7), stack, cfg);
    cfg.epochs = 5000;
    cfg.learning_rate = 1e-3;
    r = train(r.model, stack, cfg);
    std::size_t checked = 0;
    for (std::size_t l = 0; l <= s.hops; ++l) {
        const auto est = forward(r.model, l);
        for (std::size_t i = 0; i < s.nodes; ++i) {
            double sq = 0.0;
            for (std::size_t j = 0; j < s.dim; ++j) {
                const double d = layers[l](i, j) - est.mu(i, j);
                sq += d * d;
            }
            const double rms = std::sqrt(sq / s.dim);
            if (rms <= 10.0 * s.sigma_floor) continue;
            ++checked;
            EXPECT_NEAR(est.sigma[i], rms, 0.1 * rms) << "hop " << l << " node " << i;
        }
    }
    EXPECT_GE(checked, 12u);
}

TEST(Train, RejectsBadConfig) {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    EXPECT_THROW(cfg.validate(), ConfigError);
    ModelShape s = tiny_shape(2, 2, 0, 1, 0);
    EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Io, EmbeddingRoundTrip) {
    const auto m = init_model<float>(tiny_shape(6, 3, 4, 2, 1), 8);
    const auto path = std::filesystem::temp_directory_path() / "mqe_emb_test.bin";
    write_embeddings(path, m.z);
    EXPECT_EQ(std::filesystem::file_size(path), 16u + 4u * 6u * 4u);
    EXPECT_EQ(read_embeddings(path), m.z);
    std::filesystem::remove(path);
}

TEST(Io, ModelRoundTrip) {
    const auto m = init_model<float>(tiny_shape(5, 3, 2, 4, 2), 12);
    const auto path = std::filesystem::temp_directory_path() / "mqe_model_test.bin";
    write_model(path, m);
    EXPECT_EQ(read_model(path), m);
    std::filesystem::remove(path);
}
