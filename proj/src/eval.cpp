#include "mqe/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "mqe/error.hpp"
#include "mqe/kernels.hpp"
#include "mqe/propagation.hpp"
#include "mqe/rng.hpp"

namespace mqe {
namespace {

constexpr const char* kModule = "eval";

void softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double& v : z) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : z) v /= sum;
}

void logits(const SoftmaxFit& fit, const double* x, std::vector<double>& out) {
    out.assign(fit.bias.begin(), fit.bias.end());
    const std::size_t classes = fit.bias.size();
    for (std::size_t p = 0; p < fit.weights.rows(); ++p) {
        if (x[p] != 0.0) kernels::axpy(x[p], fit.weights.row(p).data(), out.data(), classes);
    }
}

// Mean cross-entropy plus (l2 / 2) ||W||^2; fills gradients when requested.
double softmax_objective(const SoftmaxFit& fit, const Matrix<double>& x, std::span<const std::int64_t> labels,
                         std::span<const std::size_t> rows, double l2, Matrix<double>* g_w, std::vector<double>* g_b) {
    const std::size_t classes = fit.bias.size();
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    if (g_w != nullptr) {
        g_w->fill(0.0);
        g_b->assign(classes, 0.0);
    }
    std::vector<double> z;
    double loss = 0.0;
    for (std::size_t r : rows) {
        const double* xr = x.row(r).data();
        logits(fit, xr, z);
        softmax_inplace(z);
        const auto y = static_cast<std::size_t>(labels[r]);
        loss -= std::log(std::max(z[y], 1e-300)) * inv_n;
        if (g_w != nullptr) {
            z[y] -= 1.0;
            for (double& v : z) v *= inv_n;
            for (std::size_t p = 0; p < x.cols(); ++p) {
                if (xr[p] != 0.0) kernels::axpy(xr[p], z.data(), g_w->row(p).data(), classes);
            }
            for (std::size_t c = 0; c < classes; ++c) (*g_b)[c] += z[c];
        }
    }
    const auto w = fit.weights.flat();
    loss += 0.5 * l2 * kernels::dot(w.data(), w.data(), w.size());
    if (g_w != nullptr) kernels::axpy(l2, w.data(), g_w->data(), w.size());
    return loss;
}

Matrix<double> standardized(const Matrix<double>& x, std::span<const std::size_t> rows) {
    const std::size_t f = x.cols();
    std::vector<double> mean(f, 0.0);
    std::vector<double> var(f, 0.0);
    for (std::size_t r : rows) {
        for (std::size_t j = 0; j < f; ++j) mean[j] += x(r, j);
    }
    for (double& m : mean) m /= static_cast<double>(rows.size());
    for (std::size_t r : rows) {
        for (std::size_t j = 0; j < f; ++j) var[j] += (x(r, j) - mean[j]) * (x(r, j) - mean[j]);
    }
    Matrix<double> out(x.rows(), f);
    for (std::size_t j = 0; j < f; ++j) {
        const double sd = std::sqrt(var[j] / static_cast<double>(rows.size()));
        const double scale = sd > 1e-12 ? 1.0 / sd : 1.0;
        for (std::size_t i = 0; i < x.rows(); ++i) out(i, j) = (x(i, j) - mean[j]) * scale;
    }
    return out;
}

std::vector<std::size_t> parse_index_line(const std::string& line, const std::string& key,
                                          const std::filesystem::path& path, std::size_t line_no) {
    const auto colon = line.find(':');
    std::string head = line.substr(0, colon);
    head.erase(0, head.find_first_not_of(" \t"));
    head.erase(head.find_last_not_of(" \t\r") + 1);
    if (colon == std::string::npos || head != key) {
        throw InputError(kModule, path.string() + ":" + std::to_string(line_no) + ": expected '" + key + ":'");
    }
    std::istringstream fields(line.substr(colon + 1));
    std::vector<std::size_t> out;
    std::string tok;
    while (fields >> tok) {
        std::size_t pos = 0;
        long long v = -1;
        try {
            v = std::stoll(tok, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != tok.size() || v < 0) {
            throw InputError(kModule, path.string() + ":" + std::to_string(line_no) + ": bad index '" + tok + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

}  // namespace

void Splits::validate(std::size_t n) const {
    std::vector<std::uint8_t> seen(n, 0);
    for (const auto* part : {&train, &val, &test}) {
        for (std::size_t i : *part) {
            if (i >= n) throw InputError(kModule, "split index " + std::to_string(i) + " out of range");
            if (seen[i]) throw InputError(kModule, "node " + std::to_string(i) + " appears in more than one split");
            seen[i] = 1;
        }
    }
    if (train.empty()) throw EvaluationError(kModule, "train split is empty");
    if (test.empty()) throw EvaluationError(kModule, "test split is empty");
}

Splits random_splits(std::size_t n, std::uint64_t seed, double train_frac, double val_frac) {
    if (!(train_frac > 0.0) || !(val_frac >= 0.0) || train_frac + val_frac >= 1.0) {
        throw ConfigError(kModule, "split fractions must satisfy train > 0, val >= 0, train + val < 1");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(val_frac * static_cast<double>(n)));
    Splits s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
    for (auto* part : {&s.train, &s.val, &s.test}) std::sort(part->begin(), part->end());
    return s;
}

Splits read_splits(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(kModule, "cannot open split file " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
    }
    if (lines.size() != 3) throw InputError(kModule, path.string() + ": expected exactly three lines (train/val/test)");
    Splits s;
    s.train = parse_index_line(lines[0], "train", path, 1);
    s.val = parse_index_line(lines[1], "val", path, 2);
    s.test = parse_index_line(lines[2], "test", path, 3);
    return s;
}

void write_splits(const std::filesystem::path& path, const Splits& splits) {
    std::ofstream out(path);
    if (!out) throw InputError(kModule, "cannot write " + path.string());
    auto emit = [&](const char* key, const std::vector<std::size_t>& idx) {
        out << key << ':';
        for (std::size_t i : idx) out << ' ' << i;
        out << '\n';
    };
    emit("train", splits.train);
    emit("val", splits.val);
    emit("test", splits.test);
}

Labels read_labels(const std::filesystem::path& path) {
    Labels labels = read_int_vector(path);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0) {
            throw InputError(kModule, path.string() + ":" + std::to_string(i + 1) + ": negative class id");
        }
    }
    return labels;
}

std::size_t class_count(std::span<const std::int64_t> labels) {
    std::int64_t mx = -1;
    for (auto y : labels) mx = std::max(mx, y);
    return static_cast<std::size_t>(mx + 1);
}

SoftmaxFit fit_softmax(const Matrix<double>& x, std::span<const std::int64_t> labels, std::span<const std::size_t> rows,
                       std::size_t classes, double l2, std::size_t epochs, double learning_rate, std::uint64_t seed) {
    if (rows.empty()) throw EvaluationError(kModule, "cannot fit a classifier on zero rows");
    SoftmaxFit fit{Matrix<double>(x.cols(), classes), std::vector<double>(classes, 0.0), 0.0, 0.0};
    Rng rng = make_rng(seed);
    std::normal_distribution<double> init(0.0, 0.01);
    for (double& w : fit.weights.flat()) w = init(rng);

    Matrix<double> g_w(x.cols(), classes);
    std::vector<double> g_b(classes);
    Matrix<double> m_w(x.cols(), classes);
    Matrix<double> v_w(x.cols(), classes);
    std::vector<double> m_b(classes, 0.0);
    std::vector<double> v_b(classes, 0.0);
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double eps = 1e-8;
    double b1_pow = 1.0;
    double b2_pow = 1.0;
    auto adam = [&](double* p, const double* g, double* m, double* v, std::size_t count) {
        const double c1 = 1.0 / (1.0 - b1_pow);
        const double c2 = 1.0 / (1.0 - b2_pow);
        for (std::size_t k = 0; k < count; ++k) {
            m[k] = b1 * m[k] + (1.0 - b1) * g[k];
            v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
            p[k] -= learning_rate * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
        }
    };
    for (std::size_t e = 0; e < epochs; ++e) {
        const double loss = softmax_objective(fit, x, labels, rows, l2, &g_w, &g_b);
        if (e == 0) fit.initial_loss = loss;
        b1_pow *= b1;
        b2_pow *= b2;
        adam(fit.weights.data(), g_w.data(), m_w.data(), v_w.data(), g_w.size());
        adam(fit.bias.data(), g_b.data(), m_b.data(), v_b.data(), classes);
    }
    fit.final_loss = softmax_objective(fit, x, labels, rows, l2, nullptr, nullptr);
    if (epochs == 0) fit.initial_loss = fit.final_loss;
    return fit;
}

double accuracy(const SoftmaxFit& fit, const Matrix<double>& x, std::span<const std::int64_t> labels,
                std::span<const std::size_t> rows) {
    if (rows.empty()) return 0.0;
    std::vector<double> z;
    std::size_t correct = 0;
    for (std::size_t r : rows) {
        logits(fit, x.row(r).data(), z);
        const auto pred = static_cast<std::int64_t>(std::max_element(z.begin(), z.end()) - z.begin());
        if (pred == labels[r]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(rows.size());
}

ProbeResult probe(const Matrix<double>& embeddings, std::span<const std::int64_t> labels, const ProbeConfig& cfg) {
    const std::size_t n = embeddings.rows();
    if (labels.size() != n) {
        throw InputError(kModule, std::to_string(labels.size()) + " labels for " + std::to_string(n) + " embeddings");
    }
    if (cfg.runs < 1) throw ConfigError(kModule, "probe runs must be >= 1");
    if (cfg.l2_grid.empty()) throw ConfigError(kModule, "empty L2 grid");
    for (auto y : labels) {
        if (y < 0) throw InputError(kModule, "negative class id");
    }
    const std::size_t classes = class_count(labels);

    ProbeResult result;
    result.runs = cfg.runs;
    for (std::size_t run = 0; run < cfg.runs; ++run) {
        const std::uint64_t run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(run));
        const Splits splits = cfg.fixed_splits ? *cfg.fixed_splits
                                               : random_splits(n, derive_seed(run_seed, "splits"), cfg.train_frac,
                                                               cfg.val_frac);
        splits.validate(n);
        std::vector<std::uint8_t> present(classes, 0);
        std::size_t distinct = 0;
        for (std::size_t i : splits.train) {
            if (!present[static_cast<std::size_t>(labels[i])]++) ++distinct;
        }
        if (distinct < 2) throw EvaluationError(kModule, "train split contains a single class");

        const Matrix<double> x = cfg.standardize ? standardized(embeddings, splits.train) : embeddings;
        const std::span<const std::size_t> select_rows = splits.val.empty() ? std::span<const std::size_t>(splits.train)
                                                                            : std::span<const std::size_t>(splits.val);
        double best_val = -1.0;
        double best_l2 = cfg.l2_grid.front();
        double best_test = 0.0;
        for (double l2 : cfg.l2_grid) {
            const SoftmaxFit fit = fit_softmax(x, labels, splits.train, classes, l2, cfg.epochs, cfg.learning_rate,
                                               derive_seed(run_seed, "init"));
            const double val_acc = accuracy(fit, x, labels, select_rows);
            if (val_acc > best_val) {
                best_val = val_acc;
                best_l2 = l2;
                best_test = accuracy(fit, x, labels, splits.test);
            }
        }
        result.run_accuracies.push_back(best_test);
        result.run_l2.push_back(best_l2);
    }

    const double runs = static_cast<double>(cfg.runs);
    result.accuracy_mean = std::accumulate(result.run_accuracies.begin(), result.run_accuracies.end(), 0.0) / runs;
    double var = 0.0;
    for (double a : result.run_accuracies) var += (a - result.accuracy_mean) * (a - result.accuracy_mean);
    result.accuracy_std = std::sqrt(var / runs);

    std::map<double, std::size_t> votes;
    for (double l2 : result.run_l2) ++votes[l2];
    std::size_t best_votes = 0;
    for (const auto& [l2, count] : votes) {
        if (count > best_votes) {
            best_votes = count;
            result.chosen_l2 = l2;
        }
    }
    return result;
}

ProbeResult probe(const Matrix<float>& embeddings, std::span<const std::int64_t> labels, const ProbeConfig& cfg) {
    return probe(embeddings.cast<double>(), labels, cfg);
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError(kModule, "correlation inputs differ in length");
    if (x.size() < 2) return std::nullopt;
    // Exact test; the centered sums of a constant vector need not be 0.
    auto constant = [](std::span<const double> v) {
        return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
    };
    if (constant(x) || constant(y)) return std::nullopt;
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> average_ranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t start = 0; start < order.size();) {
        std::size_t stop = start + 1;
        while (stop < order.size() && x[order[stop]] == x[order[start]]) ++stop;
        const double mean_rank = 0.5 * static_cast<double>(start + 1 + stop);
        for (std::size_t k = start; k < stop; ++k) ranks[order[k]] = mean_rank;
        start = stop;
    }
    return ranks;
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError(kModule, "correlation inputs differ in length");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

NoiseReport noise_report(std::span<const double> sigma0, std::span<const double> s_true) {
    if (sigma0.size() != s_true.size()) throw InputError(kModule, "sigma and intensity vectors differ in length");
    NoiseReport report;
    for (std::size_t i = 0; i < s_true.size(); ++i) {
        if (s_true[i] > 0.0) {
            report.nodes.push_back(i);
            report.sigma0.push_back(sigma0[i]);
            report.s_true.push_back(s_true[i]);
        }
    }
    if (report.nodes.empty()) throw EvaluationError(kModule, "no perturbed nodes (all intensities are zero)");
    report.pearson = pearson(report.sigma0, report.s_true);
    report.spearman = spearman(report.sigma0, report.s_true);
    return report;
}

NoiseReport correlation_report(const MqeModel& model, std::span<const double> s_true) {
    if (s_true.size() != model.shape.nodes) {
        throw InputError(kModule, "intensity vector has " + std::to_string(s_true.size()) + " entries for " +
                                      std::to_string(model.shape.nodes) + " nodes");
    }
    const HopEstimate<float> est = forward(model, 0);
    std::vector<double> sigma0(est.sigma.begin(), est.sigma.end());
    return noise_report(sigma0, s_true);
}

NoiseReport correlation_report(const MqeModel& model, const NoiseGroundTruth& truth) {
    return correlation_report(model, truth.intensity);
}

std::vector<ProbeResult> hop_sweep(const SparseGraph& g_norm, const FeatureSet& x, std::span<const std::int64_t> labels,
                                   std::size_t max_hop, const ProbeConfig& cfg) {
    const PropagatedStack stack = propagate_stack(g_norm, x, max_hop);
    std::vector<ProbeResult> out;
    out.reserve(stack.layer_count());
    for (const auto& layer : stack.layers()) out.push_back(probe(layer, labels, cfg));
    return out;
}

std::string hop_sweep_csv(std::span<const ProbeResult> results) {
    std::ostringstream out;
    out.precision(17);
    out << "hop,accuracy_mean,accuracy_std,chosen_l2\n";
    for (std::size_t l = 0; l < results.size(); ++l) {
        out << l << ',' << results[l].accuracy_mean << ',' << results[l].accuracy_std << ',' << results[l].chosen_l2
            << '\n';
    }
    return out.str();
}

}  // namespace mqe
