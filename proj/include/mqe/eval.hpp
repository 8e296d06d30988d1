#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mqe/estimator.hpp"
#include "mqe/features.hpp"
#include "mqe/graph.hpp"
#include "mqe/noise.hpp"

namespace mqe {

using Labels = std::vector<std::int64_t>;

struct Splits {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;

    // Disjoint, in range, non-empty train.
    void validate(std::size_t n) const;
};

// Random split of nodes 0..n-1 into train/val/test by the given fractions; the
// remainder after train and val goes to test.
Splits random_splits(std::size_t n, std::uint64_t seed, double train_frac = 0.1, double val_frac = 0.1);

// Three lines "train: i j ...", "val: ...", "test: ...".
Splits read_splits(const std::filesystem::path& path);
void write_splits(const std::filesystem::path& path, const Splits& splits);

Labels read_labels(const std::filesystem::path& path);
std::size_t class_count(std::span<const std::int64_t> labels);

struct ProbeConfig {
    std::size_t runs = 5;
    std::uint64_t seed = 0;
    std::size_t epochs = 300;
    double learning_rate = 0.01;
    std::vector<double> l2_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    double train_frac = 0.1;
    double val_frac = 0.1;
    // When set, every run uses these splits; otherwise each run draws its own.
    std::optional<Splits> fixed_splits;
    // Standardize each embedding column with train-split statistics.
    bool standardize = true;
};

struct ProbeResult {
    double accuracy_mean = 0.0;
    double accuracy_std = 0.0;  // population standard deviation over runs
    std::size_t runs = 0;
    double chosen_l2 = 0.0;     // most frequently selected strength
    std::vector<double> run_accuracies;
    std::vector<double> run_l2;
};

// Softmax regression with L2 penalty, one fit on the train split.
struct SoftmaxFit {
    Matrix<double> weights;  // f x C
    std::vector<double> bias;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};
SoftmaxFit fit_softmax(const Matrix<double>& x, std::span<const std::int64_t> labels, std::span<const std::size_t> rows,
                       std::size_t classes, double l2, std::size_t epochs, double learning_rate, std::uint64_t seed);
double accuracy(const SoftmaxFit& fit, const Matrix<double>& x, std::span<const std::int64_t> labels,
                std::span<const std::size_t> rows);

// Linear probe: L2 strength picked on validation accuracy, test accuracy
// averaged over `cfg.runs` runs with distinct seeds.
ProbeResult probe(const Matrix<double>& embeddings, std::span<const std::int64_t> labels, const ProbeConfig& cfg);
ProbeResult probe(const Matrix<float>& embeddings, std::span<const std::int64_t> labels, const ProbeConfig& cfg);

// Returns nullopt when either input has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
// Average ranks (1-based) with ties sharing their mean rank.
std::vector<double> average_ranks(std::span<const double> x);

struct NoiseReport {
    std::vector<std::size_t> nodes;  // perturbed nodes, ascending
    std::vector<double> sigma0;      // estimated hop-0 sigma per listed node
    std::vector<double> s_true;      // true intensity per listed node
    std::optional<double> pearson;   // nullopt: undefined (constant input)
    std::optional<double> spearman;
};

// Correlates sigma0 with the true intensity over perturbed nodes (s_i > 0).
NoiseReport noise_report(std::span<const double> sigma0, std::span<const double> s_true);
NoiseReport correlation_report(const MqeModel& model, std::span<const double> s_true);
NoiseReport correlation_report(const MqeModel& model, const NoiseGroundTruth& truth);

// Probes every layer of propagate_stack(g_norm, x, max_hop).
std::vector<ProbeResult> hop_sweep(const SparseGraph& g_norm, const FeatureSet& x, std::span<const std::int64_t> labels,
                                   std::size_t max_hop, const ProbeConfig& cfg);
std::string hop_sweep_csv(std::span<const ProbeResult> results);

}  // namespace mqe
