#pragma once

// End-to-end experiment orchestration: dataset -> noise -> augmented
// propagation -> estimator training -> probe and noise reports. Configuration
// is a flat key=value document; command-line flags use the same key names.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mqe/augmentation.hpp"
#include "mqe/data.hpp"
#include "mqe/estimator.hpp"
#include "mqe/eval.hpp"
#include "mqe/noise.hpp"

namespace mqe {

enum class Ablation { none, no_aug, no_mh, no_reg };

bool parse_ablation(std::string_view text, Ablation& out) noexcept;
const char* ablation_name(Ablation a) noexcept;

// Resolved key=value settings. Keys are the long flag names without dashes.
using ConfigValues = std::map<std::string, std::string>;

struct ConfigKey {
    const char* name;
    const char* default_value;  // nullptr: required
    const char* help;
};

// All recognized keys in manifest order.
const std::vector<ConfigKey>& config_keys();

// Parses "key = value" lines ('#' comments, blank lines ignored). Unknown keys
// and duplicate keys are ConfigErrors.
ConfigValues parse_config_text(std::string_view text, std::string_view origin = "<config>");
ConfigValues read_config_file(const std::filesystem::path& path);

struct ExperimentConfig {
    std::string source;  // "sbm" or "dir"
    std::filesystem::path data_dir;
    std::filesystem::path out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    std::string kernels = "auto";
    SbmSpec sbm;
    std::optional<NoiseSpec> noise;
    KnnConfig knn;
    ModelShape model;  // nodes/dim filled from the data
    TrainConfig train;
    LogSigmaTerm log_sigma = LogSigmaTerm::per_dimension;
    Ablation ablation = Ablation::none;
    ProbeConfig probe;
    bool probe_raw = true;
    bool export_stack = false;

    // Fills defaults for absent keys, then validates; names the first missing
    // required key or malformed value.
    static ExperimentConfig from_values(const ConfigValues& values);
    ConfigValues to_values() const;
};

// Substream seeds derived from the root seed.
struct SeedPlan {
    std::uint64_t sbm;
    std::uint64_t noise;
    std::uint64_t init;
    std::uint64_t probe;
};
SeedPlan seed_plan(std::uint64_t root) noexcept;

struct PreparedTargets {
    SparseGraph normalized;   // A-hat
    SparseGraph propagation;  // A* (or A-hat when augmentation is skipped)
    PropagatedStack targets;
    bool augmented = false;
    KnnDiagnostics knn;
};

// A-hat, optional kNN augmentation on the summed original-graph stack, and the
// target stack propagated on the resulting graph.
PreparedTargets prepare_targets(const SparseGraph& raw, const FeatureSet& x, std::size_t hops, const KnnConfig& knn,
                                bool augment);

LossOptions loss_options(Ablation ablation, LogSigmaTerm log_sigma, std::size_t hops);

struct RunOutputs {
    ExperimentConfig config;
    std::string kernel_set;
    std::size_t nodes = 0;
    std::size_t dim = 0;
    bool augmented = false;
    std::size_t knn_zero_norm_nodes = 0;
    MqeModel model;
    std::vector<double> loss_trace;
    double final_loss = 0.0;
    ProbeResult mqe_probe;
    std::optional<ProbeResult> raw_probe;
    std::optional<NoiseReport> noise;
    std::optional<PropagatedStack> targets;  // only kept when export_stack is set
};

// Runs the whole pipeline in memory.
RunOutputs run_experiment(const ExperimentConfig& cfg);

std::string render_manifest(const RunOutputs& run);
std::string render_report(const RunOutputs& run);
std::string render_noise_report(const NoiseReport& report);

// Writes manifest.cfg, report.txt, embeddings.bin, model.bin, loss.csv (and
// stack.bin when requested) into cfg.out_dir.
void write_run_outputs(const RunOutputs& run);

}  // namespace mqe
