#include "mqe/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mqe/error.hpp"
#include "mqe/rng.hpp"

namespace mqe {
namespace {

constexpr const char* kModule = "data";

}  // namespace

void DatasetBundle::validate() const {
    const std::size_t n = features.rows();
    if (graph.node_count() != n) {
        throw InputError(kModule, "graph has " + std::to_string(graph.node_count()) + " nodes but " +
                                      std::to_string(n) + " feature rows");
    }
    graph.check_invariants();
    check_finite(features, kModule, "features");
    if (labels.size() != n) {
        throw InputError(kModule, std::to_string(labels.size()) + " labels for " + std::to_string(n) + " nodes");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] < 0) throw InputError(kModule, "label of node " + std::to_string(i) + " is negative");
    }
    if (clean_features && (clean_features->rows() != n || clean_features->cols() != features.cols())) {
        throw InputError(kModule, "clean features shape differs from features");
    }
    if (noise_mask && noise_mask->size() != n) throw InputError(kModule, "noise mask length differs from node count");
    if (intensity && intensity->size() != n) throw InputError(kModule, "intensity length differs from node count");
    if (splits) splits->validate(n);
}

DatasetBundle load_dataset(const std::filesystem::path& dir) {
    for (const char* required : {"edges.txt", "features.txt", "labels.txt"}) {
        if (!std::filesystem::exists(dir / required)) {
            throw InputError(kModule, "missing " + (dir / required).string());
        }
    }
    DatasetBundle b;
    b.features = read_features(dir / "features.txt");
    const auto pairs = read_edge_pairs(dir / "edges.txt");
    try {
        b.graph = from_edge_list(b.features.rows(), pairs);
    } catch (const InputError& e) {
        throw InputError(kModule, (dir / "edges.txt").string() + ": " + e.what());
    }
    b.labels = read_labels(dir / "labels.txt");
    if (std::filesystem::exists(dir / "clean_features.txt")) b.clean_features = read_features(dir / "clean_features.txt");
    if (std::filesystem::exists(dir / "noise_mask.txt")) {
        const auto raw = read_int_vector(dir / "noise_mask.txt");
        std::vector<std::uint8_t> mask(raw.size());
        for (std::size_t i = 0; i < raw.size(); ++i) {
            if (raw[i] != 0 && raw[i] != 1) {
                throw InputError(kModule, (dir / "noise_mask.txt").string() + ":" + std::to_string(i + 1) +
                                              ": mask entries must be 0 or 1");
            }
            mask[i] = static_cast<std::uint8_t>(raw[i]);
        }
        b.noise_mask = std::move(mask);
    }
    if (std::filesystem::exists(dir / "intensity.txt")) b.intensity = read_vector(dir / "intensity.txt");
    if (std::filesystem::exists(dir / "splits.txt")) b.splits = read_splits(dir / "splits.txt");
    b.validate();
    return b;
}

void save_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle) {
    std::filesystem::create_directories(dir);
    write_edge_list(dir / "edges.txt", bundle.graph);
    write_features(dir / "features.txt", bundle.features);
    write_int_vector(dir / "labels.txt", bundle.labels);
    if (bundle.clean_features) write_features(dir / "clean_features.txt", *bundle.clean_features);
    if (bundle.noise_mask) {
        std::vector<std::int64_t> mask(bundle.noise_mask->begin(), bundle.noise_mask->end());
        write_int_vector(dir / "noise_mask.txt", mask);
    }
    if (bundle.intensity) write_vector(dir / "intensity.txt", *bundle.intensity);
    if (bundle.splits) write_splits(dir / "splits.txt", *bundle.splits);
}

void SbmSpec::validate() const {
    if (nodes < 1) throw ConfigError(kModule, "sbm needs at least one node");
    if (classes < 1 || classes > nodes) throw ConfigError(kModule, "sbm classes must lie in [1, n]");
    if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) {
        throw ConfigError(kModule, "sbm probabilities must satisfy 0 <= p_out <= p_in <= 1");
    }
    if (dim < 1) throw ConfigError(kModule, "sbm feature dimension must be >= 1");
    if (!(class_sep >= 0.0) || !(within_std >= 0.0)) throw ConfigError(kModule, "sbm scales must be >= 0");
}

DatasetBundle gen_sbm(const SbmSpec& spec) {
    spec.validate();
    const std::size_t n = spec.nodes;
    const std::size_t d = spec.dim;

    DatasetBundle b;
    b.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) b.labels[i] = static_cast<std::int64_t>(i % spec.classes);
    Rng label_rng = make_rng(derive_seed(spec.seed, "labels"));
    std::shuffle(b.labels.begin(), b.labels.end(), label_rng);

    // Class-mean entries are N(0, 1) * class_sep / sqrt(d) so each mean vector
    // has expected squared norm class_sep^2.
    Matrix<double> means(spec.classes, d);
    Rng mean_rng = make_rng(derive_seed(spec.seed, "class-means"));
    std::normal_distribution<double> unit(0.0, 1.0);
    const double mean_scale = spec.class_sep / std::sqrt(static_cast<double>(d));
    for (double& v : means.flat()) v = mean_scale * unit(mean_rng);

    // One stream per node: edges to higher-indexed nodes, then features.
    std::vector<EdgePair> pairs;
    const std::uint64_t edge_root = derive_seed(spec.seed, "edges");
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(derive_seed(edge_root, static_cast<std::uint64_t>(i)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = b.labels[i] == b.labels[j] ? spec.p_in : spec.p_out;
            if (u(rng) < p) pairs.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        }
    }
    b.graph = from_edge_list(n, pairs);

    b.features = FeatureSet(n, d);
    const std::uint64_t feature_root = derive_seed(spec.seed, "features");
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng = make_rng(derive_seed(feature_root, static_cast<std::uint64_t>(i)));
        const auto mean = means.row(static_cast<std::size_t>(b.labels[i]));
        auto row = b.features.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = mean[j] + spec.within_std * unit(rng);
    }
    b.clean_features = b.features;
    return b;
}

}  // namespace mqe
