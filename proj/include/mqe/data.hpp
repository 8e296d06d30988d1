#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mqe/eval.hpp"
#include "mqe/features.hpp"
#include "mqe/graph.hpp"

namespace mqe {

// A dataset directory holds edges.txt, features.txt, labels.txt and optionally
// clean_features.txt, noise_mask.txt, intensity.txt and splits.txt.
struct DatasetBundle {
    SparseGraph graph;  // raw binary adjacency
    FeatureSet features;
    Labels labels;
    std::optional<FeatureSet> clean_features;
    std::optional<std::vector<std::uint8_t>> noise_mask;
    std::optional<std::vector<double>> intensity;
    std::optional<Splits> splits;

    std::size_t node_count() const noexcept { return features.rows(); }
    void validate() const;
};

DatasetBundle load_dataset(const std::filesystem::path& dir);
void save_dataset(const std::filesystem::path& dir, const DatasetBundle& bundle);

// Planted-partition benchmark.
struct SbmSpec {
    std::size_t nodes = 600;
    std::size_t classes = 3;
    double p_in = 0.05;
    double p_out = 0.005;
    std::size_t dim = 64;
    double class_sep = 1.0;   // expected norm of each class-mean vector
    double within_std = 0.5;  // per-coordinate spread around the class mean
    std::uint64_t seed = 0;

    void validate() const;
};

// Balanced class assignment; each pair (i, j) is an edge with probability p_in
// (same class) or p_out. Features are class mean + within_std * N(0, 1); the
// clean copy equals the generated features.
DatasetBundle gen_sbm(const SbmSpec& spec);

}  // namespace mqe
