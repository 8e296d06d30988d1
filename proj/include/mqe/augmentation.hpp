#pragma once

#include <cstddef>
#include <vector>

#include "mqe/features.hpp"
#include "mqe/graph.hpp"

namespace mqe {

struct KnnConfig {
    std::size_t k = 5;
};

struct KnnDiagnostics {
    // Rows whose summed feature vector has zero norm. They have similarity 0
    // to every node and so pick the k lowest-index candidates.
    std::vector<NodeId> zero_norm_nodes;
    double min_similarity = 0.0;
    double max_similarity = 0.0;
};

// Each node picks the k other nodes with the highest cosine similarity (ties to
// the smaller index); the directed picks are symmetrized by union into a binary
// graph without self-loops.
SparseGraph cosine_knn(const FeatureSet& xstar, const KnnConfig& cfg, KnnDiagnostics* diagnostics = nullptr);

// A* = (g_norm + sym_normalize(knn, no self-loops)) / 2.
SparseGraph build_augmented(const SparseGraph& g_norm, const SparseGraph& knn);

}  // namespace mqe
