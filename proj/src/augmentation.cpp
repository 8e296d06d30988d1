#include "mqe/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mqe/error.hpp"
#include "mqe/kernels.hpp"
#include "mqe/parallel.hpp"

namespace mqe {
namespace {
constexpr const char* kModule = "augmentation";
}

SparseGraph cosine_knn(const FeatureSet& xstar, const KnnConfig& cfg, KnnDiagnostics* diagnostics) {
    const std::size_t n = xstar.rows();
    const std::size_t d = xstar.cols();
    if (n < 2) throw ConfigError(kModule, "kNN augmentation needs at least 2 nodes");
    if (cfg.k < 1 || cfg.k >= n) {
        throw ConfigError(kModule, "knn k=" + std::to_string(cfg.k) + " must lie in [1, " + std::to_string(n - 1) + "]");
    }

    // Unit rows; zero rows stay zero so their dot products are exactly 0.
    FeatureSet unit = xstar;
    std::vector<NodeId> zero_rows;
    for (std::size_t i = 0; i < n; ++i) {
        auto row = unit.row(i);
        const double norm = std::sqrt(kernels::dot(row.data(), row.data(), d));
        if (norm == 0.0) {
            zero_rows.push_back(static_cast<NodeId>(i));
            continue;
        }
        for (double& v : row) v /= norm;
    }

    const std::size_t k = cfg.k;
    std::vector<NodeId> picks(n * k);
    std::vector<double> row_min(n, std::numeric_limits<double>::infinity());
    std::vector<double> row_max(n, -std::numeric_limits<double>::infinity());
    parallel_for(0, n, 32, [&](std::size_t lo, std::size_t hi) {
        std::vector<double> sim(n);
        std::vector<NodeId> order(n - 1);
        for (std::size_t i = lo; i < hi; ++i) {
            const double* xi = unit.row(i).data();
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double s = std::clamp(kernels::dot(xi, unit.row(j).data(), d), -1.0, 1.0);
                sim[j] = s;
                row_min[i] = std::min(row_min[i], s);
                row_max[i] = std::max(row_max[i], s);
            }
            std::size_t pos = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) order[pos++] = static_cast<NodeId>(j);
            }
            std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                              [&](NodeId a, NodeId b) { return sim[a] != sim[b] ? sim[a] > sim[b] : a < b; });
            std::copy_n(order.begin(), k, picks.begin() + static_cast<std::ptrdiff_t>(i * k));
        }
    });

    std::vector<EdgePair> pairs;
    pairs.reserve(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < k; ++r) pairs.emplace_back(static_cast<NodeId>(i), picks[i * k + r]);
    }

    if (diagnostics != nullptr) {
        diagnostics->zero_norm_nodes = std::move(zero_rows);
        diagnostics->min_similarity = *std::min_element(row_min.begin(), row_min.end());
        diagnostics->max_similarity = *std::max_element(row_max.begin(), row_max.end());
    }
    return from_edge_list(n, pairs);
}

SparseGraph build_augmented(const SparseGraph& g_norm, const SparseGraph& knn) {
    if (g_norm.node_count() != knn.node_count()) {
        throw InputError(kModule, "kNN graph and base graph differ in node count");
    }
    SparseGraph knn_norm;
    try {
        knn_norm = sym_normalize(knn, false);
    } catch (const DegenerateInputError& e) {
        throw DegenerateInputError(kModule, std::string("kNN graph has an isolated node (construction bug): ") +
                                                e.what());
    }
    return merge_half(g_norm, knn_norm);
}

}  // namespace mqe
