#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

namespace mqe {

using NodeId = std::uint32_t;
using EdgePair = std::pair<NodeId, NodeId>;

// Weighted undirected graph in CSR form. Both (i,j) and (j,i) are stored;
// column indices are strictly increasing within each row. Immutable once built.
class SparseGraph {
public:
    SparseGraph() = default;

    // Validates the CSR arrays (sorted unique columns, indices in range, finite
    // weights, symmetry) and throws InputError on violation.
    static SparseGraph from_csr(std::size_t n, std::vector<std::size_t> offsets, std::vector<NodeId> cols,
                                std::vector<double> weights);

    std::size_t node_count() const noexcept { return n_; }
    std::size_t nnz() const noexcept { return cols_.size(); }

    // Undirected edges, a self-loop counting once.
    std::size_t edge_count() const noexcept;

    std::size_t degree(std::size_t i) const noexcept { return offsets_[i + 1] - offsets_[i]; }
    double weighted_degree(std::size_t i) const noexcept;

    std::span<const NodeId> neighbors(std::size_t i) const noexcept {
        return {cols_.data() + offsets_[i], degree(i)};
    }
    std::span<const double> weights(std::size_t i) const noexcept {
        return {weights_.data() + offsets_[i], degree(i)};
    }

    // 0 when (i,j) is not stored.
    double weight(std::size_t i, std::size_t j) const noexcept;
    bool has_edge(std::size_t i, std::size_t j) const noexcept;

    const std::vector<std::size_t>& offsets() const noexcept { return offsets_; }
    const std::vector<NodeId>& columns() const noexcept { return cols_; }
    const std::vector<double>& values() const noexcept { return weights_; }

    // Throws InputError if any structural invariant fails. With
    // `require_positive`, every stored weight must also be > 0.
    void check_invariants(bool require_positive = false, double symmetry_tol = 1e-12) const;

    bool operator==(const SparseGraph&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> cols_;
    std::vector<double> weights_;
};

// Binary undirected adjacency. Duplicate pairs (in either orientation) collapse
// to one edge; self-loops in the input are dropped.
SparseGraph from_edge_list(std::size_t n, std::span<const EdgePair> pairs);

// D^{-1/2} (A + I[add_self_loops]) D^{-1/2}, D the row sums of the (possibly
// self-loop augmented) matrix. Without self-loops every node needs degree >= 1.
SparseGraph sym_normalize(const SparseGraph& g, bool add_self_loops);

// Entrywise (g1 + g2) / 2 over the union pattern.
SparseGraph merge_half(const SparseGraph& g1, const SparseGraph& g2);

// Edge-list text: one "u v" pair per line, '#' lines ignored.
std::vector<EdgePair> read_edge_pairs(const std::filesystem::path& path);
void write_edge_list(const std::filesystem::path& path, const SparseGraph& g);

}  // namespace mqe
