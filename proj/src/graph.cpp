#include "mqe/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "mqe/error.hpp"

namespace mqe {
namespace {

constexpr const char* kModule = "graph-core";

// Builds CSR from a list of directed (row, col, weight) triplets that is
// already symmetric; duplicate coordinates are summed.
struct Triplet {
    NodeId row;
    NodeId col;
    double w;
};

SparseGraph assemble(std::size_t n, std::vector<Triplet> entries) {
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> weights;
    cols.reserve(entries.size());
    weights.reserve(entries.size());
    for (std::size_t k = 0; k < entries.size(); ++k) {
        const Triplet& t = entries[k];
        if (!cols.empty() && k > 0 && entries[k - 1].row == t.row && entries[k - 1].col == t.col) {
            weights.back() += t.w;
            continue;
        }
        cols.push_back(t.col);
        weights.push_back(t.w);
        ++offsets[t.row + 1];
    }
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    return SparseGraph::from_csr(n, std::move(offsets), std::move(cols), std::move(weights));
}

}  // namespace

SparseGraph SparseGraph::from_csr(std::size_t n, std::vector<std::size_t> offsets, std::vector<NodeId> cols,
                                  std::vector<double> weights) {
    if (offsets.size() != n + 1 || offsets.front() != 0 || offsets.back() != cols.size() ||
        cols.size() != weights.size()) {
        throw InputError(kModule, "inconsistent CSR array sizes");
    }
    SparseGraph g;
    g.n_ = n;
    g.offsets_ = std::move(offsets);
    g.cols_ = std::move(cols);
    g.weights_ = std::move(weights);
    g.check_invariants(false);
    return g;
}

std::size_t SparseGraph::edge_count() const noexcept {
    std::size_t m = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        for (NodeId j : neighbors(i)) {
            if (j >= i) ++m;
        }
    }
    return m;
}

double SparseGraph::weighted_degree(std::size_t i) const noexcept {
    double s = 0.0;
    for (double w : weights(i)) s += w;
    return s;
}

double SparseGraph::weight(std::size_t i, std::size_t j) const noexcept {
    const auto cols = neighbors(i);
    const auto it = std::lower_bound(cols.begin(), cols.end(), static_cast<NodeId>(j));
    if (it == cols.end() || *it != j) return 0.0;
    return weights_[offsets_[i] + static_cast<std::size_t>(it - cols.begin())];
}

bool SparseGraph::has_edge(std::size_t i, std::size_t j) const noexcept {
    const auto cols = neighbors(i);
    return std::binary_search(cols.begin(), cols.end(), static_cast<NodeId>(j));
}

void SparseGraph::check_invariants(bool require_positive, double symmetry_tol) const {
    for (std::size_t i = 0; i < n_; ++i) {
        if (offsets_[i] > offsets_[i + 1]) throw InputError(kModule, "CSR offsets decrease at row " + std::to_string(i));
        const auto cols = neighbors(i);
        const auto ws = weights(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (cols[k] >= n_) {
                throw InputError(kModule, "column index " + std::to_string(cols[k]) + " out of range in row " +
                                              std::to_string(i));
            }
            if (k > 0 && cols[k] <= cols[k - 1]) {
                throw InputError(kModule, "columns not strictly increasing in row " + std::to_string(i));
            }
            if (!std::isfinite(ws[k])) throw InputError(kModule, "non-finite weight in row " + std::to_string(i));
            if (require_positive && !(ws[k] > 0.0)) {
                throw InputError(kModule, "non-positive weight in row " + std::to_string(i));
            }
        }
    }
    for (std::size_t i = 0; i < n_; ++i) {
        const auto cols = neighbors(i);
        const auto ws = weights(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const std::size_t j = cols[k];
            if (!has_edge(j, i) || std::abs(weight(j, i) - ws[k]) > symmetry_tol) {
                throw InputError(kModule, "asymmetric entry (" + std::to_string(i) + "," + std::to_string(j) + ")");
            }
        }
    }
}

SparseGraph from_edge_list(std::size_t n, std::span<const EdgePair> pairs) {
    std::vector<Triplet> entries;
    entries.reserve(2 * pairs.size());
    for (const auto& [u, v] : pairs) {
        if (u >= n || v >= n) {
            throw InputError(kModule, "edge (" + std::to_string(u) + "," + std::to_string(v) +
                                          ") out of range for " + std::to_string(n) + " nodes");
        }
        if (u == v) continue;
        entries.push_back({u, v, 1.0});
        entries.push_back({v, u, 1.0});
    }
    std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    entries.erase(std::unique(entries.begin(), entries.end(),
                              [](const Triplet& a, const Triplet& b) { return a.row == b.row && a.col == b.col; }),
                  entries.end());
    return assemble(n, std::move(entries));
}

SparseGraph sym_normalize(const SparseGraph& g, bool add_self_loops) {
    const std::size_t n = g.node_count();
    std::vector<double> inv_sqrt_deg(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double deg = g.weighted_degree(i) + (add_self_loops ? 1.0 : 0.0);
        if (!(deg > 0.0)) {
            throw DegenerateInputError(kModule, "node " + std::to_string(i) +
                                                    " has zero degree; cannot normalize without self-loops");
        }
        inv_sqrt_deg[i] = 1.0 / std::sqrt(deg);
    }

    std::vector<Triplet> entries;
    entries.reserve(g.nnz() + (add_self_loops ? n : 0));
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = g.neighbors(i);
        const auto ws = g.weights(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            entries.push_back({static_cast<NodeId>(i), cols[k], ws[k]});
        }
        if (add_self_loops) entries.push_back({static_cast<NodeId>(i), static_cast<NodeId>(i), 1.0});
    }
    SparseGraph tilde = assemble(n, std::move(entries));

    std::vector<double> w = tilde.values();
    for (std::size_t i = 0; i < n; ++i) {
        const auto cols = tilde.neighbors(i);
        for (std::size_t k = 0; k < cols.size(); ++k) {
            const std::size_t idx = tilde.offsets()[i] + k;
            w[idx] = inv_sqrt_deg[i] * w[idx] * inv_sqrt_deg[cols[k]];
        }
    }
    return SparseGraph::from_csr(n, tilde.offsets(), tilde.columns(), std::move(w));
}

SparseGraph merge_half(const SparseGraph& g1, const SparseGraph& g2) {
    if (g1.node_count() != g2.node_count()) {
        throw InputError(kModule, "cannot merge graphs with " + std::to_string(g1.node_count()) + " and " +
                                      std::to_string(g2.node_count()) + " nodes");
    }
    const std::size_t n = g1.node_count();
    std::vector<std::size_t> offsets(n + 1, 0);
    std::vector<NodeId> cols;
    std::vector<double> weights;
    cols.reserve(g1.nnz() + g2.nnz());
    weights.reserve(g1.nnz() + g2.nnz());
    for (std::size_t i = 0; i < n; ++i) {
        const auto c1 = g1.neighbors(i);
        const auto w1 = g1.weights(i);
        const auto c2 = g2.neighbors(i);
        const auto w2 = g2.weights(i);
        std::size_t a = 0;
        std::size_t b = 0;
        while (a < c1.size() || b < c2.size()) {
            if (b == c2.size() || (a < c1.size() && c1[a] < c2[b])) {
                cols.push_back(c1[a]);
                weights.push_back(0.5 * w1[a]);
                ++a;
            } else if (a == c1.size() || c2[b] < c1[a]) {
                cols.push_back(c2[b]);
                weights.push_back(0.5 * w2[b]);
                ++b;
            } else {
                cols.push_back(c1[a]);
                weights.push_back(0.5 * (w1[a] + w2[b]));
                ++a;
                ++b;
            }
        }
        offsets[i + 1] = cols.size();
    }
    return SparseGraph::from_csr(n, std::move(offsets), std::move(cols), std::move(weights));
}

std::vector<EdgePair> read_edge_pairs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(kModule, "cannot open edge list " + path.string());
    std::vector<EdgePair> pairs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream fields(line);
        long long u = -1;
        long long v = -1;
        std::string extra;
        if (!(fields >> u >> v) || (fields >> extra) || u < 0 || v < 0 ||
            u > static_cast<long long>(UINT32_MAX) || v > static_cast<long long>(UINT32_MAX)) {
            throw InputError(kModule, path.string() + ":" + std::to_string(line_no) +
                                          ": expected two non-negative node ids");
        }
        pairs.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
    }
    return pairs;
}

void write_edge_list(const std::filesystem::path& path, const SparseGraph& g) {
    std::ofstream out(path);
    if (!out) throw InputError(kModule, "cannot write edge list " + path.string());
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        for (NodeId j : g.neighbors(i)) {
            if (j > i) out << i << ' ' << j << '\n';
        }
    }
}

}  // namespace mqe
