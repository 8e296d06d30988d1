#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mqe/error.hpp"
#include "mqe/graph.hpp"
#include "oracles.hpp"

using namespace mqe;

TEST(Graph, SymmetricPairDedups) {
    const std::vector<EdgePair> pairs{{0, 1}, {1, 0}};
    const auto g = from_edge_list(2, pairs);
    EXPECT_EQ(g.edge_count(), 1u);
    EXPECT_TRUE(g.has_edge(0, 1));
    EXPECT_TRUE(g.has_edge(1, 0));
}

TEST(Graph, EmptyEdgeList) {
    const auto g = from_edge_list(3, {});
    EXPECT_EQ(g.node_count(), 3u);
    EXPECT_EQ(g.edge_count(), 0u);
}

TEST(Graph, PathDegrees) {
    const std::vector<EdgePair> pairs{{0, 1}, {1, 2}, {2, 3}};
    const auto g = from_edge_list(4, pairs);
    EXPECT_EQ(g.degree(0), 1u);
    EXPECT_EQ(g.degree(1), 2u);
    EXPECT_EQ(g.degree(2), 2u);
    EXPECT_EQ(g.degree(3), 1u);
    g.check_invariants(true);
}

TEST(Graph, SelfLoopsDroppedAndOutOfRangeRejected) {
    const std::vector<EdgePair> loops{{1, 1}, {0, 1}};
    EXPECT_EQ(from_edge_list(2, loops).nnz(), 2u);
    const std::vector<EdgePair> bad{{0, 5}};
    EXPECT_THROW(from_edge_list(3, bad), InputError);
}

TEST(Graph, FromCsrRejectsAsymmetry) {
    EXPECT_THROW(SparseGraph::from_csr(2, {0, 1, 1}, {1}, {1.0}), InputError);
    EXPECT_THROW(SparseGraph::from_csr(2, {0, 1, 2}, {1, 0}, {1.0, 2.0}), InputError);
    EXPECT_NO_THROW(SparseGraph::from_csr(2, {0, 1, 2}, {1, 0}, {0.5, 0.5}));
}

TEST(Normalize, SingleEdgeAllHalf) {
    const std::vector<EdgePair> pairs{{0, 1}};
    const auto a = sym_normalize(from_edge_list(2, pairs), true);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(a.weight(i, j), 0.5);
}

TEST(Normalize, IsolatedNodeSelfWeightOne) {
    const std::vector<EdgePair> pairs{{0, 1}};
    const auto a = sym_normalize(from_edge_list(3, pairs), true);
    EXPECT_EQ(a.degree(2), 1u);
    EXPECT_DOUBLE_EQ(a.weight(2, 2), 1.0);
}

TEST(Normalize, PathEntry) {
    const std::vector<EdgePair> pairs{{0, 1}, {1, 2}};
    const auto a = sym_normalize(from_edge_list(3, pairs), true);
    EXPECT_NEAR(a.weight(0, 1), 0.40824829046386307, 1e-15);
    EXPECT_NEAR(a.weight(0, 1), 1.0 / std::sqrt(6.0), 1e-15);
}

TEST(Normalize, ZeroDegreeWithoutSelfLoopsNamesNode) {
    const std::vector<EdgePair> pairs{{0, 1}};
    try {
        sym_normalize(from_edge_list(3, pairs), false);
        FAIL() << "expected DegenerateInputError";
    } catch (const DegenerateInputError& e) {
        EXPECT_NE(std::string(e.what()).find('2'), std::string::npos) << e.what();
    }
}

TEST(Normalize, MatchesDenseOracleAndSpectralBounds) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 2 + trial % 9;
        const auto pairs = oracle::random_edges(n, 0.4, rng);
        const auto g = from_edge_list(n, pairs);
        const auto a = sym_normalize(g, true);
        a.check_invariants(true);
        const auto want = oracle::normalized_with_self_loops(oracle::dense(g));
        const auto got = oracle::dense(a);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(got[i][j], want[i][j], 1e-14);

        // D~^{1/2} 1 is an eigenvector with eigenvalue 1.
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::sqrt(static_cast<double>(g.degree(i) + 1));
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += got[i][j] * v[j];
            EXPECT_NEAR(s, v[i], 1e-10);
        }

        // Power iteration never grows beyond the unit spectral radius.
        std::normal_distribution<double> nd;
        std::vector<double> x(n);
        for (auto& e : x) e = nd(rng);
        double norm = 0.0;
        for (double e : x) norm += e * e;
        norm = std::sqrt(norm);
        for (auto& e : x) e /= norm;
        for (int it = 0; it < 200; ++it) {
            std::vector<double> y(n, 0.0);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) y[i] += got[i][j] * x[j];
            double ny = 0.0;
            for (double e : y) ny += e * e;
            ny = std::sqrt(ny);
            EXPECT_LE(ny, 1.0 + 1e-10);
            if (ny == 0.0) break;
            for (std::size_t i = 0; i < n; ++i) x[i] = y[i] / ny;
        }
    }
}

TEST(Merge, EqualInputsIdempotent) {
    const std::vector<EdgePair> pairs{{0, 1}, {1, 2}};
    const auto a = sym_normalize(from_edge_list(3, pairs), true);
    const auto m = merge_half(a, a);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(m.weight(i, j), a.weight(i, j));
}

TEST(Merge, AverageWithMissingEntry) {
    const std::vector<EdgePair> one{{0, 1}};
    const auto a = sym_normalize(from_edge_list(2, one), true);
    const auto empty = from_edge_list(2, {});
    const auto m = merge_half(a, empty);
    EXPECT_DOUBLE_EQ(m.weight(0, 1), 0.25);
}

TEST(Merge, DisjointPatternsUnionHalved) {
    const std::vector<EdgePair> p1{{0, 1}};
    const std::vector<EdgePair> p2{{1, 2}};
    const auto g1 = from_edge_list(3, p1);
    const auto g2 = from_edge_list(3, p2);
    const auto m = merge_half(g1, g2);
    EXPECT_EQ(m.nnz(), 4u);
    EXPECT_DOUBLE_EQ(m.weight(0, 1), 0.5);
    EXPECT_DOUBLE_EQ(m.weight(1, 0), 0.5);
    EXPECT_DOUBLE_EQ(m.weight(1, 2), 0.5);
    EXPECT_DOUBLE_EQ(m.weight(2, 1), 0.5);
    EXPECT_DOUBLE_EQ(m.weight(0, 2), 0.0);
}

TEST(Merge, MismatchedSizes) {
    EXPECT_THROW(merge_half(from_edge_list(2, {}), from_edge_list(3, {})), InputError);
}

TEST(EdgeFile, RoundTripAndErrorsCiteLine) {
    const auto dir = std::filesystem::temp_directory_path() / "mqe_test_graph";
    std::filesystem::create_directories(dir);
    const std::vector<EdgePair> pairs{{0, 1}, {2, 3}, {1, 3}};
    const auto g = from_edge_list(4, pairs);
    write_edge_list(dir / "e.txt", g);
    const auto back = from_edge_list(4, read_edge_pairs(dir / "e.txt"));
    EXPECT_EQ(back, g);

    {
        std::ofstream out(dir / "bad.txt");
        out << "# header\n0 1\n2 x\n";
    }
    try {
        read_edge_pairs(dir / "bad.txt");
        FAIL() << "expected InputError";
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
    }
    std::filesystem::remove_all(dir);
}
