#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "mqe/error.hpp"
#include "mqe/noise.hpp"
#include "oracles.hpp"

using namespace mqe;

TEST(Noise, ZeroBetaLeavesFeatures) {
    std::mt19937_64 rng(1);
    const auto x = oracle::random_matrix(20, 8, rng);
    NoiseSpec spec;
    spec.beta = 0.0;
    spec.alpha = 1.0;
    const auto out = inject(x, spec);
    EXPECT_EQ(out.noisy, x);
    for (double s : out.truth.intensity) EXPECT_EQ(s, 0.0);
}

TEST(Noise, ExactPerturbedCount) {
    const FeatureSet x(10, 4);
    NoiseSpec spec;
    spec.alpha = 0.5;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        spec.seed = seed;
        const auto out = inject(x, spec);
        EXPECT_EQ(std::accumulate(out.truth.perturbed.begin(), out.truth.perturbed.end(), 0), 5);
    }
    spec.alpha = 0.33;
    const auto out = inject(FeatureSet(7, 2), spec);
    EXPECT_EQ(std::accumulate(out.truth.perturbed.begin(), out.truth.perturbed.end(), 0), 2);
}

TEST(Noise, NormalMeanIntensityNearBeta) {
    const FeatureSet x(2000, 64);
    NoiseSpec spec;
    spec.alpha = 1.0;
    spec.beta = 0.7;
    spec.seed = 42;
    const auto out = inject(x, spec);
    const double mean =
        std::accumulate(out.truth.intensity.begin(), out.truth.intensity.end(), 0.0) / 2000.0;
    EXPECT_NEAR(mean, 0.7, 0.05 * 0.7);
}

TEST(Noise, MaskMatchesPositiveIntensity) {
    std::mt19937_64 rng(2);
    const auto x = oracle::random_matrix(50, 16, rng);
    for (NoiseKind kind : {NoiseKind::normal, NoiseKind::uniform}) {
        NoiseSpec spec;
        spec.kind = kind;
        spec.alpha = 0.4;
        spec.beta = 0.1;
        spec.seed = 3;
        const auto out = inject(x, spec);
        for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(out.truth.intensity[i] > 0.0, out.truth.perturbed[i] == 1);
        EXPECT_EQ(out.truth.clean_features, x);
    }
}

TEST(Noise, UniformIsNonNegativeShift) {
    const FeatureSet x(30, 10);
    NoiseSpec spec;
    spec.kind = NoiseKind::uniform;
    spec.alpha = 1.0;
    spec.beta = 2.0;
    const auto out = inject(x, spec);
    for (double v : out.noisy.flat()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 2.0);
    }
}

TEST(Noise, DeterministicAndSeedSensitive) {
    std::mt19937_64 rng(4);
    const auto x = oracle::random_matrix(40, 6, rng);
    NoiseSpec spec;
    spec.seed = 9;
    EXPECT_EQ(inject(x, spec).noisy, inject(x, spec).noisy);
    NoiseSpec other = spec;
    other.seed = 10;
    EXPECT_NE(inject(x, spec).noisy, inject(x, other).noisy);
}

TEST(Noise, InvalidSpec) {
    NoiseSpec spec;
    spec.alpha = 0.0;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.alpha = 1.5;
    EXPECT_THROW(spec.validate(), ConfigError);
    spec.alpha = 0.5;
    spec.beta = -1.0;
    EXPECT_THROW(spec.validate(), ConfigError);
}

TEST(Intensity, HandExample) {
    FeatureSet clean(1, 4), noisy(1, 4);
    clean.fill(1.0);
    noisy.fill(1.0);
    noisy(0, 0) = 2.0;
    EXPECT_DOUBLE_EQ(intensity(clean, noisy)[0], 0.5);
    EXPECT_EQ(intensity(clean, clean)[0], 0.0);
}

TEST(Intensity, MatchesNaiveLoop) {
    std::mt19937_64 rng(5);
    const auto a = oracle::random_matrix(30, 7, rng);
    const auto b = oracle::random_matrix(30, 7, rng);
    const auto s = intensity(a, b);
    for (std::size_t i = 0; i < 30; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < 7; ++j) acc += (b(i, j) - a(i, j)) * (b(i, j) - a(i, j));
        EXPECT_NEAR(s[i], std::sqrt(acc / 7.0), 1e-12);
    }
}

TEST(Intensity, ShapeMismatch) {
    EXPECT_THROW(intensity(FeatureSet(2, 3), FeatureSet(3, 3)), InputError);
}
