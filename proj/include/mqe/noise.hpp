#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mqe/features.hpp"

namespace mqe {

enum class NoiseKind { normal, uniform };

struct NoiseSpec {
    NoiseKind kind = NoiseKind::normal;
    double alpha = 0.5;  // fraction of perturbed nodes, (0, 1]
    double beta = 1.0;   // noise level, >= 0
    std::uint64_t seed = 0;
    // Support of the uniform kind. The default [0, 1) is deliberately
    // non-zero-mean: it shifts features rather than adding symmetric jitter.
    double uniform_low = 0.0;
    double uniform_high = 1.0;

    void validate() const;
};

struct NoiseGroundTruth {
    std::vector<std::uint8_t> perturbed;  // 1 for perturbed nodes
    std::vector<double> intensity;        // s_i, exactly 0 off the mask
    FeatureSet clean_features;
};

struct NoisyFeatures {
    FeatureSet noisy;
    NoiseGroundTruth truth;
};

// Perturbs exactly round(alpha * n) nodes chosen without replacement:
// x_i <- x_i + beta * psi_i with psi_i i.i.d. standard normal or uniform.
NoisyFeatures inject(const FeatureSet& clean, const NoiseSpec& spec);

// Per-node RMS deviation sqrt(mean_j (x_ij - clean_ij)^2).
std::vector<double> intensity(const FeatureSet& clean, const FeatureSet& noisy);

bool parse_noise_kind(std::string_view text, NoiseKind& out) noexcept;
const char* noise_kind_name(NoiseKind kind) noexcept;

}  // namespace mqe
