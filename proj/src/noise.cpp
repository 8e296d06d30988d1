#include "mqe/noise.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mqe/error.hpp"
#include "mqe/kernels.hpp"
#include "mqe/rng.hpp"

namespace mqe {
namespace {
constexpr const char* kModule = "noise";
}

void NoiseSpec::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ConfigError(kModule, "noise alpha must lie in (0, 1]");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError(kModule, "noise beta must be a finite value >= 0");
    if (kind == NoiseKind::uniform && !(uniform_low < uniform_high)) {
        throw ConfigError(kModule, "uniform noise range must satisfy low < high");
    }
}

NoisyFeatures inject(const FeatureSet& clean, const NoiseSpec& spec) {
    spec.validate();
    const std::size_t n = clean.rows();
    const std::size_t d = clean.cols();
    const auto count = static_cast<std::size_t>(std::llround(spec.alpha * static_cast<double>(n)));

    // Seeded Fisher-Yates prefix: the first `count` slots are the selection.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng select_rng = make_rng(derive_seed(spec.seed, "select"));
    for (std::size_t i = 0; i < count && i + 1 < n; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(order[i], order[pick(select_rng)]);
    }

    NoisyFeatures out{clean, {std::vector<std::uint8_t>(n, 0), {}, clean}};
    const std::uint64_t value_root = derive_seed(spec.seed, "values");
    for (std::size_t s = 0; s < count; ++s) {
        const std::size_t i = order[s];
        out.truth.perturbed[i] = 1;
        Rng rng = make_rng(derive_seed(value_root, static_cast<std::uint64_t>(i)));
        auto row = out.noisy.row(i);
        if (spec.kind == NoiseKind::normal) {
            std::normal_distribution<double> psi(0.0, 1.0);
            for (std::size_t j = 0; j < d; ++j) row[j] += spec.beta * psi(rng);
        } else {
            std::uniform_real_distribution<double> psi(spec.uniform_low, spec.uniform_high);
            for (std::size_t j = 0; j < d; ++j) row[j] += spec.beta * psi(rng);
        }
    }
    out.truth.intensity = intensity(clean, out.noisy);
    return out;
}

std::vector<double> intensity(const FeatureSet& clean, const FeatureSet& noisy) {
    if (clean.rows() != noisy.rows() || clean.cols() != noisy.cols()) {
        throw InputError(kModule, "clean and noisy feature shapes differ");
    }
    const std::size_t d = clean.cols();
    std::vector<double> s(clean.rows(), 0.0);
    if (d == 0) return s;
    for (std::size_t i = 0; i < clean.rows(); ++i) {
        s[i] = std::sqrt(kernels::sqdist(clean.row(i).data(), noisy.row(i).data(), d) / static_cast<double>(d));
    }
    return s;
}

bool parse_noise_kind(std::string_view text, NoiseKind& out) noexcept {
    if (text == "normal") {
        out = NoiseKind::normal;
        return true;
    }
    if (text == "uniform") {
        out = NoiseKind::uniform;
        return true;
    }
    return false;
}

const char* noise_kind_name(NoiseKind kind) noexcept { return kind == NoiseKind::normal ? "normal" : "uniform"; }

}  // namespace mqe
