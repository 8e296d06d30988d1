#pragma once

// Inner-loop arithmetic shared by propagation, kNN construction, the estimator
// networks and the linear probe. Every kernel has a portable scalar reference
// implementation; on x86-64 an AVX2/FMA variant is selected at runtime when the
// CPU supports it. The variants are not bitwise identical (lane-wise partial
// sums and fused multiply-add change rounding), so reproducibility is defined
// per kernel set: the active set is recorded in every run manifest.

#include <cstddef>
#include <string_view>

namespace mqe::kernels {

enum class Isa {
    scalar,
    avx2,
};

struct KernelSet {
    Isa isa;
    const char* name;

    // sum_i x[i] * y[i]
    float (*dot_f32)(const float* x, const float* y, std::size_t n);
    double (*dot_f64)(const double* x, const double* y, std::size_t n);

    // y[i] += a * x[i]
    void (*axpy_f32)(float a, const float* x, float* y, std::size_t n);
    void (*axpy_f64)(double a, const double* x, double* y, std::size_t n);

    // sum_i (x[i] - y[i])^2, accumulated in double
    double (*sqdist_f32)(const float* x, const float* y, std::size_t n);
    double (*sqdist_f64)(const double* x, const double* y, std::size_t n);
};

// Portable reference kernels; always available.
const KernelSet& scalar_kernels() noexcept;

// AVX2/FMA kernels, or nullptr when not compiled in or not supported by the CPU.
const KernelSet* avx2_kernels() noexcept;

// The kernel set used by the library. Defaults to the best supported set; the
// MQE_KERNELS environment variable ("scalar", "avx2", "auto") overrides that on
// first use.
const KernelSet& active() noexcept;

// Forces a kernel set. Returns false (and leaves the selection unchanged) when
// the requested ISA is unavailable.
bool select(Isa isa) noexcept;
void select_auto() noexcept;

bool parse_isa(std::string_view text, Isa& out) noexcept;
const char* isa_name(Isa isa) noexcept;

// Typed front-ends over the active set.
inline float dot(const float* x, const float* y, std::size_t n) { return active().dot_f32(x, y, n); }
inline double dot(const double* x, const double* y, std::size_t n) { return active().dot_f64(x, y, n); }
inline void axpy(float a, const float* x, float* y, std::size_t n) { active().axpy_f32(a, x, y, n); }
inline void axpy(double a, const double* x, double* y, std::size_t n) { active().axpy_f64(a, x, y, n); }
inline double sqdist(const float* x, const float* y, std::size_t n) { return active().sqdist_f32(x, y, n); }
inline double sqdist(const double* x, const double* y, std::size_t n) { return active().sqdist_f64(x, y, n); }

}  // namespace mqe::kernels
