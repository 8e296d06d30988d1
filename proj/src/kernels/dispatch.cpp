#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernel_table.hpp"

namespace mqe::kernels {
namespace {

const KernelSet kScalar{
    Isa::scalar,         "scalar",
    detail::dot_f32_scalar,    detail::dot_f64_scalar,
    detail::axpy_f32_scalar,   detail::axpy_f64_scalar,
    detail::sqdist_f32_scalar, detail::sqdist_f64_scalar,
};

#if defined(MQE_HAVE_AVX2)
const KernelSet kAvx2{
    Isa::avx2,         "avx2",
    detail::dot_f32_avx2,    detail::dot_f64_avx2,
    detail::axpy_f32_avx2,   detail::axpy_f64_avx2,
    detail::sqdist_f32_avx2, detail::sqdist_f64_avx2,
};

bool cpu_has_avx2() noexcept {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelSet* best_available() noexcept {
    if (const KernelSet* k = avx2_kernels()) return k;
    return &kScalar;
}

const KernelSet* initial_selection() noexcept {
    const char* env = std::getenv("MQE_KERNELS");
    if (env != nullptr) {
        Isa isa{};
        if (parse_isa(env, isa)) {
            if (isa == Isa::scalar) return &kScalar;
            if (const KernelSet* k = avx2_kernels()) return k;
        }
    }
    return best_available();
}

std::atomic<const KernelSet*>& current() noexcept {
    static std::atomic<const KernelSet*> selected{initial_selection()};
    return selected;
}

}  // namespace

const KernelSet& scalar_kernels() noexcept { return kScalar; }

const KernelSet* avx2_kernels() noexcept {
#if defined(MQE_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelSet& active() noexcept { return *current().load(std::memory_order_acquire); }

bool select(Isa isa) noexcept {
    const KernelSet* k = isa == Isa::scalar ? &kScalar : avx2_kernels();
    if (k == nullptr) return false;
    current().store(k, std::memory_order_release);
    return true;
}

void select_auto() noexcept { current().store(best_available(), std::memory_order_release); }

bool parse_isa(std::string_view text, Isa& out) noexcept {
    if (text == "scalar") {
        out = Isa::scalar;
        return true;
    }
    if (text == "avx2") {
        out = Isa::avx2;
        return true;
    }
    return false;
}

const char* isa_name(Isa isa) noexcept { return isa == Isa::scalar ? "scalar" : "avx2"; }

}  // namespace mqe::kernels
