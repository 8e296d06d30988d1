#include "kernel_table.hpp"

namespace mqe::kernels::detail {

float dot_f32_scalar(const float* x, const float* y, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double dot_f64_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_f32_scalar(float a, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void axpy_f64_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sqdist_f32_scalar(const float* x, const float* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        acc += diff * diff;
    }
    return acc;
}

double sqdist_f64_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double diff = x[i] - y[i];
        acc += diff * diff;
    }
    return acc;
}

}  // namespace mqe::kernels::detail
