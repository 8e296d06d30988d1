#pragma once

#include <cstddef>

#include "mqe/kernels.hpp"

namespace mqe::kernels::detail {

float dot_f32_scalar(const float* x, const float* y, std::size_t n);
double dot_f64_scalar(const double* x, const double* y, std::size_t n);
void axpy_f32_scalar(float a, const float* x, float* y, std::size_t n);
void axpy_f64_scalar(double a, const double* x, double* y, std::size_t n);
double sqdist_f32_scalar(const float* x, const float* y, std::size_t n);
double sqdist_f64_scalar(const double* x, const double* y, std::size_t n);

#if defined(MQE_HAVE_AVX2)
float dot_f32_avx2(const float* x, const float* y, std::size_t n);
double dot_f64_avx2(const double* x, const double* y, std::size_t n);
void axpy_f32_avx2(float a, const float* x, float* y, std::size_t n);
void axpy_f64_avx2(double a, const double* x, double* y, std::size_t n);
double sqdist_f32_avx2(const float* x, const float* y, std::size_t n);
double sqdist_f64_avx2(const double* x, const double* y, std::size_t n);
#endif

}  // namespace mqe::kernels::detail
