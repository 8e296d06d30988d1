#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mqe/matrix.hpp"

namespace mqe {

// n x d node feature matrix (observed X, clean X~, propagated layers).
using FeatureSet = Matrix<double>;

// Throws InputError naming the first non-finite entry.
void check_finite(const FeatureSet& x, const char* module, const char* what);

// Text format: one node per line, d whitespace-separated reals, optional
// leading "#n d" header which is validated when present. Errors cite the line.
FeatureSet read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureSet& x);

// One value per line.
std::vector<double> read_vector(const std::filesystem::path& path);
void write_vector(const std::filesystem::path& path, std::span<const double> v);
std::vector<std::int64_t> read_int_vector(const std::filesystem::path& path);
void write_int_vector(const std::filesystem::path& path, std::span<const std::int64_t> v);

// Little-endian binary helpers shared by the embedding and stack exports.
void write_u64_le(std::ostream& out, std::uint64_t v);
std::uint64_t read_u64_le(std::istream& in);
void write_f32_le(std::ostream& out, float v);
float read_f32_le(std::istream& in);

}  // namespace mqe
