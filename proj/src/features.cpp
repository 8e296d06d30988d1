#include "mqe/features.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "mqe/error.hpp"

namespace mqe {
namespace {

constexpr const char* kModule = "data";

std::string where(const std::filesystem::path& path, std::size_t line_no) {
    return path.string() + ":" + std::to_string(line_no) + ": ";
}

bool is_blank(const std::string& line) { return line.find_first_not_of(" \t\r") == std::string::npos; }

bool parse_double(std::string_view tok, double& out) {
    const char* begin = tok.data();
    const char* end = tok.data() + tok.size();
    if (begin != end && *begin == '+') ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc{} && ptr == end;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError(kModule, "cannot write " + path.string());
    out.precision(17);
    return out;
}

}  // namespace

void check_finite(const FeatureSet& x, const char* module, const char* what) {
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (!std::isfinite(x(i, j))) {
                throw InputError(module, std::string(what) + ": non-finite entry at (" + std::to_string(i) + "," +
                                             std::to_string(j) + ")");
            }
        }
    }
}

FeatureSet read_features(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(kModule, "cannot open feature file " + path.string());

    std::vector<double> values;
    std::size_t cols = 0;
    std::size_t rows = 0;
    long long header_n = -1;
    long long header_d = -1;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        if (line[line.find_first_not_of(" \t")] == '#') {
            if (rows == 0 && header_n < 0) {
                std::istringstream hs(line.substr(line.find('#') + 1));
                long long hn = -1;
                long long hd = -1;
                if (hs >> hn >> hd && hn >= 0 && hd >= 0) {
                    header_n = hn;
                    header_d = hd;
                }
            }
            continue;
        }
        std::istringstream fields(line);
        std::string tok;
        std::size_t count = 0;
        while (fields >> tok) {
            double v = 0.0;
            if (!parse_double(tok, v)) throw InputError(kModule, where(path, line_no) + "malformed number '" + tok + "'");
            if (!std::isfinite(v)) throw InputError(kModule, where(path, line_no) + "non-finite feature value");
            values.push_back(v);
            ++count;
        }
        if (rows == 0) {
            cols = count;
        } else if (count != cols) {
            throw InputError(kModule, where(path, line_no) + "expected " + std::to_string(cols) + " fields, found " +
                                          std::to_string(count));
        }
        if (header_d >= 0 && count != static_cast<std::size_t>(header_d)) {
            throw InputError(kModule, where(path, line_no) + "expected " + std::to_string(header_d) +
                                          " fields (header), found " + std::to_string(count));
        }
        ++rows;
    }
    if (header_n >= 0 && rows != static_cast<std::size_t>(header_n)) {
        throw InputError(kModule, path.string() + ": header declares " + std::to_string(header_n) + " rows, found " +
                                      std::to_string(rows));
    }
    FeatureSet x(rows, cols);
    std::copy(values.begin(), values.end(), x.data());
    return x;
}

void write_features(const std::filesystem::path& path, const FeatureSet& x) {
    auto out = open_out(path);
    out << '#' << x.rows() << ' ' << x.cols() << '\n';
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (j > 0) out << ' ';
            out << x(i, j);
        }
        out << '\n';
    }
}

std::vector<double> read_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(kModule, "cannot open " + path.string());
    std::vector<double> v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line) || line[line.find_first_not_of(" \t")] == '#') continue;
        std::istringstream fields(line);
        std::string tok;
        std::string extra;
        double value = 0.0;
        if (!(fields >> tok) || (fields >> extra) || !parse_double(tok, value)) {
            throw InputError(kModule, where(path, line_no) + "expected one number");
        }
        v.push_back(value);
    }
    return v;
}

void write_vector(const std::filesystem::path& path, std::span<const double> v) {
    auto out = open_out(path);
    for (double x : v) out << x << '\n';
}

std::vector<std::int64_t> read_int_vector(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError(kModule, "cannot open " + path.string());
    std::vector<std::int64_t> v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line) || line[line.find_first_not_of(" \t")] == '#') continue;
        std::istringstream fields(line);
        std::string tok;
        std::string extra;
        if (!(fields >> tok) || (fields >> extra)) throw InputError(kModule, where(path, line_no) + "expected one integer");
        std::int64_t value = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
            throw InputError(kModule, where(path, line_no) + "malformed integer '" + tok + "'");
        }
        v.push_back(value);
    }
    return v;
}

void write_int_vector(const std::filesystem::path& path, std::span<const std::int64_t> v) {
    auto out = open_out(path);
    for (auto x : v) out << x << '\n';
}

void write_u64_le(std::ostream& out, std::uint64_t v) {
    unsigned char buf[8];
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<unsigned char>(v >> (8 * b));
    out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64_le(std::istream& in) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), 8)) throw InputError(kModule, "truncated binary header");
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(buf[b]) << (8 * b);
    return v;
}

void write_f32_le(std::ostream& out, float v) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    unsigned char buf[4];
    for (int b = 0; b < 4; ++b) buf[b] = static_cast<unsigned char>(bits >> (8 * b));
    out.write(reinterpret_cast<const char*>(buf), 4);
}

float read_f32_le(std::istream& in) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4)) throw InputError(kModule, "truncated binary payload");
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(buf[b]) << (8 * b);
    return std::bit_cast<float>(bits);
}

}  // namespace mqe
