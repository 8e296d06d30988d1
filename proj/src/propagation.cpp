#include "mqe/propagation.hpp"

#include <fstream>
#include <string>

#include "mqe/error.hpp"
#include "mqe/kernels.hpp"
#include "mqe/parallel.hpp"

namespace mqe {
namespace {
constexpr const char* kModule = "propagation";
}

PropagatedStack::PropagatedStack(std::vector<FeatureSet> layers) : layers_(std::move(layers)) {
    for (const auto& layer : layers_) {
        if (layer.rows() != layers_.front().rows() || layer.cols() != layers_.front().cols()) {
            throw InputError(kModule, "stack layers have inconsistent shapes");
        }
    }
}

FeatureSet spmm(const SparseGraph& g, const FeatureSet& x) {
    if (g.node_count() != x.rows()) {
        throw InputError(kModule, "graph has " + std::to_string(g.node_count()) + " nodes but features have " +
                                      std::to_string(x.rows()) + " rows");
    }
    FeatureSet out(x.rows(), x.cols());
    const std::size_t d = x.cols();
    parallel_for(0, g.node_count(), 64, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            double* dst = out.row(i).data();
            const auto cols = g.neighbors(i);
            const auto ws = g.weights(i);
            for (std::size_t k = 0; k < cols.size(); ++k) kernels::axpy(ws[k], x.row(cols[k]).data(), dst, d);
        }
    });
    return out;
}

PropagatedStack propagate_stack(const SparseGraph& g, const FeatureSet& x, std::size_t hops) {
    if (g.node_count() != x.rows()) {
        throw InputError(kModule, "graph has " + std::to_string(g.node_count()) + " nodes but features have " +
                                      std::to_string(x.rows()) + " rows");
    }
    std::vector<FeatureSet> layers;
    layers.reserve(hops + 1);
    layers.push_back(x);
    for (std::size_t l = 1; l <= hops; ++l) layers.push_back(spmm(g, layers.back()));
    return PropagatedStack(std::move(layers));
}

FeatureSet summed_features(const PropagatedStack& stack) {
    if (stack.empty()) throw InputError(kModule, "cannot sum an empty stack");
    FeatureSet sum = stack.layer(0);
    for (std::size_t l = 1; l < stack.layer_count(); ++l) {
        const auto src = stack.layer(l).flat();
        auto dst = sum.flat();
        for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
    }
    return sum;
}

void write_stack(const std::filesystem::path& path, const PropagatedStack& stack) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError(kModule, "cannot write " + path.string());
    write_u64_le(out, stack.layer_count());
    write_u64_le(out, stack.node_count());
    write_u64_le(out, stack.dim());
    for (const auto& layer : stack.layers()) {
        for (double v : layer.flat()) write_f32_le(out, static_cast<float>(v));
    }
}

PropagatedStack read_stack(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(kModule, "cannot open " + path.string());
    const auto layers = read_u64_le(in);
    const auto n = read_u64_le(in);
    const auto d = read_u64_le(in);
    std::vector<FeatureSet> out;
    out.reserve(layers);
    for (std::uint64_t l = 0; l < layers; ++l) {
        FeatureSet layer(n, d);
        for (auto& v : layer.flat()) v = read_f32_le(in);
        out.push_back(std::move(layer));
    }
    return PropagatedStack(std::move(out));
}

}  // namespace mqe
