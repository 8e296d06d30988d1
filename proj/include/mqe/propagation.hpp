#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "mqe/features.hpp"
#include "mqe/graph.hpp"

namespace mqe {

// Layers 0..L of repeated propagation; layer 0 is the input verbatim.
class PropagatedStack {
public:
    PropagatedStack() = default;
    explicit PropagatedStack(std::vector<FeatureSet> layers);

    std::size_t hops() const noexcept { return layers_.empty() ? 0 : layers_.size() - 1; }
    std::size_t layer_count() const noexcept { return layers_.size(); }
    std::size_t node_count() const noexcept { return layers_.empty() ? 0 : layers_.front().rows(); }
    std::size_t dim() const noexcept { return layers_.empty() ? 0 : layers_.front().cols(); }
    bool empty() const noexcept { return layers_.empty(); }

    const FeatureSet& layer(std::size_t l) const { return layers_.at(l); }
    const std::vector<FeatureSet>& layers() const noexcept { return layers_; }

private:
    std::vector<FeatureSet> layers_;
};

// out = g * x. Each output row accumulates its neighbors left to right by
// column index, so results are independent of the thread count.
FeatureSet spmm(const SparseGraph& g, const FeatureSet& x);

// Layer l = g^l x for l = 0..hops.
PropagatedStack propagate_stack(const SparseGraph& g, const FeatureSet& x, std::size_t hops);

// Elementwise sum over all layers.
FeatureSet summed_features(const PropagatedStack& stack);

// Binary export: u64 (L+1), u64 n, u64 d, then float32 values layer-major,
// row-major, all little-endian.
void write_stack(const std::filesystem::path& path, const PropagatedStack& stack);
PropagatedStack read_stack(const std::filesystem::path& path);

}  // namespace mqe
