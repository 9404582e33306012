#pragma once

#include "rangefuse/image.hpp"

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rangefuse {

/// The prediction range [0, 255] cut into T = ceil(256 / b) bins
/// [0, b), [b, 2b), ..., [(T-1) b, 255]. The last bin is closed and absorbs
/// the remainder when b does not divide 256.
class BinSpace {
public:
    explicit BinSpace(int bin_width);

    int bin_width() const { return bin_width_; }
    int num_bins() const { return num_bins_; }

    friend bool operator==(const BinSpace&, const BinSpace&) = default;

private:
    int bin_width_;
    int num_bins_;
};

/// min(floor(value / b), T - 1). Throws ContractError outside [0, 255].
int bin_index(double value, const BinSpace& space);

/// Clamp to [0, 255]; NaN is rejected with ContractError.
double clamp_to_range(double value);

/// One bin index per model; ordered lexicographically.
struct BinSetKey {
    std::vector<int> indices;

    std::size_t arity() const { return indices.size(); }
    friend auto operator<=>(const BinSetKey&, const BinSetKey&) = default;
    friend bool operator==(const BinSetKey&, const BinSetKey&) = default;
};

/// Pixels of a reference batch that share one bin-set key.
/// pixel_indices ascend; gt_values[k] and pred_values[m][k] belong to
/// pixel_indices[k].
struct BinGroup {
    BinSetKey key;
    std::vector<std::size_t> pixel_indices;
    std::vector<double> gt_values;
    std::vector<std::vector<double>> pred_values;

    std::size_t count() const { return gt_values.size(); }
    std::size_t num_models() const { return pred_values.size(); }
};

/// Same as BinGroup without values, for test-time predictions.
struct IndexGroup {
    BinSetKey key;
    std::vector<std::size_t> pixel_indices;
};

/// Partitions every position of the batch into non-empty key groups.
/// Groups come back sorted by key; predictions outside [0, 255] are clamped
/// before binning. Output does not depend on threads.
std::vector<BinGroup> partition_reference(const ReferenceBatch& batch, const BinSpace& space,
                                          int threads = 1);

/// Throws ContractError if the vectors differ in length or there are none.
std::vector<IndexGroup> partition_prediction(const std::vector<std::span<const double>>& preds,
                                             const BinSpace& space, int threads = 1);

/// Per-position key codes in mixed radix T (first model most significant),
/// so code order equals key order. Throws ContractError if T^M overflows.
std::vector<std::uint64_t> key_codes(const std::vector<std::span<const double>>& preds,
                                     const BinSpace& space, int threads = 1);

BinSetKey decode_key(std::uint64_t code, std::size_t num_models, const BinSpace& space);
std::uint64_t encode_key(const BinSetKey& key, const BinSpace& space);

}  // namespace rangefuse
