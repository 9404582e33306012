#include "rangefuse/binning.hpp"

#include "rangefuse/errors.hpp"
#include "rangefuse/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>

namespace rangefuse {

namespace {

constexpr std::size_t kChunk = 1 << 16;

void check_radix(std::size_t num_models, const BinSpace& space) {
    const auto t = static_cast<std::uint64_t>(space.num_bins());
    std::uint64_t total = 1;
    for (std::size_t m = 0; m < num_models; ++m) {
        if (total > std::numeric_limits<std::uint64_t>::max() / t) {
            throw ContractError("bin-set key space T^M does not fit in 64 bits (T=" +
                                std::to_string(t) + ", M=" + std::to_string(num_models) + ")");
        }
        total *= t;
    }
}

// Groups positions by code. Returns the distinct codes in ascending order and,
// for each, the ascending positions carrying it.
std::pair<std::vector<std::uint64_t>, std::vector<std::vector<std::size_t>>> group_codes(
    const std::vector<std::uint64_t>& codes) {
    std::unordered_map<std::uint64_t, std::size_t> slot_of;
    std::vector<std::uint64_t> seen;
    std::vector<std::size_t> counts;
    std::vector<std::size_t> slot(codes.size());
    for (std::size_t i = 0; i < codes.size(); ++i) {
        auto [it, inserted] = slot_of.try_emplace(codes[i], seen.size());
        if (inserted) {
            seen.push_back(codes[i]);
            counts.push_back(0);
        }
        slot[i] = it->second;
        ++counts[it->second];
    }

    std::vector<std::size_t> order(seen.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return seen[a] < seen[b]; });
    std::vector<std::size_t> rank(seen.size());
    for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

    std::vector<std::uint64_t> sorted_codes(seen.size());
    std::vector<std::vector<std::size_t>> members(seen.size());
    for (std::size_t s = 0; s < seen.size(); ++s) {
        sorted_codes[rank[s]] = seen[s];
        members[rank[s]].reserve(counts[s]);
    }
    for (std::size_t i = 0; i < codes.size(); ++i) members[rank[slot[i]]].push_back(i);
    return {std::move(sorted_codes), std::move(members)};
}

}  // namespace

BinSpace::BinSpace(int bin_width) : bin_width_(bin_width) {
    if (bin_width < 1) throw ContractError("bin width must be >= 1, got " + std::to_string(bin_width));
    num_bins_ = (256 + bin_width - 1) / bin_width;
}

double clamp_to_range(double value) {
    if (std::isnan(value)) throw ContractError("NaN prediction value");
    return std::clamp(value, 0.0, kMaxValue);
}

int bin_index(double value, const BinSpace& space) {
    if (!(value >= 0.0 && value <= kMaxValue)) {
        throw ContractError("value " + std::to_string(value) + " outside [0, 255]");
    }
    const int idx = static_cast<int>(std::floor(value / space.bin_width()));
    return std::min(idx, space.num_bins() - 1);
}

std::uint64_t encode_key(const BinSetKey& key, const BinSpace& space) {
    check_radix(key.arity(), space);
    std::uint64_t code = 0;
    for (int idx : key.indices) {
        if (idx < 0 || idx >= space.num_bins()) {
            throw ContractError("bin index " + std::to_string(idx) + " outside [0, " +
                                std::to_string(space.num_bins()) + ")");
        }
        code = code * static_cast<std::uint64_t>(space.num_bins()) + static_cast<std::uint64_t>(idx);
    }
    return code;
}

BinSetKey decode_key(std::uint64_t code, std::size_t num_models, const BinSpace& space) {
    const auto t = static_cast<std::uint64_t>(space.num_bins());
    BinSetKey key{std::vector<int>(num_models)};
    for (std::size_t m = num_models; m-- > 0;) {
        key.indices[m] = static_cast<int>(code % t);
        code /= t;
    }
    return key;
}

std::vector<std::uint64_t> key_codes(const std::vector<std::span<const double>>& preds,
                                     const BinSpace& space, int threads) {
    if (preds.empty()) throw ContractError("at least one model prediction is required");
    const std::size_t n = preds.front().size();
    for (std::size_t m = 1; m < preds.size(); ++m) {
        if (preds[m].size() != n) {
            throw ContractError("prediction length mismatch: model 0 has " + std::to_string(n) +
                                " values, model " + std::to_string(m) + " has " +
                                std::to_string(preds[m].size()));
        }
    }
    check_radix(preds.size(), space);

    const auto t = static_cast<std::uint64_t>(space.num_bins());
    std::vector<std::uint64_t> codes(n, 0);
    const std::size_t chunks = (n + kChunk - 1) / kChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t begin = c * kChunk;
        const std::size_t end = std::min(n, begin + kChunk);
        for (const auto& pred : preds) {
            for (std::size_t i = begin; i < end; ++i) {
                const int idx = bin_index(clamp_to_range(pred[i]), space);
                codes[i] = codes[i] * t + static_cast<std::uint64_t>(idx);
            }
        }
    });
    return codes;
}

std::vector<IndexGroup> partition_prediction(const std::vector<std::span<const double>>& preds,
                                             const BinSpace& space, int threads) {
    const auto codes = key_codes(preds, space, threads);
    auto [sorted_codes, members] = group_codes(codes);

    std::vector<IndexGroup> groups(sorted_codes.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        groups[g].key = decode_key(sorted_codes[g], preds.size(), space);
        groups[g].pixel_indices = std::move(members[g]);
    }
    return groups;
}

std::vector<BinGroup> partition_reference(const ReferenceBatch& batch, const BinSpace& space,
                                          int threads) {
    std::vector<std::span<const double>> preds;
    for (std::size_t m = 0; m < batch.num_models(); ++m) preds.push_back(batch.pred(m));
    auto index_groups = partition_prediction(preds, space, threads);

    const auto gt = batch.gt();
    std::vector<BinGroup> groups(index_groups.size());
    parallel_for(groups.size(), threads, [&](std::size_t g) {
        BinGroup& out = groups[g];
        out.key = std::move(index_groups[g].key);
        out.pixel_indices = std::move(index_groups[g].pixel_indices);
        out.gt_values.reserve(out.pixel_indices.size());
        for (std::size_t i : out.pixel_indices) out.gt_values.push_back(gt[i]);
        out.pred_values.resize(preds.size());
        for (std::size_t m = 0; m < preds.size(); ++m) {
            auto& values = out.pred_values[m];
            values.reserve(out.pixel_indices.size());
            for (std::size_t i : out.pixel_indices) values.push_back(clamp_to_range(preds[m][i]));
        }
    });
    return groups;
}

}  // namespace rangefuse
