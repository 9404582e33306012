#pragma once

#include "rangefuse/binning.hpp"
#include "rangefuse/mpem.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rangefuse {

enum class EntrySource { em, fallback_small, fallback_undetermined };

std::string_view to_string(EntrySource source);
EntrySource parse_entry_source(std::string_view name);

struct LutEntry {
    BinSetKey key;
    std::vector<double> weights;
    std::size_t count = 0;
    bool converged = false;
    int steps = 0;
    EntrySource source = EntrySource::em;

    friend bool operator==(const LutEntry&, const LutEntry&) = default;
};

/// Range-wise ensemble weights keyed by bin set. Keys that never occurred
/// in the reference set resolve to fallback_weights.
struct WeightLut {
    static constexpr int kFormatVersion = 1;

    int version = kFormatVersion;
    std::size_t num_models = 0;
    int bin_width = 32;
    int num_bins = 8;
    std::size_t min_pixels = 100;
    std::vector<double> fallback_weights;
    std::map<BinSetKey, LutEntry> entries;

    BinSpace space() const { return BinSpace(bin_width); }

    /// Checks every structural and simplex invariant; throws ContractError.
    void validate() const;

    friend bool operator==(const WeightLut&, const WeightLut&) = default;
};

struct EntryCounts {
    std::size_t em = 0;
    std::size_t fallback_small = 0;
    std::size_t fallback_undetermined = 0;
};

EntryCounts count_sources(const WeightLut& lut);

std::vector<double> uniform_weights(std::size_t num_models);

/// True if every weight is finite, >= 0 and they sum to 1 within tol.
bool on_simplex(const std::vector<double>& weights, double tol = 1e-12);

/// An empty LUT that answers every lookup with fallback (uniform by default).
WeightLut make_fallback_lut(std::size_t num_models, const BinSpace& space,
                            std::optional<std::vector<double>> fallback = std::nullopt);

/// Estimation stage: partitions the batch and fits one mixture per non-empty
/// bin group. Groups with fewer than cfg.min_pixels pixels, or whose EM
/// solution is undetermined, store the fallback weights instead.
WeightLut estimate_lut(const ReferenceBatch& batch, const BinSpace& space, const EmConfig& cfg,
                       int threads = 1, std::optional<std::vector<double>> fallback = std::nullopt);

/// The LutEntry for one group (no partitioning).
LutEntry estimate_entry(const BinGroup& group, const EmConfig& cfg,
                        const std::vector<double>& fallback);

/// Entry weights for key, or the fallback weights when absent. Throws
/// ContractError if the key arity is not num_models.
const std::vector<double>& lut_lookup(const WeightLut& lut, const BinSetKey& key);

/// Canonical JSON: fixed field order, entries sorted by key, reals with 17
/// significant digits. Equal LUTs produce identical bytes.
std::string to_json(const WeightLut& lut);
WeightLut from_json(std::string_view text);

void serialize_lut(const WeightLut& lut, const std::filesystem::path& path);
WeightLut deserialize_lut(const std::filesystem::path& path);

}  // namespace rangefuse
