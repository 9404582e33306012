#pragma once

#include "rangefuse/binning.hpp"
#include "rangefuse/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace rangefuse {

/// xoshiro256** seeded through splitmix64. Portable and fully specified, so
/// generated data is identical on every platform.
class Xoshiro256 {
public:
    explicit Xoshiro256(std::uint64_t seed);

    /// Independent sub-stream: seeds from splitmix64 applied to
    /// seed ^ (stream * 0x9E3779B97F4A7C15).
    static Xoshiro256 stream(std::uint64_t seed, std::uint64_t stream_id);

    std::uint64_t next();
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal via Box-Muller (both variates are used).
    double normal();

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

struct ModelError {
    double bias = 0.0;
    double stddev = 0.0;
};

/// Error model for ground-truth values in [lo, hi). The last profile also
/// covers hi itself. true_weights records the mixture a range-wise
/// estimator is expected to prefer there.
struct RangeProfile {
    double lo = 0.0;
    double hi = 256.0;
    std::vector<ModelError> errors;
    std::vector<double> true_weights;
};

enum class GtPattern { uniform, gradient };

struct SynthSpec {
    std::uint64_t seed = 0;
    std::size_t height = 64;
    std::size_t width = 64;
    std::size_t num_ref = 10;
    std::size_t num_test = 10;
    std::size_t num_models = 2;
    GtPattern gt_pattern = GtPattern::uniform;
    std::vector<RangeProfile> range_profiles;

    /// Throws ContractError if the profiles do not tile [0, 255] or any
    /// profile has the wrong arity, a negative stddev or off-simplex weights.
    void validate() const;
    const RangeProfile& profile_for(double gt_value) const;

    std::string to_json() const;
    static SynthSpec from_json(std::string_view text);
    static SynthSpec load(const std::filesystem::path& path);
};

/// Two models, each accurate on alternate intensity ranges and biased on the
/// others; range-wise weighting beats every global weighting on it.
SynthSpec range_biased_spec(std::uint64_t seed = 2024, std::size_t size = 128, std::size_t num_ref = 20,
                            std::size_t num_test = 20);

struct SynthSplit {
    std::vector<ImageTensor> gt;
    std::vector<std::vector<ImageTensor>> preds;  // [model][image]

    std::vector<ImageTensor> predictions_for(std::size_t image) const;
};

struct SynthData {
    SynthSplit ref;
    SynthSplit test;
};

/// Ground truths are integer codes; prediction m is
/// quantize(gt + bias + stddev * N(0, 1)) with the profile of the gt value.
/// Every image uses its own sub-stream, so the output depends only on the
/// spec.
SynthData gen_set(const SynthSpec& spec);

/// Writes root/{ref,test}/{gt,model_0,...}/NNNN.png and root/spec.json.
void write_synth(const SynthSpec& spec, const SynthData& data, const std::filesystem::path& root);

struct OracleResult {
    std::vector<double> weights;
    double loglik = 0.0;
};

/// Exhaustive maximizer of the mixture log-likelihood over the weight
/// simplex grid {k / n}, n = round(1 / resolution), with component means at
/// the group's prediction averages and the given variances held fixed.
/// Ties go to the lexicographically smallest weight vector. M <= 3.
OracleResult grid_search_oracle(const BinGroup& group, const std::vector<double>& variances,
                                double resolution);

}  // namespace rangefuse
