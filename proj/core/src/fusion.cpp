#include "rangefuse/fusion.hpp"

#include "rangefuse/errors.hpp"

#include <algorithm>
#include <string>

namespace rangefuse {

namespace {

void check_shapes(std::span<const ImageTensor> preds) {
    if (preds.empty()) throw ContractError("fusion needs at least one prediction");
    const ImageTensor& first = preds.front();
    if (first.size() != first.height * first.width * kChannels || first.size() == 0) {
        throw ContractError("malformed prediction image");
    }
    for (std::size_t m = 1; m < preds.size(); ++m) {
        if (!preds[m].same_shape(first) || preds[m].size() != first.size()) {
            throw ContractError("prediction " + std::to_string(m) + " is " +
                                std::to_string(preds[m].height) + "x" + std::to_string(preds[m].width) +
                                ", expected " + std::to_string(first.height) + "x" +
                                std::to_string(first.width));
        }
    }
}

}  // namespace

ImageTensor fuse_with_lut(std::span<const ImageTensor> preds, const WeightLut& lut) {
    check_shapes(preds);
    if (preds.size() != lut.num_models) {
        throw ContractError("LUT expects " + std::to_string(lut.num_models) + " models, got " +
                            std::to_string(preds.size()));
    }

    std::vector<std::span<const double>> views;
    for (const auto& p : preds) views.emplace_back(p.data);
    const auto groups = partition_prediction(views, lut.space());

    ImageTensor out(preds.front().height, preds.front().width);
    const std::size_t m_count = preds.size();
    for (const auto& group : groups) {
        const std::vector<double>& w = lut_lookup(lut, group.key);
        for (std::size_t i : group.pixel_indices) {
            double acc = 0.0;
            for (std::size_t m = 0; m < m_count; ++m) acc += w[m] * preds[m].data[i];
            out.data[i] = std::clamp(acc, 0.0, kMaxValue);
        }
    }
    return out;
}

ImageTensor fuse_average(std::span<const ImageTensor> preds) {
    check_shapes(preds);
    ImageTensor out(preds.front().height, preds.front().width);
    const double inv_m = 1.0 / static_cast<double>(preds.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (const auto& p : preds) acc += p.data[i];
        out.data[i] = acc * inv_m;
    }
    return out;
}

ImageTensor fuse_global(std::span<const ImageTensor> preds, const GlobalWeights& weights) {
    check_shapes(preds);
    if (weights.beta.size() != preds.size()) throw ContractError("global weight count differs from M");
    ImageTensor out(preds.front().height, preds.front().width);
    for (std::size_t i = 0; i < out.size(); ++i) {
        double acc = 0.0;
        for (std::size_t m = 0; m < preds.size(); ++m) acc += weights.beta[m] * preds[m].data[i];
        out.data[i] = acc;
    }
    return out;
}

ZzpmResult fuse_zzpm(std::span<const ImageTensor> preds) {
    check_shapes(preds);
    if (preds.size() < 2) throw ContractError("ZZPM weighting needs at least two predictions");

    const ImageTensor mean = fuse_average(preds);
    const double inv_len = 1.0 / static_cast<double>(mean.size());
    std::vector<double> inv_err(preds.size());
    double total = 0.0;
    for (std::size_t m = 0; m < preds.size(); ++m) {
        double sq = 0.0;
        for (std::size_t i = 0; i < mean.size(); ++i) {
            const double d = preds[m].data[i] - mean.data[i];
            sq += d * d;
        }
        inv_err[m] = 1.0 / (sq * inv_len + kZzpmEpsilon);
        total += inv_err[m];
    }

    GlobalWeights weights{std::vector<double>(preds.size())};
    for (std::size_t m = 0; m < preds.size(); ++m) weights.beta[m] = inv_err[m] / total;
    return {fuse_global(preds, weights), std::move(weights)};
}

}  // namespace rangefuse
