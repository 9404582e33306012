#pragma once

#include "rangefuse/image.hpp"
#include "rangefuse/lut.hpp"

#include <span>
#include <vector>

namespace rangefuse {

/// Per-image global ensemble weights.
struct GlobalWeights {
    std::vector<double> beta;
};

struct ZzpmResult {
    ImageTensor image;
    GlobalWeights weights;
};

inline constexpr double kZzpmEpsilon = 1e-12;

/// Range-wise fusion: every position is keyed by the bins its M predictions
/// fall in, and the fused value is sum_m w_m x_m with w looked up in the LUT.
/// Output is clamped to [0, 255].
ImageTensor fuse_with_lut(std::span<const ImageTensor> preds, const WeightLut& lut);

ImageTensor fuse_average(std::span<const ImageTensor> preds);

/// sum_m beta_m x_m for a fixed weight vector.
ImageTensor fuse_global(std::span<const ImageTensor> preds, const GlobalWeights& weights);

/// Weights inversely proportional to each prediction's MSE against the
/// per-pixel average (plus kZzpmEpsilon), normalized. Needs M >= 2.
ZzpmResult fuse_zzpm(std::span<const ImageTensor> preds);

}  // namespace rangefuse
