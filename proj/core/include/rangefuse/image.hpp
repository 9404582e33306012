#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

namespace rangefuse {

inline constexpr std::size_t kChannels = 3;
inline constexpr double kMaxValue = 255.0;

/// An H x W RGB image with real-valued samples in [0, 255].
///
/// Samples are stored interleaved and row-major: the value of channel c at
/// row h, column w lives at (h * width + w) * 3 + c. This is also the
/// flattened-vector layout used by binning and the reference batch.
struct ImageTensor {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    ImageTensor() = default;
    ImageTensor(std::size_t h, std::size_t w, double fill = 0.0)
        : height(h), width(w), data(h * w * kChannels, fill) {}

    std::size_t size() const { return data.size(); }
    std::size_t index(std::size_t h, std::size_t w, std::size_t c) const {
        return (h * width + w) * kChannels + c;
    }
    double& at(std::size_t h, std::size_t w, std::size_t c) { return data[index(h, w, c)]; }
    double at(std::size_t h, std::size_t w, std::size_t c) const { return data[index(h, w, c)]; }

    bool same_shape(const ImageTensor& other) const {
        return height == other.height && width == other.width;
    }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;
};

/// Single-channel plane, row-major.
struct Plane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> data;

    double at(std::size_t h, std::size_t w) const { return data[h * width + w]; }
};

using FlatVector = std::vector<double>;

/// Reads an 8-bit PNG. Gray and palette images are expanded to RGB.
/// Throws IoError for missing/undecodable files, 16-bit or alpha input, and
/// zero-sized images.
ImageTensor load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG after quantize() on every sample.
void save_image(const ImageTensor& img, const std::filesystem::path& path);

/// Round half away from zero, then clamp to [0, 255].
unsigned char quantize(double value);

/// The image as it would read back after save_image.
ImageTensor quantized(const ImageTensor& img);

FlatVector flatten(const ImageTensor& img);
ImageTensor unflatten(std::span<const double> values, std::size_t height, std::size_t width);

/// BT.601 limited-range luma: 16 + (65.481 R + 128.553 G + 24.966 B) / 255.
double rgb_to_y(double r, double g, double b);
Plane rgb_to_y(const ImageTensor& img);

/// Single channel of an RGB image as a plane.
Plane channel_plane(const ImageTensor& img, std::size_t channel);

/// Ground truths and M model predictions concatenated sample by sample.
/// Samples may differ in size, but within a sample all M+1 images match.
class ReferenceBatch {
public:
    explicit ReferenceBatch(std::size_t num_models);

    void append(const ImageTensor& gt, std::span<const ImageTensor> preds);

    std::size_t num_models() const { return preds_.size(); }
    std::size_t num_samples() const { return num_samples_; }
    std::size_t size() const { return gt_.size(); }

    std::span<const double> gt() const { return gt_; }
    std::span<const double> pred(std::size_t model) const { return preds_.at(model); }

private:
    FlatVector gt_;
    std::vector<FlatVector> preds_;
    std::size_t num_samples_ = 0;
};

}  // namespace rangefuse
