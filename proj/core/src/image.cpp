#include "rangefuse/image.hpp"

#include "rangefuse/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace rangefuse {

namespace {

struct PngImage {
    png_image image;
    PngImage() {
        std::memset(&image, 0, sizeof(image));
        image.version = PNG_IMAGE_VERSION;
    }
    ~PngImage() { png_image_free(&image); }
    PngImage(const PngImage&) = delete;
    PngImage& operator=(const PngImage&) = delete;
};

}  // namespace

ImageTensor load_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) {
        throw IoError("no such image file: " + path.string());
    }

    PngImage png;
    if (!png_image_begin_read_from_file(&png.image, path.c_str())) {
        throw IoError("cannot decode PNG " + path.string() + ": " + png.image.message);
    }
    if (png.image.format & PNG_FORMAT_FLAG_LINEAR) {
        throw IoError("unsupported bit depth (16-bit) in " + path.string());
    }
    if (png.image.format & PNG_FORMAT_FLAG_ALPHA) {
        throw IoError("unsupported alpha channel in " + path.string());
    }
    if (png.image.width == 0 || png.image.height == 0) {
        throw IoError("zero-dimension image: " + path.string());
    }

    png.image.format = PNG_FORMAT_RGB;
    std::vector<png_byte> buffer(PNG_IMAGE_SIZE(png.image));
    if (!png_image_finish_read(&png.image, nullptr, buffer.data(), 0, nullptr)) {
        throw IoError("cannot decode PNG " + path.string() + ": " + png.image.message);
    }

    ImageTensor img(png.image.height, png.image.width);
    std::transform(buffer.begin(), buffer.end(), img.data.begin(),
                   [](png_byte v) { return static_cast<double>(v); });
    return img;
}

unsigned char quantize(double value) {
    if (std::isnan(value)) return 0;
    const double r = std::round(value);
    return static_cast<unsigned char>(std::clamp(r, 0.0, kMaxValue));
}

ImageTensor quantized(const ImageTensor& img) {
    ImageTensor out = img;
    for (double& v : out.data) v = quantize(v);
    return out;
}

void save_image(const ImageTensor& img, const std::filesystem::path& path) {
    if (img.height == 0 || img.width == 0 || img.size() != img.height * img.width * kChannels) {
        throw ContractError("cannot save malformed image to " + path.string());
    }
    std::vector<png_byte> buffer(img.size());
    std::transform(img.data.begin(), img.data.end(), buffer.begin(), quantize);

    PngImage png;
    png.image.width = static_cast<png_uint_32>(img.width);
    png.image.height = static_cast<png_uint_32>(img.height);
    png.image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png.image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
        throw IoError("cannot write PNG " + path.string() + ": " + png.image.message);
    }
}

FlatVector flatten(const ImageTensor& img) { return img.data; }

ImageTensor unflatten(std::span<const double> values, std::size_t height, std::size_t width) {
    if (values.size() != height * width * kChannels) {
        throw ContractError("flat vector length does not match " + std::to_string(height) + "x" +
                            std::to_string(width) + "x3");
    }
    ImageTensor img(height, width);
    std::copy(values.begin(), values.end(), img.data.begin());
    return img;
}

double rgb_to_y(double r, double g, double b) {
    return 16.0 + (65.481 * r + 128.553 * g + 24.966 * b) / 255.0;
}

Plane rgb_to_y(const ImageTensor& img) {
    Plane y{img.height, img.width, std::vector<double>(img.height * img.width)};
    for (std::size_t p = 0; p < y.data.size(); ++p) {
        const double* px = &img.data[p * kChannels];
        y.data[p] = rgb_to_y(px[0], px[1], px[2]);
    }
    return y;
}

Plane channel_plane(const ImageTensor& img, std::size_t channel) {
    Plane out{img.height, img.width, std::vector<double>(img.height * img.width)};
    for (std::size_t p = 0; p < out.data.size(); ++p) out.data[p] = img.data[p * kChannels + channel];
    return out;
}

ReferenceBatch::ReferenceBatch(std::size_t num_models) : preds_(num_models) {
    if (num_models == 0) throw ContractError("reference batch needs at least one model");
}

void ReferenceBatch::append(const ImageTensor& gt, std::span<const ImageTensor> preds) {
    if (preds.size() != preds_.size()) {
        throw ContractError("expected " + std::to_string(preds_.size()) + " predictions, got " +
                            std::to_string(preds.size()));
    }
    for (const auto& p : preds) {
        if (!p.same_shape(gt) || p.size() != gt.size()) {
            throw ContractError("prediction shape differs from ground truth in sample " +
                                std::to_string(num_samples_));
        }
    }
    gt_.insert(gt_.end(), gt.data.begin(), gt.data.end());
    for (std::size_t m = 0; m < preds.size(); ++m) {
        preds_[m].insert(preds_[m].end(), preds[m].data.begin(), preds[m].data.end());
    }
    ++num_samples_;
}

}  // namespace rangefuse
