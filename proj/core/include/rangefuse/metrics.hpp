#pragma once

#include "rangefuse/image.hpp"

#include <filesystem>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rangefuse {

enum class ChannelMode { rgb, y };

ChannelMode parse_channel_mode(std::string_view name);
std::string_view to_string(ChannelMode mode);

/// 10 log10(255^2 / MSE); +infinity when the inputs are identical.
double psnr(std::span<const double> a, std::span<const double> b);
double psnr(const ImageTensor& a, const ImageTensor& b);
double psnr(const Plane& a, const Plane& b);

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

/// Mean SSIM over all valid (unpadded) 11x11 Gaussian windows, sigma 1.5,
/// C1 = (0.01 * 255)^2, C2 = (0.03 * 255)^2. Both sides must be at least
/// 11 pixels in each dimension.
double ssim(const Plane& a, const Plane& b);

struct ImageScore {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
};

struct MetricReport {
    std::vector<ImageScore> per_image;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    ChannelMode channel_mode = ChannelMode::y;
};

/// PSNR and SSIM of one pair. In y mode both are taken on the luma plane;
/// in rgb mode PSNR pools all samples and SSIM averages the three channels.
ImageScore score_pair(const ImageTensor& pred, const ImageTensor& gt, ChannelMode mode);

MetricReport summarize(std::vector<ImageScore> scores, ChannelMode mode);

/// Scores every PNG in pred_dir against the same-stem file in gt_dir.
MetricReport evaluate_set(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                          ChannelMode mode, int threads = 1);

/// "id,psnr,ssim" rows followed by one "# summary,..." comment line.
/// Reals use 17 significant digits; infinite PSNR is written as "inf".
void write_report_csv(const MetricReport& report, std::ostream& out);

std::string format_metric(double value);

}  // namespace rangefuse
