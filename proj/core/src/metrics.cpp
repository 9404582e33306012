#include "rangefuse/metrics.hpp"

#include "rangefuse/dataset.hpp"
#include "rangefuse/errors.hpp"
#include "rangefuse/parallel.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace rangefuse {

namespace {

constexpr double kC1 = (0.01 * 255.0) * (0.01 * 255.0);
constexpr double kC2 = (0.03 * 255.0) * (0.03 * 255.0);

std::array<double, kSsimWindow> gaussian_window() {
    std::array<double, kSsimWindow> g{};
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int k = 0; k < kSsimWindow; ++k) {
        const double d = k - half;
        g[k] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += g[k];
    }
    for (double& v : g) v /= sum;
    return g;
}

// Valid-region separable filtering of a row-major plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t height, std::size_t width,
                                 const std::array<double, kSsimWindow>& g) {
    const std::size_t out_w = width - kSsimWindow + 1;
    const std::size_t out_h = height - kSsimWindow + 1;
    std::vector<double> rows(height * out_w);
    for (std::size_t h = 0; h < height; ++h) {
        const double* in = &src[h * width];
        for (std::size_t w = 0; w < out_w; ++w) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * in[w + k];
            rows[h * out_w + w] = acc;
        }
    }
    std::vector<double> out(out_h * out_w);
    for (std::size_t h = 0; h < out_h; ++h) {
        for (std::size_t w = 0; w < out_w; ++w) {
            double acc = 0.0;
            for (int k = 0; k < kSsimWindow; ++k) acc += g[k] * rows[(h + k) * out_w + w];
            out[h * out_w + w] = acc;
        }
    }
    return out;
}

}  // namespace

ChannelMode parse_channel_mode(std::string_view name) {
    if (name == "y") return ChannelMode::y;
    if (name == "rgb") return ChannelMode::rgb;
    throw ContractError("unknown channel mode '" + std::string(name) + "' (expected y or rgb)");
}

std::string_view to_string(ChannelMode mode) { return mode == ChannelMode::y ? "y" : "rgb"; }

double psnr(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ContractError("psnr: inputs differ in size");
    if (a.empty()) throw ContractError("psnr: empty input");
    double sq = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sq += d * d;
    }
    if (sq == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = sq / static_cast<double>(a.size());
    return 10.0 * std::log10(kMaxValue * kMaxValue / mse);
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
    if (!a.same_shape(b)) throw ContractError("psnr: image shapes differ");
    return psnr(std::span<const double>(a.data), std::span<const double>(b.data));
}

double psnr(const Plane& a, const Plane& b) {
    if (a.height != b.height || a.width != b.width) throw ContractError("psnr: plane shapes differ");
    return psnr(std::span<const double>(a.data), std::span<const double>(b.data));
}

double ssim(const Plane& a, const Plane& b) {
    if (a.height != b.height || a.width != b.width) throw ContractError("ssim: plane shapes differ");
    if (a.height < static_cast<std::size_t>(kSsimWindow) || a.width < static_cast<std::size_t>(kSsimWindow)) {
        throw ContractError("ssim: image smaller than the 11x11 window");
    }
    const auto g = gaussian_window();
    const std::size_t n = a.data.size();
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a.data[i] * a.data[i];
        bb[i] = b.data[i] * b.data[i];
        ab[i] = a.data[i] * b.data[i];
    }
    const auto mu_a = filter_valid(a.data, a.height, a.width, g);
    const auto mu_b = filter_valid(b.data, a.height, a.width, g);
    const auto e_aa = filter_valid(aa, a.height, a.width, g);
    const auto e_bb = filter_valid(bb, a.height, a.width, g);
    const auto e_ab = filter_valid(ab, a.height, a.width, g);

    double total = 0.0;
    for (std::size_t k = 0; k < mu_a.size(); ++k) {
        const double var_a = e_aa[k] - mu_a[k] * mu_a[k];
        const double var_b = e_bb[k] - mu_b[k] * mu_b[k];
        const double cov = e_ab[k] - mu_a[k] * mu_b[k];
        const double num = (2.0 * mu_a[k] * mu_b[k] + kC1) * (2.0 * cov + kC2);
        const double den = (mu_a[k] * mu_a[k] + mu_b[k] * mu_b[k] + kC1) * (var_a + var_b + kC2);
        total += num / den;
    }
    return total / static_cast<double>(mu_a.size());
}

ImageScore score_pair(const ImageTensor& pred, const ImageTensor& gt, ChannelMode mode) {
    if (!pred.same_shape(gt)) throw ContractError("prediction and ground truth shapes differ");
    ImageScore score;
    if (mode == ChannelMode::y) {
        const Plane yp = rgb_to_y(pred);
        const Plane yg = rgb_to_y(gt);
        score.psnr = psnr(yp, yg);
        score.ssim = ssim(yp, yg);
    } else {
        score.psnr = psnr(pred, gt);
        double s = 0.0;
        for (std::size_t c = 0; c < kChannels; ++c) s += ssim(channel_plane(pred, c), channel_plane(gt, c));
        score.ssim = s / static_cast<double>(kChannels);
    }
    return score;
}

MetricReport summarize(std::vector<ImageScore> scores, ChannelMode mode) {
    MetricReport report;
    report.channel_mode = mode;
    report.per_image = std::move(scores);
    if (report.per_image.empty()) return report;
    double p = 0.0, s = 0.0;
    for (const auto& r : report.per_image) {
        p += r.psnr;
        s += r.ssim;
    }
    const double n = static_cast<double>(report.per_image.size());
    report.mean_psnr = p / n;
    report.mean_ssim = s / n;
    return report;
}

MetricReport evaluate_set(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                          ChannelMode mode, int threads) {
    const std::array<std::filesystem::path, 2> dirs{pred_dir, gt_dir};
    const AlignedSet set = align_directories(dirs);
    std::vector<ImageScore> scores(set.ids.size());
    parallel_for(set.ids.size(), threads, [&](std::size_t k) {
        const ImageTensor pred = load_image(set.files[0][k]);
        const ImageTensor gt = load_image(set.files[1][k]);
        scores[k] = score_pair(pred, gt, mode);
        scores[k].id = set.ids[k];
    });
    return summarize(std::move(scores), mode);
}

std::string format_metric(double value) {
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

void write_report_csv(const MetricReport& report, std::ostream& out) {
    out << "id,psnr,ssim\n";
    for (const auto& r : report.per_image) {
        out << r.id << ',' << format_metric(r.psnr) << ',' << format_metric(r.ssim) << '\n';
    }
    out << "# summary,channel=" << to_string(report.channel_mode) << ",images=" << report.per_image.size()
        << ",mean_psnr=" << format_metric(report.mean_psnr)
        << ",mean_ssim=" << format_metric(report.mean_ssim) << '\n';
}

}  // namespace rangefuse
