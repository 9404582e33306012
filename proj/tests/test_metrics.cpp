#include "rangefuse/errors.hpp"
#include "rangefuse/metrics.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

namespace rangefuse {
namespace {

using testing::random_image;
using testing::reference_ssim;
using testing::TempDir;

Plane random_plane(std::uint64_t seed, std::size_t h, std::size_t w) {
    return channel_plane(random_image(seed, h, w), 0);
}

TEST(Psnr, IdenticalIsInfinite) {
    const ImageTensor a = random_image(1, 8, 8);
    EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
}

TEST(Psnr, ConstantOffset) {
    // 10 log10(255^2 / 16^2), evaluated with mpmath at 50 digits.
    const ImageTensor zero(4, 4, 0.0), sixteen(4, 4, 16.0);
    EXPECT_NEAR(psnr(zero, sixteen), 24.048403955560608, 1e-12);
    EXPECT_NEAR(psnr(zero, sixteen), 24.0491, 1e-3);
}

TEST(Psnr, FullScaleErrorIsZero) {
    EXPECT_DOUBLE_EQ(psnr(ImageTensor(3, 3, 0.0), ImageTensor(3, 3, 255.0)), 0.0);
}

TEST(Psnr, SymmetricAndMonotone) {
    const ImageTensor a = random_image(2, 12, 12), b = random_image(3, 12, 12);
    EXPECT_EQ(psnr(a, b), psnr(b, a));
    const ImageTensor base(6, 6, 128.0);
    ImageTensor err = base;
    for (std::size_t i = 0; i < err.size(); ++i) err.data[i] += static_cast<double>(i % 5) - 2.0;
    double previous = psnr(base, err);
    for (double t : {1.5, 2.0, 4.0, 10.0}) {
        ImageTensor scaled = base;
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled.data[i] += t * (err.data[i] - base.data[i]);
        const double p = psnr(base, scaled);
        EXPECT_LT(p, previous);
        previous = p;
    }
}

TEST(Psnr, ShapeErrors) {
    EXPECT_THROW(psnr(ImageTensor(2, 2), ImageTensor(2, 3)), ContractError);
}

TEST(Ssim, SelfSimilarityIsExactlyOne) {
    for (std::uint64_t s = 0; s < 5; ++s) {
        const Plane a = random_plane(s, 20 + s, 31);
        EXPECT_EQ(ssim(a, a), 1.0);
    }
    const Plane flat = channel_plane(ImageTensor(16, 16, 42.0), 0);
    EXPECT_EQ(ssim(flat, flat), 1.0);
}

TEST(Ssim, ConstantShiftLowersLuminanceTerm) {
    const Plane a = random_plane(7, 24, 24);
    Plane b = a;
    for (double& v : b.data) v += 5.0;
    const double s = ssim(a, b);
    EXPECT_GT(s, 0.0);
    EXPECT_LT(s, 1.0);
}

TEST(Ssim, MatchesReferenceImplementation) {
    const Plane a = random_plane(101, 32, 32);
    Plane b = a;
    Xoshiro256 rng(102);
    for (double& v : b.data) v = std::clamp(v + 20.0 * rng.normal(), 0.0, 255.0);
    EXPECT_NEAR(ssim(a, b), reference_ssim(a, b), 1e-6);
    EXPECT_NEAR(ssim(b, a), ssim(a, b), 1e-15);

    const Plane c = random_plane(103, 32, 32);
    EXPECT_NEAR(ssim(a, c), reference_ssim(a, c), 1e-6);
}

TEST(Ssim, RejectsSmallImages) {
    const Plane a = random_plane(1, 10, 40);
    EXPECT_THROW(ssim(a, a), ContractError);
    EXPECT_THROW(ssim(random_plane(1, 12, 12), random_plane(1, 12, 13)), ContractError);
}

TEST(ScorePair, ModesDiffer) {
    const ImageTensor a = random_image(5, 16, 16);
    ImageTensor b = a;
    for (std::size_t i = 0; i < b.size(); i += 3) b.data[i] = std::min(255.0, b.data[i] + 9.0);
    const ImageScore y = score_pair(b, a, ChannelMode::y);
    const ImageScore rgb = score_pair(b, a, ChannelMode::rgb);
    EXPECT_DOUBLE_EQ(rgb.psnr, psnr(b, a));
    EXPECT_DOUBLE_EQ(y.psnr, psnr(rgb_to_y(b), rgb_to_y(a)));
    EXPECT_NE(y.psnr, rgb.psnr);
    double channel_mean = 0.0;
    for (std::size_t c = 0; c < 3; ++c) channel_mean += ssim(channel_plane(b, c), channel_plane(a, c)) / 3.0;
    EXPECT_DOUBLE_EQ(rgb.ssim, channel_mean);
}

TEST(ChannelModeNames, RoundTrip) {
    EXPECT_EQ(parse_channel_mode("y"), ChannelMode::y);
    EXPECT_EQ(parse_channel_mode("rgb"), ChannelMode::rgb);
    EXPECT_EQ(to_string(ChannelMode::rgb), "rgb");
    EXPECT_THROW(parse_channel_mode("lab"), ContractError);
}

TEST(EvaluateSet, IdenticalDirectories) {
    TempDir dir("eval_same");
    std::filesystem::create_directories(dir / "a");
    save_image(random_image(1, 16, 16), dir / "a" / "x.png");
    const MetricReport r = evaluate_set(dir / "a", dir / "a", ChannelMode::y);
    ASSERT_EQ(r.per_image.size(), 1u);
    EXPECT_EQ(r.mean_ssim, 1.0);
    EXPECT_EQ(r.mean_psnr, std::numeric_limits<double>::infinity());
}

TEST(EvaluateSet, MeanOfTwoPairs) {
    TempDir dir("eval_mean");
    std::filesystem::create_directories(dir / "pred");
    std::filesystem::create_directories(dir / "gt");
    save_image(ImageTensor(12, 12, 0.0), dir / "gt" / "a.png");
    save_image(ImageTensor(12, 12, 16.0), dir / "pred" / "a.png");
    save_image(ImageTensor(12, 12, 100.0), dir / "gt" / "b.png");
    save_image(ImageTensor(12, 12, 104.0), dir / "pred" / "b.png");
    const MetricReport r = evaluate_set(dir / "pred", dir / "gt", ChannelMode::rgb, 2);
    ASSERT_EQ(r.per_image.size(), 2u);
    EXPECT_EQ(r.per_image[0].id, "a");
    const double p1 = 20.0 * std::log10(255.0 / 16.0), p2 = 20.0 * std::log10(255.0 / 4.0);
    EXPECT_NEAR(r.per_image[0].psnr, p1, 1e-12);
    EXPECT_NEAR(r.per_image[1].psnr, p2, 1e-12);
    EXPECT_NEAR(r.mean_psnr, (p1 + p2) / 2.0, 1e-12);
}

TEST(EvaluateSet, Errors) {
    TempDir dir("eval_err");
    std::filesystem::create_directories(dir / "pred");
    std::filesystem::create_directories(dir / "gt");
    EXPECT_THROW(evaluate_set(dir / "pred", dir / "gt", ChannelMode::y), ContractError);
    save_image(ImageTensor(12, 12, 0.0), dir / "pred" / "a.png");
    EXPECT_THROW(evaluate_set(dir / "pred", dir / "gt", ChannelMode::y), ContractError);
    EXPECT_THROW(evaluate_set(dir / "nope", dir / "gt", ChannelMode::y), IoError);
}

TEST(ReportCsv, FormatAndRecomputableMeans) {
    MetricReport r = summarize({{"a", 30.25, 0.5}, {"b", std::numeric_limits<double>::infinity(), 1.0},
                                {"c", 41.0, 0.875}},
                               ChannelMode::y);
    std::ostringstream out;
    write_report_csv(r, out);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "id,psnr,ssim");
    std::getline(in, line);
    EXPECT_EQ(line, "a,30.25,0.5");
    std::getline(in, line);
    EXPECT_EQ(line, "b,inf,1");
    std::getline(in, line);
    EXPECT_EQ(line, "c,41,0.875");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("# summary,channel=y,images=3,mean_psnr=inf,mean_ssim=", 0), 0u) << line;

    const MetricReport finite = summarize({{"a", 30.25, 0.5}, {"c", 41.0, 0.875}}, ChannelMode::rgb);
    EXPECT_NEAR(finite.mean_psnr, 35.625, 1e-12);
    EXPECT_NEAR(finite.mean_ssim, 0.6875, 1e-12);
}

}  // namespace
}  // namespace rangefuse
