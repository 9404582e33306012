#include "rangefuse/errors.hpp"
#include "rangefuse/synth.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

namespace rangefuse {
namespace {

using testing::make_group;
using testing::TempDir;

TEST(Splitmix, KnownSequence) {
    std::uint64_t state = 0;
    EXPECT_EQ(splitmix64(state), 0xE220A8397B1DCDAFull);
    EXPECT_EQ(splitmix64(state), 0x6E789E6AA1B965F4ull);
    EXPECT_EQ(splitmix64(state), 0x06C45D188009454Full);
}

TEST(Xoshiro, StreamsAreReproducibleAndDistinct) {
    Xoshiro256 a = Xoshiro256::stream(5, 1), b = Xoshiro256::stream(5, 1), c = Xoshiro256::stream(5, 2);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next();
        EXPECT_EQ(x, b.next());
        differs |= x != c.next();
    }
    EXPECT_TRUE(differs);
}

TEST(Xoshiro, MomentsLookRight) {
    Xoshiro256 rng(99);
    double su = 0, sn = 0, sn2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        su += u;
        const double z = rng.normal();
        sn += z;
        sn2 += z * z;
    }
    EXPECT_NEAR(su / n, 0.5, 0.005);
    EXPECT_NEAR(sn / n, 0.0, 0.01);
    EXPECT_NEAR(sn2 / n, 1.0, 0.02);
}

TEST(GenSet, Deterministic) {
    const SynthSpec spec = range_biased_spec(11, 24, 3, 2);
    const SynthData a = gen_set(spec), b = gen_set(spec);
    EXPECT_EQ(a.ref.gt, b.ref.gt);
    EXPECT_EQ(a.ref.preds, b.ref.preds);
    EXPECT_EQ(a.test.preds, b.test.preds);
    EXPECT_NE(a.ref.gt[0], a.test.gt[0]);
    EXPECT_NE(gen_set(range_biased_spec(12, 24, 3, 2)).ref.gt, a.ref.gt);
}

TEST(GenSet, ShapesAndIntegerCodes) {
    const SynthData d = gen_set(range_biased_spec(1, 20, 2, 3));
    ASSERT_EQ(d.ref.gt.size(), 2u);
    ASSERT_EQ(d.test.gt.size(), 3u);
    ASSERT_EQ(d.ref.preds.size(), 2u);
    for (const auto& split : {d.ref, d.test}) {
        for (const auto& models : split.preds)
            for (const auto& img : models) {
                EXPECT_EQ(img.height, 20u);
                for (double v : img.data) {
                    EXPECT_EQ(v, std::round(v));
                    EXPECT_GE(v, 0.0);
                    EXPECT_LE(v, 255.0);
                }
            }
    }
}

TEST(GenSet, NoiselessModelsReproduceGroundTruth) {
    SynthSpec spec;
    spec.seed = 3;
    spec.height = spec.width = 16;
    spec.num_ref = 2;
    spec.num_test = 1;
    spec.num_models = 2;
    spec.range_profiles = {{0.0, 256.0, {{0.0, 0.0}, {0.0, 0.0}}, {0.5, 0.5}}};
    const SynthData d = gen_set(spec);
    for (std::size_t n = 0; n < 2; ++n) {
        EXPECT_EQ(d.ref.preds[0][n], d.ref.gt[n]);
        EXPECT_EQ(d.ref.preds[1][n], d.ref.gt[n]);
    }
}

TEST(GenSet, SymmetricBiasCancelsInAverage) {
    SynthSpec spec;
    spec.seed = 4;
    spec.height = spec.width = 32;
    spec.num_ref = 1;
    spec.num_test = 0;
    spec.num_models = 2;
    spec.range_profiles = {{0.0, 256.0, {{5.0, 0.0}, {-5.0, 0.0}}, {0.5, 0.5}}};
    const SynthData d = gen_set(spec);
    const ImageTensor& gt = d.ref.gt[0];
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gt.data[i] < 5.0 || gt.data[i] > 250.0) continue;
        EXPECT_EQ(0.5 * (d.ref.preds[0][0].data[i] + d.ref.preds[1][0].data[i]), gt.data[i]);
    }
}

TEST(GenSet, GradientPatternIsSmooth) {
    SynthSpec spec = range_biased_spec(6, 32, 1, 0);
    spec.gt_pattern = GtPattern::gradient;
    const SynthData data = gen_set(spec);
    const ImageTensor& gt = data.ref.gt[0];
    double max_step = 0.0;
    for (std::size_t r = 0; r < gt.height; ++r)
        for (std::size_t c = 1; c < gt.width; ++c)
            max_step = std::max(max_step, std::abs(gt.at(r, c, 0) - gt.at(r, c - 1, 0)));
    EXPECT_LT(max_step, 40.0);
}

TEST(SynthSpec, Validation) {
    SynthSpec good = range_biased_spec();
    EXPECT_NO_THROW(good.validate());
    SynthSpec gap = good;
    gap.range_profiles[1].lo = 70.0;
    EXPECT_THROW(gap.validate(), ContractError);
    SynthSpec short_range = good;
    short_range.range_profiles.pop_back();
    EXPECT_THROW(short_range.validate(), ContractError);
    SynthSpec arity = good;
    arity.range_profiles[0].errors.pop_back();
    EXPECT_THROW(arity.validate(), ContractError);
    SynthSpec negative = good;
    negative.range_profiles[2].errors[0].stddev = -1.0;
    EXPECT_THROW(negative.validate(), ContractError);
    SynthSpec weights = good;
    weights.range_profiles[0].true_weights = {0.7, 0.7};
    EXPECT_THROW(weights.validate(), ContractError);
    SynthSpec empty = good;
    empty.height = 0;
    EXPECT_THROW(empty.validate(), ContractError);
}

TEST(SynthSpec, ProfileLookup) {
    const SynthSpec spec = range_biased_spec();
    EXPECT_EQ(spec.profile_for(0.0).lo, 0.0);
    EXPECT_EQ(spec.profile_for(63.0).lo, 0.0);
    EXPECT_EQ(spec.profile_for(64.0).lo, 64.0);
    EXPECT_EQ(spec.profile_for(255.0).lo, 192.0);
}

TEST(SynthSpec, JsonRoundTrip) {
    SynthSpec spec = range_biased_spec(77, 40, 5, 6);
    spec.gt_pattern = GtPattern::gradient;
    const SynthSpec back = SynthSpec::from_json(spec.to_json());
    EXPECT_EQ(back.to_json(), spec.to_json());
    EXPECT_EQ(back.seed, 77u);
    EXPECT_EQ(back.range_profiles[3].errors[0].bias, -14.0);

    TempDir dir("spec");
    {
        std::ofstream out(dir / "s.json");
        out << spec.to_json();
    }
    EXPECT_EQ(SynthSpec::load(dir / "s.json").to_json(), spec.to_json());
    EXPECT_THROW(SynthSpec::load(dir / "missing.json"), IoError);
    EXPECT_THROW(SynthSpec::from_json("[1,2"), ContractError);
    EXPECT_THROW(SynthSpec::from_json(R"({"seed": 1})"), ContractError);
    EXPECT_THROW(SynthSpec::from_json(R"({"seed": 1.5, "range_profiles": []})"), ContractError);
}

TEST(WriteSynth, Layout) {
    TempDir dir("layout");
    const SynthSpec spec = range_biased_spec(2, 12, 2, 1);
    write_synth(spec, gen_set(spec), dir.path());
    EXPECT_TRUE(std::filesystem::exists(dir / "spec.json"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "ref" / "gt" / "0000.png"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "ref" / "model_1" / "0001.png"));
    EXPECT_TRUE(std::filesystem::exists(dir.path() / "test" / "model_0" / "0000.png"));
    EXPECT_FALSE(std::filesystem::exists(dir.path() / "test" / "model_0" / "0001.png"));
    EXPECT_EQ(load_image(dir.path() / "ref" / "gt" / "0001.png"), gen_set(spec).ref.gt[1]);
}

TEST(GridOracle, SingleModel) {
    const BinGroup g = make_group({1.0, 2.0, 3.0}, {{2.0, 2.0, 2.0}});
    const OracleResult r = grid_search_oracle(g, {1.0}, 0.01);
    EXPECT_EQ(r.weights, std::vector<double>{1.0});
    EXPECT_NEAR(r.loglik, static_cast<double>(testing::reference_loglik({1, 2, 3}, {2}, {1}, {1})), 1e-12);
}

TEST(GridOracle, SymmetricDataSplitsEvenly) {
    const BinGroup g = make_group({-1.0, 1.0}, {{-1.0, -1.0}, {1.0, 1.0}});
    const OracleResult r = grid_search_oracle(g, {1.0, 1.0}, 0.5);
    EXPECT_EQ(r.weights, (std::vector<double>{0.5, 0.5}));
    EXPECT_NEAR(r.loglik,
                static_cast<double>(testing::reference_loglik({-1, 1}, {-1, 1}, {1, 1}, {0.5, 0.5})), 1e-12);
}

TEST(GridOracle, ThreeModelsAndErrors) {
    const BinGroup g = make_group({0.0, 0.0, 0.0, 10.0}, {{0, 0, 0, 0}, {10, 10, 10, 10}, {50, 50, 50, 50}});
    const OracleResult r = grid_search_oracle(g, {1.0, 1.0, 1.0}, 0.25);
    EXPECT_EQ(r.weights, (std::vector<double>{0.75, 0.25, 0.0}));
    EXPECT_THROW(grid_search_oracle(g, {1.0, 1.0}, 0.25), ContractError);
    EXPECT_THROW(grid_search_oracle(g, {1.0, 1.0, 1.0}, 0.0), ContractError);
    EXPECT_THROW(grid_search_oracle(make_group({1}, {{1}, {1}, {1}, {1}}), {1, 1, 1, 1}, 0.5), ContractError);
}

}  // namespace
}  // namespace rangefuse
