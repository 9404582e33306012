#include "rangefuse/binning.hpp"
#include "rangefuse/errors.hpp"
#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <set>

namespace rangefuse {
namespace {

std::vector<std::span<const double>> views(const std::vector<std::vector<double>>& preds) {
    return {preds.begin(), preds.end()};
}

TEST(BinSpace, NumBinsCoversRange) {
    for (int b = 1; b <= 300; ++b) {
        const BinSpace space(b);
        EXPECT_LE((space.num_bins() - 1) * b, 255) << b;
        EXPECT_LT(255, space.num_bins() * b) << b;
    }
    EXPECT_EQ(BinSpace(32).num_bins(), 8);
    EXPECT_EQ(BinSpace(96).num_bins(), 3);
    EXPECT_EQ(BinSpace(256).num_bins(), 1);
    EXPECT_THROW(BinSpace(0), ContractError);
}

TEST(BinIndex, Examples) {
    EXPECT_EQ(bin_index(0.0, BinSpace(32)), 0);
    EXPECT_EQ(bin_index(255.0, BinSpace(32)), 7);
    EXPECT_EQ(bin_index(64.0, BinSpace(32)), 2);
    EXPECT_EQ(bin_index(250.0, BinSpace(96)), 2);
    EXPECT_EQ(bin_index(31.999, BinSpace(32)), 0);
    EXPECT_EQ(bin_index(32.0, BinSpace(32)), 1);
}

TEST(BinIndex, RejectsOutOfRange) {
    EXPECT_THROW(bin_index(-0.001, BinSpace(32)), ContractError);
    EXPECT_THROW(bin_index(255.001, BinSpace(32)), ContractError);
    EXPECT_THROW(bin_index(std::nan(""), BinSpace(32)), ContractError);
    EXPECT_DOUBLE_EQ(clamp_to_range(-3.0), 0.0);
    EXPECT_DOUBLE_EQ(clamp_to_range(260.0), 255.0);
    EXPECT_THROW(clamp_to_range(std::nan("")), ContractError);
}

TEST(KeyCodes, EncodeDecodeAndOrder) {
    const BinSpace space(32);
    const BinSetKey a{{1, 7, 0}}, b{{2, 0, 0}};
    EXPECT_EQ(decode_key(encode_key(a, space), 3, space), a);
    EXPECT_LT(encode_key(a, space), encode_key(b, space));
    EXPECT_THROW(encode_key(BinSetKey{{8}}, space), ContractError);
    // 256^9 overflows 64 bits.
    EXPECT_THROW(encode_key(BinSetKey{std::vector<int>(9, 0)}, BinSpace(1)), ContractError);
}

TEST(PartitionReference, SingleModelSingleBin) {
    ReferenceBatch batch(1);
    ImageTensor gt(2, 2, 50.0), pred(2, 2, 10.0);
    batch.append(gt, std::vector<ImageTensor>{pred});
    const auto groups = partition_reference(batch, BinSpace(32));
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].key.indices, std::vector<int>{0});
    EXPECT_EQ(groups[0].count(), 12u);
}

TEST(PartitionPrediction, TwoModelExample) {
    const std::vector<std::vector<double>> preds{{10, 40}, {10, 200}};
    const auto groups = partition_prediction(views(preds), BinSpace(32));
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0].key.indices, (std::vector<int>{0, 0}));
    EXPECT_EQ(groups[0].pixel_indices, std::vector<std::size_t>{0});
    EXPECT_EQ(groups[1].key.indices, (std::vector<int>{1, 6}));
    EXPECT_EQ(groups[1].pixel_indices, std::vector<std::size_t>{1});
}

TEST(PartitionPrediction, HalfOpenBoundary) {
    const std::vector<std::vector<double>> preds{{31.999}, {32.0}};
    const auto groups = partition_prediction(views(preds), BinSpace(32));
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].key.indices, (std::vector<int>{0, 1}));
}

TEST(PartitionPrediction, IdenticalModelsGiveDiagonalKeys) {
    const ImageTensor img = testing::random_image(9, 16, 16, false);
    const std::vector<std::vector<double>> preds{img.data, img.data};
    for (const auto& g : partition_prediction(views(preds), BinSpace(32))) {
        EXPECT_EQ(g.key.indices[0], g.key.indices[1]);
    }
}

TEST(PartitionPrediction, SingleBinWidth) {
    const std::vector<std::vector<double>> preds{testing::random_image(1, 8, 8).data,
                                                 testing::random_image(2, 8, 8).data,
                                                 testing::random_image(3, 8, 8).data};
    const auto groups = partition_prediction(views(preds), BinSpace(256));
    ASSERT_EQ(groups.size(), 1u);
    EXPECT_EQ(groups[0].key.indices, (std::vector<int>{0, 0, 0}));
    EXPECT_EQ(groups[0].pixel_indices.size(), 8u * 8u * 3u);
}

TEST(PartitionPrediction, LengthMismatch) {
    const std::vector<std::vector<double>> preds{{1, 2, 3}, {1, 2}};
    EXPECT_THROW(partition_prediction(views(preds), BinSpace(32)), ContractError);
    EXPECT_THROW(partition_prediction({}, BinSpace(32)), ContractError);
}

TEST(PartitionPrediction, ClampsOvershoot) {
    const std::vector<std::vector<double>> preds{{-3.0, 260.0}};
    const auto groups = partition_prediction(views(preds), BinSpace(32));
    ASSERT_EQ(groups.size(), 2u);
    EXPECT_EQ(groups[0].key.indices, std::vector<int>{0});
    EXPECT_EQ(groups[1].key.indices, std::vector<int>{7});
}

ReferenceBatch random_batch(std::uint64_t seed, std::size_t models, std::size_t samples, std::size_t size) {
    ReferenceBatch batch(models);
    for (std::size_t n = 0; n < samples; ++n) {
        std::vector<ImageTensor> preds;
        for (std::size_t m = 0; m < models; ++m) preds.push_back(testing::random_image(seed * 100 + n * 10 + m, size, size, false));
        batch.append(testing::random_image(seed * 1000 + n, size, size), preds);
    }
    return batch;
}

// Disjoint, complete, ascending, each value inside its key's bins.
TEST(PartitionReference, PartitionProperties) {
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const std::size_t models = 1 + seed % 3;
        const BinSpace space(static_cast<int>(8 * seed + 8));
        const ReferenceBatch batch = random_batch(seed, models, 2, 24);
        const auto groups = partition_reference(batch, space);

        std::vector<int> seen(batch.size(), 0);
        std::size_t total = 0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            const auto& group = groups[g];
            if (g > 0) {
                EXPECT_LT(groups[g - 1].key, group.key);
            }
            ASSERT_GT(group.count(), 0u);
            EXPECT_EQ(group.pixel_indices.size(), group.count());
            EXPECT_TRUE(std::is_sorted(group.pixel_indices.begin(), group.pixel_indices.end()));
            for (std::size_t k = 0; k < group.count(); ++k) {
                const std::size_t i = group.pixel_indices[k];
                ++seen[i];
                EXPECT_EQ(group.gt_values[k], batch.gt()[i]);
                for (std::size_t m = 0; m < models; ++m) {
                    EXPECT_EQ(bin_index(group.pred_values[m][k], space), group.key.indices[m]);
                }
            }
            total += group.count();
        }
        EXPECT_EQ(total, batch.size());
        EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    }
}

TEST(PartitionReference, IndependentOfThreadCount) {
    const ReferenceBatch batch = random_batch(77, 3, 3, 64);
    const auto serial = partition_reference(batch, BinSpace(32), 1);
    for (int threads : {2, 4, 8}) {
        const auto parallel = partition_reference(batch, BinSpace(32), threads);
        ASSERT_EQ(parallel.size(), serial.size());
        for (std::size_t g = 0; g < serial.size(); ++g) {
            EXPECT_EQ(parallel[g].key, serial[g].key);
            EXPECT_EQ(parallel[g].pixel_indices, serial[g].pixel_indices);
            EXPECT_EQ(parallel[g].gt_values, serial[g].gt_values);
            EXPECT_EQ(parallel[g].pred_values, serial[g].pred_values);
        }
    }
}

// Halving b refines the partition: pixels split apart at width b stay apart
// at width b / 2.
TEST(PartitionPrediction, HalvingWidthRefines) {
    const std::vector<std::vector<double>> preds{testing::random_image(5, 20, 20, false).data,
                                                 testing::random_image(6, 20, 20, false).data};
    for (int b : {128, 64, 32, 16, 8}) {
        const auto coarse = partition_prediction(views(preds), BinSpace(b));
        const auto fine = partition_prediction(views(preds), BinSpace(b / 2));
        std::vector<std::size_t> coarse_of(preds[0].size());
        for (std::size_t g = 0; g < coarse.size(); ++g)
            for (std::size_t i : coarse[g].pixel_indices) coarse_of[i] = g;
        for (const auto& g : fine) {
            std::set<std::size_t> parents;
            for (std::size_t i : g.pixel_indices) parents.insert(coarse_of[i]);
            EXPECT_EQ(parents.size(), 1u) << "b=" << b;
        }
    }
}

}  // namespace
}  // namespace rangefuse
