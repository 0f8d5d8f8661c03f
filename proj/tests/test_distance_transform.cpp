#include <gtest/gtest.h>

#include <cmath>

#include "lnrel/distance_transform.h"
#include "support/oracles.h"

using namespace lnrel;

TEST(Edt, LineOfThree) {
  BinaryMask mask({1, 1, 3}, {1, 1, 1});
  mask.at(0, 0, 1) = 1;
  const DistanceMap d = euclidean_distance_transform(mask);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(d.at(0, 0, 2), 1.0);
}

TEST(Edt, AllForegroundIsZero) {
  BinaryMask mask({3, 4, 5}, {1, 2, 3}, 1);
  for (double v : euclidean_distance_transform(mask).values) EXPECT_EQ(v, 0.0);
}

TEST(Edt, EmptyMaskRejected) {
  EXPECT_THROW(euclidean_distance_transform(BinaryMask({2, 2, 2}, {1, 1, 1})), EmptyMaskError);
}

TEST(Edt, AnisotropicSpacing) {
  BinaryMask mask({3, 3, 3}, {2.0, 1.0, 0.5});
  mask.at(0, 0, 0) = 1;
  const DistanceMap d = euclidean_distance_transform(mask);
  EXPECT_NEAR(d.at(2, 2, 2), std::sqrt(16.0 + 4.0 + 1.0), 1e-12);
}

TEST(Edt, MatchesBruteForceOnRandomMasks) {
  Rng rng(42);
  std::uniform_real_distribution<double> spacing(0.3, 3.0), density(0.01, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const Vec3 sp{spacing(rng), spacing(rng), spacing(rng)};
    const BinaryMask mask = oracle::random_mask({9, 7, 8}, sp, density(rng), rng);
    const DistanceMap fast = euclidean_distance_transform(mask);
    const DistanceMap slow = oracle::brute_force_edt(mask);
    for (std::size_t i = 0; i < fast.values.size(); ++i) ASSERT_NEAR(fast.values[i], slow.values[i], 1e-9);
  }
}

TEST(Edt, TranslationEquivariance) {
  BinaryMask a({10, 10, 10}, {1, 1, 1}), b({10, 10, 10}, {1, 1, 1});
  a.at(3, 3, 3) = a.at(4, 5, 3) = 1;
  b.at(5, 4, 6) = b.at(6, 6, 6) = 1;  // shifted by (2, 1, 3)
  const DistanceMap da = euclidean_distance_transform(a), db = euclidean_distance_transform(b);
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 9; ++y)
      for (int x = 0; x < 7; ++x) EXPECT_DOUBLE_EQ(da.at(z, y, x), db.at(z + 2, y + 1, x + 3));
}

TEST(Edt, AddingForegroundNeverIncreasesDistance) {
  Rng rng(3);
  BinaryMask mask = oracle::random_mask({8, 8, 8}, {1.0, 1.5, 0.7}, 0.05, rng);
  const DistanceMap before = euclidean_distance_transform(mask);
  mask.at(1, 6, 2) = 1;
  const DistanceMap after = euclidean_distance_transform(mask);
  for (std::size_t i = 0; i < before.values.size(); ++i) EXPECT_LE(after.values[i], before.values[i]);
}

TEST(DistanceToMask, NearestVoxelLookup) {
  BinaryMask mask({1, 1, 5}, {1, 1, 1});
  mask.at(0, 0, 0) = 1;
  const DistanceMap d = euclidean_distance_transform(mask);
  EXPECT_DOUBLE_EQ(distance_to_mask({0, 0, 0}, d), 0.0);
  EXPECT_DOUBLE_EQ(distance_to_mask({0, 0, 1.2}, d), 1.0);
  EXPECT_THROW(distance_to_mask({0, 0, 7.0}, d), std::out_of_range);
}
