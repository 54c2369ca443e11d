#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fracvol/numerics.hpp"
#include "fracvol/rng.hpp"

using namespace fracvol;

// Known-answer vectors published with the Random123 reference implementation.
TEST(Philox, KnownAnswerVectors) {
    EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}),
              (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, SamePairIsBitIdentical) {
    const RngStream s{42, 7};
    auto a = s.engine();
    auto b = s.engine();
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RngStream, DistinctStreamsAndLanesDiffer) {
    auto a = RngStream{42, 7}.engine();
    auto b = RngStream{42, 8}.engine();
    auto c = RngStream{42, 7}.engine(1);
    auto d = RngStream{43, 7}.engine();
    int same_ab = 0, same_ac = 0, same_ad = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        same_ab += x == b();
        same_ac += x == c();
        same_ad += x == d();
    }
    EXPECT_LT(same_ab, 3);
    EXPECT_LT(same_ac, 3);
    EXPECT_LT(same_ad, 3);
}

TEST(RngStream, NormalsAreStandardAndStreamsUncorrelated) {
    const std::size_t n = 200000;
    std::vector<double> x(n), y(n);
    auto ex = RngStream{1, 0}.engine();
    auto ey = RngStream{1, 1}.engine();
    fill_normal(ex, x);
    fill_normal(ey, y);
    const auto mx = mean_estimate(x);
    EXPECT_LT(std::abs(mx.mean), 4 * mx.stderr);
    std::vector<double> sq(n), cross(n);
    for (std::size_t i = 0; i < n; ++i) {
        sq[i] = x[i] * x[i];
        cross[i] = x[i] * y[i];
    }
    const auto v = mean_estimate(sq);
    EXPECT_LT(std::abs(v.mean - 1.0), 4 * v.stderr);
    const auto c = mean_estimate(cross);
    EXPECT_LT(std::abs(c.mean), 4 * c.stderr);
}
