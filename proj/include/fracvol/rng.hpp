#pragma once

// Counter-based random streams (Philox4x32-10) so that every path of an
// ensemble owns an independent, reproducible stream regardless of how the
// work is sharded across threads.

#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace fracvol {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Satisfies
/// UniformRandomBitGenerator; the counter is laid out as
/// {block, lane, stream_lo, stream_hi} and the key holds the seed.
class Philox4x32 {
public:
    using result_type = std::uint32_t;
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    Philox4x32(std::uint64_t seed, std::uint64_t stream, std::uint32_t lane = 0)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          counter_{0u, lane, static_cast<std::uint32_t>(stream),
                   static_cast<std::uint32_t>(stream >> 32)} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (used_ == 4) {
            buffer_ = block(counter_, key_);
            ++counter_[0];
            used_ = 0;
        }
        return buffer_[used_++];
    }

    /// The raw bijection; exposed for known-answer tests.
    static Counter block(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kMul0 = 0xD2511F53u;
    static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
    static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

    Key key_;
    Counter counter_;
    Counter buffer_{};
    int used_ = 4;
};

/// Identifies one reproducible random stream. Distinct (seed, stream_id)
/// pairs give independent streams; `lane` separates the drivers of a path
/// (price noise, volatility noise) inside the same stream id.
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    Philox4x32 engine(std::uint32_t lane = 0) const { return {seed, stream_id, lane}; }
};

/// Fills `out` with iid standard normals drawn from `engine`.
template <class Engine>
void fill_normal(Engine& engine, std::span<double> out) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& x : out) x = normal(engine);
}

}  // namespace fracvol
