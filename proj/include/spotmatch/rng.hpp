#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace spotmatch {

namespace detail {
__extension__ using uint128 = unsigned __int128;
}  // namespace detail

/// Philox4x64-10 counter-based generator.
///
/// The key is (seed, 0) and the 256-bit counter is (block, stream, substream, 0),
/// so every (seed, stream, substream) triple names an independent sequence
/// that can be created anywhere without coordination. Satisfies
/// UniformRandomBitGenerator.
class Philox4x64 {
public:
    using result_type = std::uint64_t;
    using Block = std::array<std::uint64_t, 4>;
    using Key = std::array<std::uint64_t, 2>;

    Philox4x64(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
        : key_{seed, 0}, counter_{0, stream, substream, 0} {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        if (pos_ == 4) {
            buffer_ = encrypt(counter_, key_);
            ++counter_[0];
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Ten-round bijection of the counter under the key.
    static constexpr Block encrypt(Block ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeyl0;
                key[1] += kWeyl1;
            }
            const detail::uint128 p0 = static_cast<detail::uint128>(kMul0) * ctr[0];
            const detail::uint128 p1 = static_cast<detail::uint128>(kMul1) * ctr[2];
            const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
            const auto lo0 = static_cast<std::uint64_t>(p0);
            const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
            const auto lo1 = static_cast<std::uint64_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }

private:
    static constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
    static constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
    static constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
    static constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;

    Key key_;
    Block counter_;
    Block buffer_{};
    int pos_ = 4;
};

}  // namespace spotmatch
