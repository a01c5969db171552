#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>

namespace kickns {

/// Philox4x32-10 block function (Salmon et al. counter-based generator).
struct Philox4x32 {
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter apply(Counter ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Stable 64-bit stream identifier from a list of indices.
inline std::uint64_t stream_id(std::initializer_list<std::uint64_t> parts) noexcept {
    std::uint64_t h = 0x6A09E667F3BCC909ull;
    for (auto p : parts) h = splitmix64(h ^ splitmix64(p));
    return h;
}

/// A counter-based random stream: (seed, stream id) select the sequence and
/// the block counter walks it. Two streams with different ids never share
/// state, so concurrent samplers need no coordination.
class Stream {
public:
    Stream(std::uint64_t seed, std::uint64_t id) noexcept : seed_(seed), id_(id) {}

    /// Stream addressed by (seed, parts...). Same arguments, same sequence.
    static Stream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> parts) noexcept {
        return Stream(seed, stream_id(parts));
    }

    std::uint64_t next_u64() noexcept {
        if (cached_ == 0) refill();
        return buffer_[2 - cached_--];
    }

    /// Uniform on the open interval (0, 1) with 53 random bits.
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t id() const noexcept { return id_; }
    std::uint64_t blocks_used() const noexcept { return block_; }

private:
    void refill() noexcept {
        const Philox4x32::Counter ctr = {static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                         static_cast<std::uint32_t>(id_), static_cast<std::uint32_t>(id_ >> 32)};
        const Philox4x32::Key key = {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)};
        const auto out = Philox4x32::apply(ctr, key);
        buffer_[0] = (std::uint64_t{out[0]} << 32) | out[1];
        buffer_[1] = (std::uint64_t{out[2]} << 32) | out[3];
        ++block_;
        cached_ = 2;
    }

    std::uint64_t seed_;
    std::uint64_t id_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int cached_ = 0;
};

/// Stream-id tags, one per consumer, so different diagnostics never reuse
/// the same random numbers by accident.
namespace stream_tag {
inline constexpr std::uint64_t chain_kick = 1;
inline constexpr std::uint64_t dissipation = 2;
inline constexpr std::uint64_t attainability = 3;
inline constexpr std::uint64_t irreducibility = 4;
inline constexpr std::uint64_t coupling = 5;
inline constexpr std::uint64_t fk_propagate = 6;
inline constexpr std::uint64_t fk_resample = 7;
inline constexpr std::uint64_t kick_ball = 8;
inline constexpr std::uint64_t basis_start = 9;
inline constexpr std::uint64_t mixing = 10;
inline constexpr std::uint64_t misc = 11;
}  // namespace stream_tag

}  // namespace kickns
