#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace snfield {

// Philox4x32-10 block cipher (Salmon et al., "Parallel random numbers: as
// easy as 1, 2, 3"). Counter-based: draw k of stream s under seed m is a
// pure function of (m, s, k), so parallel consumers never share state.
namespace philox {

inline constexpr std::uint32_t kMul0 = 0xD2511F53u;
inline constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
inline constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
inline constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline std::array<std::uint32_t, 4> block(std::uint64_t key, std::uint64_t ctr_hi,
                                          std::uint64_t ctr_lo) {
    std::uint32_t k0 = static_cast<std::uint32_t>(key);
    std::uint32_t k1 = static_cast<std::uint32_t>(key >> 32);
    std::uint32_t c0 = static_cast<std::uint32_t>(ctr_lo);
    std::uint32_t c1 = static_cast<std::uint32_t>(ctr_lo >> 32);
    std::uint32_t c2 = static_cast<std::uint32_t>(ctr_hi);
    std::uint32_t c3 = static_cast<std::uint32_t>(ctr_hi >> 32);
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c0;
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c2;
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        c0 = hi1 ^ c1 ^ k0;
        c1 = lo1;
        c2 = hi0 ^ c3 ^ k1;
        c3 = lo0;
        k0 += kWeyl0;
        k1 += kWeyl1;
    }
    return {c0, c1, c2, c3};
}

} // namespace philox

// Logical sub-streams of one master seed. A stream id is (trial << 8) | channel,
// so every (trial, purpose) pair draws from its own independent sequence.
enum class RngChannel : std::uint64_t {
    cloud = 0,     // point count and positions
    marks = 1,     // i.i.d. marks
    aux = 2,       // auxiliary uniforms for the intensity coupling
    resample = 3,  // coordinate resampling (influences)
    line = 4,      // revealment algorithm's random line
    general = 5,
};

inline std::uint64_t stream_id(std::uint64_t trial, RngChannel channel) {
    return (trial << 8) | static_cast<std::uint64_t>(channel);
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(seed), stream_(stream), block_(0), pos_(4) {}

    CounterRng(std::uint64_t seed, std::uint64_t trial, RngChannel channel)
        : CounterRng(seed, stream_id(trial, channel)) {}

    // Jump to an absolute 32-bit-draw index; enables per-site random access.
    void seek(std::uint64_t draw_index) {
        block_ = draw_index / 4;
        pos_ = 4;
        have_spare_ = false; // drop any cached Box-Muller pair
        refill();
        pos_ = static_cast<int>(draw_index % 4);
    }

    std::uint32_t next_u32() {
        if (pos_ >= 4) refill();
        return buf_[pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return (hi << 32) | lo;
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1]; safe under log().
    double uniform_pos() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    double exponential() { return -std::log(uniform_pos()); }

    // Box-Muller; the paired draw is cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform01();
        const double rad = std::sqrt(-2.0 * std::log(u1));
        const double ang = 6.283185307179586476925287 * u2;
        spare_ = rad * std::sin(ang);
        have_spare_ = true;
        return rad * std::cos(ang);
    }

    // Exact Poisson draw; mean is split into chunks so exp(-chunk) never
    // underflows (Knuth's product method per chunk).
    long poisson(double mean) {
        long total = 0;
        while (mean > 0) {
            const double chunk = mean > 256.0 ? 256.0 : mean;
            const double limit = std::exp(-chunk);
            double prod = 1.0;
            long k = -1;
            do {
                prod *= uniform_pos();
                ++k;
            } while (prod > limit);
            total += k;
            mean -= chunk;
        }
        return total;
    }

private:
    void refill() {
        buf_ = philox::block(key_, stream_, block_);
        ++block_;
        pos_ = 0;
    }

    std::uint64_t key_;
    std::uint64_t stream_;
    std::uint64_t block_;
    std::array<std::uint32_t, 4> buf_{};
    int pos_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// FNV-1a, used for config digests and artifact checksums.
inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t hash = 0xcbf29ce484222325ull) {
    const unsigned char* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ull;
    }
    return hash;
}

} // namespace snfield
