#pragma once

#include <cstdint>

namespace slowfast {

// Purpose-separated random streams. Each purpose draws from its own counter
// space, so changing how much randomness one purpose consumes never shifts
// another.
enum class Stream : std::uint64_t {
    data = 1,
    init = 2,
    train_noise = 3,
    train_time = 4,
    eval_noise = 5,
    eval_reference = 6,
    eval_projection = 7,
    subsample = 8,
};

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Counter-based generator: the value at position `counter` of stream
// (seed, stream, substream) is a pure function of those four integers.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0) noexcept
        : key_(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(stream)) ^ mix64(substream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t bits_at(std::uint64_t counter) const noexcept { return mix64(key_ ^ mix64(counter)); }

    // Uniform in the open interval (0, 1).
    double uniform_at(std::uint64_t counter) const noexcept {
        return (static_cast<double>(bits_at(counter) >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal from two consecutive counters (Box-Muller, cosine branch).
    double normal_at(std::uint64_t counter) const noexcept;

    // Sequential interface over the same counter space.
    std::uint64_t next_bits() noexcept { return bits_at(position_++); }
    double uniform() noexcept { return uniform_at(position_++); }
    double normal() noexcept {
        const double v = normal_at(position_);
        position_ += 2;
        return v;
    }
    std::uint64_t uniform_index(std::uint64_t n) noexcept { return next_bits() % n; }

    std::uint64_t position() const noexcept { return position_; }
    void seek(std::uint64_t position) noexcept { position_ = position; }

private:
    std::uint64_t key_;
    std::uint64_t position_ = 0;
};

} // namespace slowfast
