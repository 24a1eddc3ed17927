#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace popvote {

/// One round of the splitmix64 mixer. Advances `state` and returns the
/// mixed output.
constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept
{
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Child-seed derivation used everywhere seeds fan out (sweep cell ->
/// replica -> run). The rule is fixed so experiments are reproducible:
///
///   state = base XOR 0x9e3779b97f4a7c15 * (stream + 1)
///   child = splitmix64(state)
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) noexcept
{
    std::uint64_t state = base ^ (0x9e3779b97f4a7c15ULL * (stream + 1));
    return splitmix64(state);
}

/// Deterministic random stream. Wraps mt19937_64 and exposes only
/// fixed-draw-count primitives so a run's draw sequence is a pure
/// function of the seed:
///
///   next()       consumes exactly 1 engine draw
///   bounded(n)   consumes exactly 1 engine draw (multiply-shift
///                reduction; bias below n / 2^64, negligible for the
///                small bounds used here)
///   uniform01()  consumes exactly 1 engine draw (53-bit mantissa)
///
/// draws() counts engine draws so tests can pin the documented counts.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next()
    {
        ++draws_;
        return engine_();
    }

    /// Uniform integer in [0, n). Pre: n > 0.
    std::uint64_t bounded(std::uint64_t n)
    {
        const auto wide = static_cast<unsigned __int128>(next());
        return static_cast<std::uint64_t>((wide * n) >> 64);
    }

    /// Uniform double in [0, 1).
    double uniform01()
    {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    std::uint64_t draws() const noexcept { return draws_; }

private:
    std::mt19937_64 engine_;
    std::uint64_t draws_ = 0;
};

/// Uniformly random permutation of {0, ..., count-1} by Fisher-Yates,
/// consuming exactly count-1 bounded draws (zero when count <= 1).
inline std::vector<std::uint32_t> random_permutation(std::uint32_t count, Rng& rng)
{
    std::vector<std::uint32_t> perm(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        perm[i] = i;
    }
    for (std::uint32_t i = count; i > 1; --i) {
        const auto j = static_cast<std::uint32_t>(rng.bounded(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

/// In-place Fisher-Yates shuffle; exactly size-1 bounded draws.
template <typename T>
void shuffle_values(std::vector<T>& values, Rng& rng)
{
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.bounded(i));
        std::swap(values[i - 1], values[j]);
    }
}

} // namespace popvote
