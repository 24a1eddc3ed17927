#pragma once

#include <bit>
#include <cstdint>

namespace popvote {

/// Index of a single choice. Choices are 0-based in code and in all CLI
/// output; the protocol supports at most kMaxChoices of them so a value
/// set fits in one machine word.
using Choice = std::uint8_t;

inline constexpr int kMaxChoices = 64;

/// A subset of the K choices, stored as a bitmask (bit c <=> choice c).
class ChoiceSet {
public:
    constexpr ChoiceSet() = default;

    static constexpr ChoiceSet single(Choice c) noexcept
    {
        return ChoiceSet(std::uint64_t{1} << c);
    }

    static constexpr ChoiceSet from_bits(std::uint64_t bits) noexcept
    {
        return ChoiceSet(bits);
    }

    constexpr std::uint64_t bits() const noexcept { return bits_; }
    constexpr bool empty() const noexcept { return bits_ == 0; }
    constexpr int cardinality() const noexcept { return std::popcount(bits_); }

    constexpr bool contains(Choice c) const noexcept
    {
        return (bits_ >> c) & 1u;
    }

    constexpr bool subset_of(ChoiceSet other) const noexcept
    {
        return (bits_ & ~other.bits_) == 0;
    }

    /// The only member. Meaningful only when cardinality() == 1.
    constexpr Choice sole_member() const noexcept
    {
        return static_cast<Choice>(std::countr_zero(bits_));
    }

    friend constexpr ChoiceSet operator|(ChoiceSet a, ChoiceSet b) noexcept
    {
        return ChoiceSet(a.bits_ | b.bits_);
    }

    friend constexpr ChoiceSet operator&(ChoiceSet a, ChoiceSet b) noexcept
    {
        return ChoiceSet(a.bits_ & b.bits_);
    }

    friend constexpr bool operator==(ChoiceSet a, ChoiceSet b) noexcept = default;

private:
    constexpr explicit ChoiceSet(std::uint64_t bits) noexcept : bits_(bits) {}

    std::uint64_t bits_ = 0;
};

} // namespace popvote
