#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <ostream>

namespace sfv {

/// Tagged integer identifier. Distinct tags do not convert into each other.
template <class Tag>
struct Id {
    std::uint32_t value{};

    constexpr Id() = default;
    constexpr explicit Id(std::uint32_t v) : value(v) {}

    constexpr auto operator<=>(const Id&) const = default;
};

template <class Tag>
std::ostream& operator<<(std::ostream& os, Id<Tag> id) {
    return os << id.value;
}

using PrecinctId = Id<struct PrecinctTag>;
using ClusterId = Id<struct ClusterTag>;
using SuperId = Id<struct SuperTag>;
using UltraId = Id<struct UltraTag>;
using MachineId = Id<struct MachineTag>;
using VoterId = Id<struct VoterTag>;
using SessionId = Id<struct SessionTag>;

/// Candidates are dense indices 0..n-1, so they stay a plain integer.
using CandidateId = std::uint32_t;

}  // namespace sfv

template <class Tag>
struct std::hash<sfv::Id<Tag>> {
    std::size_t operator()(sfv::Id<Tag> id) const noexcept { return std::hash<std::uint32_t>{}(id.value); }
};
