#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <limits>

namespace mpsim {

/// Index-backed identifier; the tag keeps link, movement and intersection ids
/// from being mixed up at call sites.
template <typename Tag>
struct StrongId {
    using value_type = std::int32_t;
    static constexpr value_type kInvalid = -1;

    value_type value = kInvalid;

    constexpr StrongId() = default;
    constexpr explicit StrongId(value_type v) : value(v) {}

    [[nodiscard]] constexpr bool valid() const { return value >= 0; }
    [[nodiscard]] constexpr std::size_t index() const { return static_cast<std::size_t>(value); }

    friend constexpr auto operator<=>(StrongId, StrongId) = default;
};

struct LinkTag {};
struct MovementTag {};
struct IntersectionTag {};

using LinkId = StrongId<LinkTag>;
using MovementId = StrongId<MovementTag>;
using IntersectionId = StrongId<IntersectionTag>;

using PhaseIndex = std::int32_t;
using VehicleId = std::int64_t;

}  // namespace mpsim

template <typename Tag>
struct std::hash<mpsim::StrongId<Tag>> {
    std::size_t operator()(mpsim::StrongId<Tag> id) const noexcept {
        return std::hash<std::int32_t>{}(id.value);
    }
};
