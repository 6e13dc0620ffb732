#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "mpsim/errors.hpp"
#include "mpsim/ids.hpp"

namespace mpsim {

enum class LinkKind { entry, internal, exit };
enum class Turn { left, through, right };
/// Direction of travel along a link.
enum class Heading { north, east, south, west };

std::string_view to_string(LinkKind kind);
std::string_view to_string(Turn turn);
std::string_view to_string(Heading heading);
LinkKind link_kind_from_string(std::string_view s);
Turn turn_from_string(std::string_view s);
Heading heading_from_string(std::string_view s);

/// True for headings that belong to the north-south arterial.
constexpr bool is_north_south(Heading h) { return h == Heading::north || h == Heading::south; }

struct Link {
    LinkId id;
    LinkKind kind = LinkKind::internal;
    double length = 0.0;           // m
    int lanes = 1;
    double free_flow_speed = 0.0;  // m/s
    int storage_capacity = 0;      // vehicles, lanes * floor(length / jam_spacing)
    Heading heading = Heading::north;
    IntersectionId upstream_node;    // invalid for entry links
    IntersectionId downstream_node;  // invalid for exit links

    std::vector<MovementId> outgoing;  // ascending
    std::vector<MovementId> incoming;  // ascending

    [[nodiscard]] int lane_capacity() const { return lanes > 0 ? storage_capacity / lanes : 0; }
};

struct Movement {
    MovementId id;
    LinkId upstream;
    LinkId downstream;
    Turn turn = Turn::through;
    double turning_ratio = 0.0;         // H(l,m)
    double saturation_flow_mean = 0.0;  // veh/s per movement, c(l,m)
    double saturation_flow_max = 0.0;   // veh/s
    std::vector<int> lanes;             // lanes of the upstream link that serve this movement

    IntersectionId intersection;  // = downstream node of the upstream link
    PhaseIndex phase = -1;
};

struct Phase {
    PhaseIndex id = 0;
    std::vector<MovementId> served_movements;  // ascending
};

struct Intersection {
    IntersectionId id;
    int row = 0;
    int col = 0;
    std::vector<Phase> phases;
    std::vector<LinkId> incoming_links;  // ascending
};

struct TurningRatios {
    double left = 0.2;
    double through = 0.5;
    double right = 0.3;
};

struct GridParams {
    int rows = 4;
    int cols = 4;
    double link_length = 300.0;        // m
    int lanes_per_link = 2;
    TurningRatios turning_ratios{};
    double free_flow_speed = 20.0;     // m/s
    double saturation_flow = 1800.0;   // veh/h/lane
    double jam_spacing = 7.5;          // m, vehicle length + standstill gap
};

/// Immutable signalized road network.
///
/// Ids are dense indices into `links`, `movements` and `intersections`.
/// Per-lane service lists are derived data, rebuilt by `finalize()`.
class Network {
public:
    Network() = default;

    std::vector<Link> links;
    std::vector<Movement> movements;
    std::vector<Intersection> intersections;
    double jam_spacing = 7.5;

    [[nodiscard]] const Link& link(LinkId id) const { return links.at(id.index()); }
    [[nodiscard]] const Movement& movement(MovementId id) const { return movements.at(id.index()); }
    [[nodiscard]] const Intersection& intersection(IntersectionId id) const {
        return intersections.at(id.index());
    }
    [[nodiscard]] bool has_movement(MovementId id) const {
        return id.valid() && id.index() < movements.size();
    }

    /// Movements served by lane `lane` of link `l`, ascending.
    [[nodiscard]] const std::vector<MovementId>& lane_movements(LinkId l, int lane) const {
        return lane_movements_.at(l.index()).at(static_cast<std::size_t>(lane));
    }
    /// Saturation flow of a single lane in veh/s.
    [[nodiscard]] double lane_saturation_flow(LinkId l, int lane) const {
        return lane_saturation_.at(l.index()).at(static_cast<std::size_t>(lane));
    }

    [[nodiscard]] std::size_t count(LinkKind kind) const;
    [[nodiscard]] std::vector<LinkId> links_of_kind(LinkKind kind) const;

    /// Rebuilds adjacency lists and lane tables from links/movements/phases.
    void finalize();

private:
    std::vector<std::vector<std::vector<MovementId>>> lane_movements_;
    std::vector<std::vector<double>> lane_saturation_;
};

/// Builds a rows x cols grid with bidirectional arterials, boundary entry and
/// exit links, and four protected phases per intersection:
/// 0 NS left, 1 NS through+right, 2 EW left, 3 EW through+right.
/// Throws ConfigError for degenerate sizes, ValidationError if the result
/// violates network invariants (e.g. turning ratios not summing to one).
Network build_grid(const GridParams& params);

/// Empty iff every structural invariant holds.
std::vector<Violation> validate(const Network& network);

nlohmann::json to_json(const Network& network);
Network network_from_json(const nlohmann::json& j);

/// Heading after executing turn `t` from heading `h` (right-hand traffic).
Heading turned(Heading h, Turn t);

}  // namespace mpsim
