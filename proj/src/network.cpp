#include "mpsim/network.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mpsim {

namespace {

constexpr std::array<Heading, 4> kHeadings{Heading::north, Heading::east, Heading::south, Heading::west};
constexpr std::array<Turn, 3> kTurns{Turn::left, Turn::through, Turn::right};

struct Offset {
    int dr;
    int dc;
};

Offset step_of(Heading h) {
    switch (h) {
        case Heading::north: return {-1, 0};
        case Heading::east: return {0, 1};
        case Heading::south: return {1, 0};
        case Heading::west: return {0, -1};
    }
    return {0, 0};
}

std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(12) << v;
    return os.str();
}

std::string link_name(LinkId id) { return "link " + std::to_string(id.value); }
std::string movement_name(MovementId id) { return "movement " + std::to_string(id.value); }

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error([&] {
          std::string msg = "network validation failed:";
          for (const auto& v : violations) msg += " [" + v.entity + ": " + v.rule + "]";
          return msg;
      }()),
      violations_(std::move(violations)) {}

std::string_view to_string(LinkKind kind) {
    switch (kind) {
        case LinkKind::entry: return "entry";
        case LinkKind::internal: return "internal";
        case LinkKind::exit: return "exit";
    }
    return "?";
}

std::string_view to_string(Turn turn) {
    switch (turn) {
        case Turn::left: return "left";
        case Turn::through: return "through";
        case Turn::right: return "right";
    }
    return "?";
}

std::string_view to_string(Heading heading) {
    switch (heading) {
        case Heading::north: return "north";
        case Heading::east: return "east";
        case Heading::south: return "south";
        case Heading::west: return "west";
    }
    return "?";
}

LinkKind link_kind_from_string(std::string_view s) {
    if (s == "entry") return LinkKind::entry;
    if (s == "internal") return LinkKind::internal;
    if (s == "exit") return LinkKind::exit;
    throw ConfigError("unknown link kind '" + std::string(s) + "'");
}

Turn turn_from_string(std::string_view s) {
    if (s == "left") return Turn::left;
    if (s == "through") return Turn::through;
    if (s == "right") return Turn::right;
    throw ConfigError("unknown turn '" + std::string(s) + "'");
}

Heading heading_from_string(std::string_view s) {
    for (Heading h : kHeadings)
        if (to_string(h) == s) return h;
    throw ConfigError("unknown heading '" + std::string(s) + "'");
}

Heading turned(Heading h, Turn t) {
    const int i = static_cast<int>(h);
    switch (t) {
        case Turn::through: return h;
        case Turn::right: return static_cast<Heading>((i + 1) % 4);
        case Turn::left: return static_cast<Heading>((i + 3) % 4);
    }
    return h;
}

std::size_t Network::count(LinkKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(links.begin(), links.end(), [kind](const Link& l) { return l.kind == kind; }));
}

std::vector<LinkId> Network::links_of_kind(LinkKind kind) const {
    std::vector<LinkId> out;
    for (const auto& l : links)
        if (l.kind == kind) out.push_back(l.id);
    return out;
}

void Network::finalize() {
    for (auto& l : links) {
        l.outgoing.clear();
        l.incoming.clear();
    }
    for (auto& node : intersections) node.incoming_links.clear();

    for (const auto& m : movements) {
        if (m.upstream.valid() && m.upstream.index() < links.size())
            links[m.upstream.index()].outgoing.push_back(m.id);
        if (m.downstream.valid() && m.downstream.index() < links.size())
            links[m.downstream.index()].incoming.push_back(m.id);
    }
    for (const auto& l : links) {
        if (l.downstream_node.valid() && l.downstream_node.index() < intersections.size())
            intersections[l.downstream_node.index()].incoming_links.push_back(l.id);
    }
    for (auto& node : intersections) {
        for (auto& phase : node.phases) {
            std::sort(phase.served_movements.begin(), phase.served_movements.end());
            for (MovementId mid : phase.served_movements)
                if (has_movement(mid)) movements[mid.index()].phase = phase.id;
        }
    }

    lane_movements_.assign(links.size(), {});
    lane_saturation_.assign(links.size(), {});
    for (const auto& l : links) {
        const auto lanes = static_cast<std::size_t>(std::max(l.lanes, 0));
        lane_movements_[l.id.index()].assign(lanes, {});
        lane_saturation_[l.id.index()].assign(lanes, 0.0);
    }
    for (const auto& m : movements) {
        if (!m.upstream.valid() || m.upstream.index() >= links.size()) continue;
        auto& lane_lists = lane_movements_[m.upstream.index()];
        auto& lane_sat = lane_saturation_[m.upstream.index()];
        const double per_lane =
            m.lanes.empty() ? 0.0 : m.saturation_flow_mean / static_cast<double>(m.lanes.size());
        for (int lane : m.lanes) {
            if (lane < 0 || static_cast<std::size_t>(lane) >= lane_lists.size()) continue;
            lane_lists[static_cast<std::size_t>(lane)].push_back(m.id);
            lane_sat[static_cast<std::size_t>(lane)] = std::max(lane_sat[static_cast<std::size_t>(lane)], per_lane);
        }
    }
}

Network build_grid(const GridParams& p) {
    if (p.rows < 1 || p.cols < 1)
        throw ConfigError("grid needs at least one row and one column (got " + std::to_string(p.rows) +
                          "x" + std::to_string(p.cols) + ")");
    if (p.lanes_per_link < 1) throw ConfigError("lanes_per_link must be >= 1");
    if (!(p.link_length > 0.0)) throw ConfigError("link_length must be > 0");
    if (!(p.free_flow_speed > 0.0)) throw ConfigError("free_flow_speed must be > 0");
    if (!(p.saturation_flow > 0.0)) throw ConfigError("saturation_flow must be > 0");
    if (!(p.jam_spacing > 0.0)) throw ConfigError("jam_spacing must be > 0");

    Network net;
    net.jam_spacing = p.jam_spacing;

    auto node_at = [&](int r, int c) -> IntersectionId {
        if (r < 0 || c < 0 || r >= p.rows || c >= p.cols) return IntersectionId{};
        return IntersectionId{r * p.cols + c};
    };

    for (int r = 0; r < p.rows; ++r)
        for (int c = 0; c < p.cols; ++c) {
            Intersection node;
            node.id = node_at(r, c);
            node.row = r;
            node.col = c;
            net.intersections.push_back(node);
        }

    const int lane_storage = static_cast<int>(std::floor(p.link_length / p.jam_spacing));
    auto add_link = [&](LinkKind kind, Heading h, IntersectionId up, IntersectionId down) {
        Link l;
        l.id = LinkId{static_cast<int>(net.links.size())};
        l.kind = kind;
        l.length = p.link_length;
        l.lanes = p.lanes_per_link;
        l.free_flow_speed = p.free_flow_speed;
        l.storage_capacity = lane_storage * p.lanes_per_link;
        l.heading = h;
        l.upstream_node = up;
        l.downstream_node = down;
        net.links.push_back(l);
        return l.id;
    };

    // incoming[node][heading] and outgoing[node][heading]
    const auto n_nodes = net.intersections.size();
    std::vector<std::array<LinkId, 4>> incoming(n_nodes), outgoing(n_nodes);

    for (const auto& node : net.intersections) {
        for (Heading h : kHeadings) {
            const auto [dr, dc] = step_of(h);
            const IntersectionId up = node_at(node.row - dr, node.col - dc);
            const LinkId id = add_link(up.valid() ? LinkKind::internal : LinkKind::entry, h, up, node.id);
            incoming[node.id.index()][static_cast<std::size_t>(h)] = id;
            if (up.valid()) outgoing[up.index()][static_cast<std::size_t>(h)] = id;
        }
    }
    for (const auto& node : net.intersections) {
        for (Heading h : kHeadings) {
            const auto [dr, dc] = step_of(h);
            if (!node_at(node.row + dr, node.col + dc).valid())
                outgoing[node.id.index()][static_cast<std::size_t>(h)] =
                    add_link(LinkKind::exit, h, node.id, IntersectionId{});
        }
    }

    const double lane_sat = p.saturation_flow / 3600.0;
    const int lanes = p.lanes_per_link;
    auto lanes_for = [&](Turn t) {
        std::vector<int> v;
        if (lanes == 1) {
            v.push_back(0);
        } else if (t == Turn::left) {
            v.push_back(0);
        } else {
            for (int k = 1; k < lanes; ++k) v.push_back(k);
        }
        return v;
    };
    auto ratio_for = [&](Turn t) {
        switch (t) {
            case Turn::left: return p.turning_ratios.left;
            case Turn::through: return p.turning_ratios.through;
            case Turn::right: return p.turning_ratios.right;
        }
        return 0.0;
    };

    for (auto& node : net.intersections) {
        Phase ns_left{0, {}}, ns_tr{1, {}}, ew_left{2, {}}, ew_tr{3, {}};
        for (Heading h : kHeadings) {
            const LinkId from = incoming[node.id.index()][static_cast<std::size_t>(h)];
            for (Turn t : kTurns) {
                Movement m;
                m.id = MovementId{static_cast<int>(net.movements.size())};
                m.upstream = from;
                m.downstream = outgoing[node.id.index()][static_cast<std::size_t>(turned(h, t))];
                m.turn = t;
                m.turning_ratio = ratio_for(t);
                m.lanes = lanes_for(t);
                m.saturation_flow_mean = lane_sat * static_cast<double>(m.lanes.size());
                m.saturation_flow_max = m.saturation_flow_mean;
                m.intersection = node.id;
                net.movements.push_back(m);

                Phase& target = is_north_south(h) ? (t == Turn::left ? ns_left : ns_tr)
                                                  : (t == Turn::left ? ew_left : ew_tr);
                target.served_movements.push_back(m.id);
            }
        }
        node.phases = {ns_left, ns_tr, ew_left, ew_tr};
    }

    net.finalize();
    if (auto violations = validate(net); !violations.empty()) throw ValidationError(std::move(violations));
    return net;
}

std::vector<Violation> validate(const Network& net) {
    std::vector<Violation> out;
    auto flag = [&](std::string entity, std::string rule) { out.push_back({std::move(entity), std::move(rule)}); };

    const auto n_links = net.links.size();
    auto link_ok = [&](LinkId id) { return id.valid() && id.index() < n_links; };

    for (std::size_t i = 0; i < n_links; ++i) {
        const Link& l = net.links[i];
        const std::string name = link_name(l.id);
        if (l.id.value != static_cast<int>(i)) flag(name, "id does not match its index " + std::to_string(i));
        if (!(l.length > 0.0)) flag(name, "length must be > 0");
        if (l.lanes < 1) flag(name, "lanes must be >= 1");
        if (!(l.free_flow_speed > 0.0)) flag(name, "free_flow_speed must be > 0");
        if (l.storage_capacity < 1) flag(name, "storage_capacity must be >= 1");
        if (l.kind == LinkKind::exit && !l.outgoing.empty()) flag(name, "exit link has outgoing movements");
        if (l.kind == LinkKind::entry && !l.incoming.empty()) flag(name, "entry link has incoming movements");
        if (l.kind != LinkKind::exit && l.outgoing.empty()) flag(name, "non-exit link has no outgoing movements");

        if (l.kind != LinkKind::exit && !l.outgoing.empty()) {
            double sum = 0.0;
            for (MovementId mid : l.outgoing) sum += net.movements[mid.index()].turning_ratio;
            if (std::abs(sum - 1.0) > 1e-9) flag(name, "ratios sum " + format_number(sum) + " ≠ 1");
        }
    }

    for (std::size_t i = 0; i < net.movements.size(); ++i) {
        const Movement& m = net.movements[i];
        const std::string name = movement_name(m.id);
        if (m.id.value != static_cast<int>(i)) flag(name, "id does not match its index " + std::to_string(i));
        if (!link_ok(m.upstream) || !link_ok(m.downstream)) {
            flag(name, "references an unknown link");
            continue;
        }
        if (m.turning_ratio < 0.0 || m.turning_ratio > 1.0) flag(name, "turning ratio outside [0,1]");
        if (!(m.saturation_flow_mean > 0.0) || m.saturation_flow_mean > m.saturation_flow_max)
            flag(name, "saturation flow must satisfy 0 < mean <= max");
        const Link& up = net.links[m.upstream.index()];
        if (up.downstream_node != m.intersection)
            flag(name, "intersection differs from the upstream link's downstream node");
        if (m.lanes.empty()) flag(name, "served by no lane");
        for (int lane : m.lanes)
            if (lane < 0 || lane >= up.lanes) flag(name, "lane " + std::to_string(lane) + " out of range");
    }

    // Phase structure: each outgoing movement of an approach belongs to exactly one phase.
    std::vector<int> phase_hits(net.movements.size(), 0);
    for (const auto& node : net.intersections) {
        const std::string node_name = "intersection " + std::to_string(node.id.value);
        if (node.phases.empty()) flag(node_name, "has no phases");
        for (const auto& phase : node.phases) {
            const std::string name = node_name + " phase " + std::to_string(phase.id);
            if (phase.served_movements.empty()) flag(name, "serves zero movements");
            std::vector<LinkId> receiving;
            for (MovementId mid : phase.served_movements) {
                if (!net.has_movement(mid)) {
                    flag(name, "serves unknown " + movement_name(mid));
                    continue;
                }
                const Movement& m = net.movements[mid.index()];
                if (m.intersection != node.id) flag(name, "serves " + movement_name(mid) + " of another intersection");
                ++phase_hits[mid.index()];
                receiving.push_back(m.downstream);
            }
            std::sort(receiving.begin(), receiving.end());
            if (std::adjacent_find(receiving.begin(), receiving.end()) != receiving.end())
                flag(name, "two movements share a receiving link");
        }
    }
    for (const auto& m : net.movements) {
        if (phase_hits[m.id.index()] != 1)
            flag(movement_name(m.id), "served by " + std::to_string(phase_hits[m.id.index()]) +
                                          " phases (expected exactly 1)");
    }

    // Connectivity: every link is reachable from an entry and reaches an exit.
    std::vector<char> from_entry(n_links, 0), to_exit(n_links, 0);
    std::deque<LinkId> frontier;
    for (const auto& l : net.links)
        if (l.kind == LinkKind::entry) {
            from_entry[l.id.index()] = 1;
            frontier.push_back(l.id);
        }
    while (!frontier.empty()) {
        const LinkId cur = frontier.front();
        frontier.pop_front();
        for (MovementId mid : net.links[cur.index()].outgoing) {
            const LinkId nxt = net.movements[mid.index()].downstream;
            if (link_ok(nxt) && !from_entry[nxt.index()]) {
                from_entry[nxt.index()] = 1;
                frontier.push_back(nxt);
            }
        }
    }
    for (const auto& l : net.links)
        if (l.kind == LinkKind::exit) {
            to_exit[l.id.index()] = 1;
            frontier.push_back(l.id);
        }
    while (!frontier.empty()) {
        const LinkId cur = frontier.front();
        frontier.pop_front();
        for (MovementId mid : net.links[cur.index()].incoming) {
            const LinkId prv = net.movements[mid.index()].upstream;
            if (link_ok(prv) && !to_exit[prv.index()]) {
                to_exit[prv.index()] = 1;
                frontier.push_back(prv);
            }
        }
    }
    for (const auto& l : net.links) {
        if (!from_entry[l.id.index()]) flag(link_name(l.id), "not reachable from any entry link");
        if (!to_exit[l.id.index()]) flag(link_name(l.id), "cannot reach any exit link");
    }
    return out;
}

nlohmann::json to_json(const Network& net) {
    using nlohmann::json;
    json links = json::array();
    for (const auto& l : net.links) {
        links.push_back({{"id", l.id.value},
                         {"kind", to_string(l.kind)},
                         {"length", l.length},
                         {"lanes", l.lanes},
                         {"free_flow_speed", l.free_flow_speed},
                         {"storage_capacity", l.storage_capacity},
                         {"heading", to_string(l.heading)},
                         {"upstream_node", l.upstream_node.value},
                         {"downstream_node", l.downstream_node.value}});
    }
    json movements = json::array();
    for (const auto& m : net.movements) {
        movements.push_back({{"id", m.id.value},
                             {"upstream", m.upstream.value},
                             {"downstream", m.downstream.value},
                             {"turn", to_string(m.turn)},
                             {"turning_ratio", m.turning_ratio},
                             {"saturation_flow_mean", m.saturation_flow_mean},
                             {"saturation_flow_max", m.saturation_flow_max},
                             {"lanes", m.lanes},
                             {"intersection", m.intersection.value}});
    }
    json nodes = json::array();
    for (const auto& node : net.intersections) {
        json phases = json::array();
        for (const auto& ph : node.phases) {
            json served = json::array();
            for (MovementId mid : ph.served_movements) served.push_back(mid.value);
            phases.push_back({{"id", ph.id}, {"served_movements", served}});
        }
        nodes.push_back({{"id", node.id.value}, {"row", node.row}, {"col", node.col}, {"phases", phases}});
    }
    return {{"jam_spacing", net.jam_spacing}, {"links", links}, {"movements", movements}, {"intersections", nodes}};
}

Network network_from_json(const nlohmann::json& j) {
    Network net;
    net.jam_spacing = j.value("jam_spacing", 7.5);
    for (const auto& jl : j.at("links")) {
        Link l;
        l.id = LinkId{jl.at("id").get<int>()};
        l.kind = link_kind_from_string(jl.at("kind").get<std::string>());
        l.length = jl.at("length").get<double>();
        l.lanes = jl.at("lanes").get<int>();
        l.free_flow_speed = jl.at("free_flow_speed").get<double>();
        l.storage_capacity = jl.at("storage_capacity").get<int>();
        l.heading = heading_from_string(jl.at("heading").get<std::string>());
        l.upstream_node = IntersectionId{jl.at("upstream_node").get<int>()};
        l.downstream_node = IntersectionId{jl.at("downstream_node").get<int>()};
        net.links.push_back(std::move(l));
    }
    for (const auto& jm : j.at("movements")) {
        Movement m;
        m.id = MovementId{jm.at("id").get<int>()};
        m.upstream = LinkId{jm.at("upstream").get<int>()};
        m.downstream = LinkId{jm.at("downstream").get<int>()};
        m.turn = turn_from_string(jm.at("turn").get<std::string>());
        m.turning_ratio = jm.at("turning_ratio").get<double>();
        m.saturation_flow_mean = jm.at("saturation_flow_mean").get<double>();
        m.saturation_flow_max = jm.at("saturation_flow_max").get<double>();
        m.lanes = jm.at("lanes").get<std::vector<int>>();
        m.intersection = IntersectionId{jm.at("intersection").get<int>()};
        net.movements.push_back(std::move(m));
    }
    for (const auto& jn : j.at("intersections")) {
        Intersection node;
        node.id = IntersectionId{jn.at("id").get<int>()};
        node.row = jn.value("row", 0);
        node.col = jn.value("col", 0);
        for (const auto& jp : jn.at("phases")) {
            Phase ph;
            ph.id = jp.at("id").get<int>();
            for (int mid : jp.at("served_movements")) ph.served_movements.push_back(MovementId{mid});
            node.phases.push_back(std::move(ph));
        }
        net.intersections.push_back(std::move(node));
    }
    net.finalize();
    return net;
}

}  // namespace mpsim
