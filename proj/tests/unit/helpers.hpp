#pragma once

#include <doctest.h>

#include <cstdint>
#include <optional>
#include <vector>

#include "mpsim/network.hpp"
#include "mpsim/dynamics.hpp"
#include "mpsim/simulation.hpp"

namespace testing {

using namespace mpsim;

inline GridParams grid(int rows, int cols) {
    GridParams g;
    g.rows = rows;
    g.cols = cols;
    return g;
}

/// Entry link of a 1x1 grid travelling in `h`.
inline LinkId entry_link(const Network& net, Heading h) {
    for (const Link& l : net.links)
        if (l.kind == LinkKind::entry && l.heading == h) return l.id;
    FAIL("no entry link heading " << to_string(h));
    return {};
}

inline MovementId movement_of(const Network& net, LinkId upstream, Turn t) {
    for (MovementId m : net.link(upstream).outgoing)
        if (net.movement(m).turn == t) return m;
    FAIL("link has no movement for turn " << to_string(t));
    return {};
}

/// Places a vehicle directly on a lane (back of the lane). No bookkeeping besides `admitted`.
inline Vehicle& place(const Network& net, TrafficState& st, MovementId mid, double position,
                      SpeedClass cls = SpeedClass::stopped, bool cv = true) {
    const Movement& m = net.movement(mid);
    Vehicle v;
    v.id = st.next_vehicle_id++;
    v.position = position;
    v.speed_class = cls;
    v.movement = mid;
    v.lane = m.lanes.front();
    v.is_cv = cv;
    auto& lane = st.links[m.upstream.index()].lanes[static_cast<std::size_t>(v.lane)].vehicles;
    lane.push_back(v);
    ++st.arrivals;
    ++st.admitted;
    return lane.back();
}

inline void set_active(TrafficState& st, IntersectionId node, PhaseIndex p) {
    auto& s = st.signals.intersections.at(node.index());
    s.active = p;
    s.lost_time_remaining = 0.0;
}

inline DemandRates no_demand(const Network& net) { return DemandRates{std::vector<double>(net.links.size(), 0.0)}; }

inline DemandRates uniform_demand(const Network& net, double veh_per_hour) {
    DemandRates d{std::vector<double>(net.links.size(), 0.0)};
    for (const Link& l : net.links)
        if (l.kind == LinkKind::entry) d.per_link[l.id.index()] = veh_per_hour / 3600.0;
    return d;
}

inline std::int64_t vehicles_on(const TrafficState& st, LinkId l) {
    std::int64_t n = 0;
    for (const auto& lane : st.links[l.index()].lanes) n += static_cast<std::int64_t>(lane.vehicles.size());
    return n;
}

}  // namespace testing
