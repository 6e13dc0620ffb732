#include "mpsim/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpsim/cv_sensing.hpp"

namespace mpsim {

namespace {

constexpr double kEps = 1e-9;
constexpr double kOpenTail = std::numeric_limits<double>::infinity();

bool lane_has_room(const LaneState& lane, int lane_capacity, double jam_spacing) {
    if (static_cast<int>(lane.vehicles.size()) >= lane_capacity) return false;
    return lane.vehicles.empty() || lane.vehicles.back().position >= jam_spacing - kEps;
}

}  // namespace

bool SignalAssignment::is_green(const Movement& m) const {
    if (all_green) return true;
    return intersections.at(m.intersection.index()).active == m.phase;
}

bool SignalAssignment::in_lost_time(IntersectionId node) const {
    if (all_green) return false;
    return intersections.at(node.index()).lost_time_remaining > kEps;
}

std::int64_t TrafficState::in_network() const {
    std::int64_t n = 0;
    for (const auto& l : links)
        for (const auto& lane : l.lanes) n += static_cast<std::int64_t>(lane.vehicles.size());
    return n;
}

std::int64_t TrafficState::blocked() const {
    std::int64_t n = 0;
    for (const auto& l : links) n += static_cast<std::int64_t>(l.blocked.size());
    return n;
}

TrafficState make_state(const Network& net) {
    TrafficState s;
    s.links.resize(net.links.size());
    for (const auto& l : net.links) s.links[l.id.index()].lanes.resize(static_cast<std::size_t>(l.lanes));
    s.signals.intersections.resize(net.intersections.size());
    return s;
}

MovementId sample_movement(const Network& net, LinkId link, std::mt19937_64& rng) {
    const auto& out = net.link(link).outgoing;
    if (out.empty()) return MovementId{};
    const double u = RandomStreams::uniform(rng);
    double cum = 0.0;
    for (MovementId mid : out) {
        cum += net.movement(mid).turning_ratio;
        if (u < cum) return mid;
    }
    // Ratios sum to one within rounding; fall back to the last movement with nonzero ratio.
    for (auto it = out.rbegin(); it != out.rend(); ++it)
        if (net.movement(*it).turning_ratio > 0.0) return *it;
    return out.back();
}

int choose_lane(const Network& net, const LinkState& link, MovementId movement) {
    const auto& lanes = net.movement(movement).lanes;
    int best = lanes.front();
    for (int lane : lanes)
        if (link.lanes[static_cast<std::size_t>(lane)].vehicles.size() <
            link.lanes[static_cast<std::size_t>(best)].vehicles.size())
            best = lane;
    return best;
}

std::int64_t admit_blocked(const Network& net, TrafficState& state, LinkId entry_link) {
    const Link& link = net.link(entry_link);
    LinkState& ls = state.links[entry_link.index()];
    std::int64_t admitted = 0;
    while (!ls.blocked.empty()) {
        const PendingArrival& a = ls.blocked.front();
        LaneState& lane = ls.lanes[static_cast<std::size_t>(a.lane)];
        if (!lane_has_room(lane, link.lane_capacity(), net.jam_spacing)) break;
        Vehicle v;
        v.id = a.id;
        v.position = 0.0;
        v.movement = a.movement;
        v.lane = a.lane;
        v.entered_network_at = state.time;
        v.entered_link_at = state.time;
        v.is_cv = a.is_cv;
        lane.vehicles.push_back(v);
        ls.blocked.pop_front();
        ++state.admitted;
        ++admitted;
    }
    return admitted;
}

void enqueue_arrival(const Network& net, TrafficState& state, const ScheduledArrival& arrival) {
    const Link& link = net.link(arrival.entry_link);
    if (link.kind != LinkKind::entry) throw ConfigError("arrivals must use an entry link");
    if (net.movement(arrival.movement).upstream != arrival.entry_link)
        throw ConfigError("scheduled movement does not leave its entry link");
    LinkState& ls = state.links[arrival.entry_link.index()];
    PendingArrival a;
    a.id = state.next_vehicle_id++;
    a.arrival_time = state.time;
    a.movement = arrival.movement;
    a.lane = choose_lane(net, ls, arrival.movement);
    a.is_cv = arrival.is_cv;
    ls.blocked.push_back(a);
    ++state.arrivals;
}

InjectionResult inject_demand(const Network& net, TrafficState& state, LinkId entry_link, double rate,
                              const DynamicsParams& params, RandomStreams& rng, double probe_fraction) {
    InjectionResult r;
    LinkState& ls = state.links[entry_link.index()];
    if (rate > 0.0) {
        std::poisson_distribution<int> arrivals(rate * params.dt);
        r.arrived = arrivals(rng.demand);
        for (std::int64_t k = 0; k < r.arrived; ++k) {
            PendingArrival a;
            a.id = state.next_vehicle_id++;
            a.arrival_time = state.time;
            a.movement = sample_movement(net, entry_link, rng.routing);
            a.lane = choose_lane(net, ls, a.movement);
            a.is_cv = tag_vehicle(rng.probes, probe_fraction);
            ls.blocked.push_back(a);
        }
        state.arrivals += r.arrived;
    }
    r.admitted = admit_blocked(net, state, entry_link);
    r.blocked = static_cast<std::int64_t>(ls.blocked.size());
    return r;
}

void switch_phase(const Network& net, TrafficState& state, IntersectionId node, PhaseIndex phase,
                  const DynamicsParams& params) {
    auto& sig = state.signals.intersections.at(node.index());
    const auto& ix = net.intersection(node);
    if (phase < 0 || static_cast<std::size_t>(phase) >= ix.phases.size())
        throw LookupError("phase " + std::to_string(phase) + " does not exist at intersection " +
                          std::to_string(node.value));
    if (sig.active == phase) return;
    sig.active = phase;
    sig.steps_since_switch = 0;
    sig.lost_time_remaining = params.lost_time;
    for (LinkId l : ix.incoming_links)
        for (auto& lane : state.links[l.index()].lanes) lane.discharge_credit = 0.0;
}

void advance_vehicles(const Network& net, TrafficState& state, const DynamicsParams& params,
                      RandomStreams& rng, StepOutput& out) {
    const double dt = params.dt;
    const double jam = net.jam_spacing;
    const double halt_distance = params.halt_speed * dt;
    const bool finite_internal = params.internal_capacity == CapacityMode::finite;
    const bool all_or_nothing = params.accounting == DelayAccounting::all_or_nothing;

    const std::size_t n_mov = net.movements.size();
    out.records.assign(n_mov, StepRecord{});
    if (out.want_probe_records) out.probe_records.assign(n_mov, StepRecord{});
    out.contributions.clear();
    out.link_entries.assign(net.links.size(), 0);
    out.internal_delay = 0.0;
    out.exited = 0;
    out.exited_delay = 0.0;
    out.stopped_vehicles = 0;

    auto& sc = out.scratch;
    if (sc.lane_offset.size() != net.links.size() + 1) {
        sc.lane_offset.assign(net.links.size() + 1, 0);
        for (std::size_t i = 0; i < net.links.size(); ++i)
            sc.lane_offset[i + 1] = sc.lane_offset[i] + static_cast<std::size_t>(net.links[i].lanes);
    }
    const std::size_t n_lanes = sc.lane_offset.back();
    sc.provisional_tail.assign(n_lanes, kOpenTail);
    sc.admitted_into.assign(n_lanes, 0);
    sc.departures.clear();

    // Tail positions reached if no vehicle were discharged this step. Final
    // positions can only be further downstream, so admission tests against
    // these bounds are independent of link processing order.
    if (finite_internal) {
        for (const Link& link : net.links) {
            if (link.kind != LinkKind::internal) continue;
            const double advance = link.free_flow_speed * dt;
            const auto& lanes = state.links[link.id.index()].lanes;
            for (std::size_t k = 0; k < lanes.size(); ++k) {
                double prev = kOpenTail;
                bool leader_was_stopped = false;
                for (const Vehicle& v : lanes[k].vehicles) {
                    const bool was_stopped = v.speed_class == SpeedClass::stopped;
                    if (params.startup_wave && was_stopped && leader_was_stopped) {
                        prev = v.position;
                    } else {
                        const double limit = std::min(link.length, prev - jam);
                        prev = std::max(v.position, std::min(v.position + advance, limit));
                    }
                    leader_was_stopped = was_stopped;
                }
                sc.provisional_tail[sc.lane_offset[link.id.index()] + k] = prev;
            }
        }
    }

    auto account = [&](Vehicle& v, double distance, double free_flow_speed) {
        const bool stopped = distance < halt_distance;
        double credited = distance;
        double delay = 0.0;
        if (all_or_nothing) {
            credited = stopped ? 0.0 : free_flow_speed * dt;
            delay = stopped ? dt : 0.0;
        } else {
            delay = dt - distance / free_flow_speed;
        }
        v.speed_class = stopped ? SpeedClass::stopped : SpeedClass::moving;
        v.distance_this_step = distance;
        v.accrued_delay += delay;
        out.internal_delay += delay;
        if (stopped) ++out.stopped_vehicles;

        StepRecord& rec = out.records[v.movement.index()];
        ++rec.count;
        rec.stopped += stopped ? 1 : 0;
        rec.travel_time += dt;
        rec.distance += credited;
        if (out.want_probe_records && v.is_cv) {
            StepRecord& pr = out.probe_records[v.movement.index()];
            ++pr.count;
            pr.stopped += stopped ? 1 : 0;
            pr.travel_time += dt;
            pr.distance += credited;
        }
        if (out.want_contributions)
            out.contributions.push_back({v.id, v.movement, stopped, dt, credited, v.is_cv});
    };

    for (const Link& link : net.links) {
        if (link.kind == LinkKind::exit) continue;
        const IntersectionId node = link.downstream_node;
        const bool lost = state.signals.in_lost_time(node);
        const double advance = link.free_flow_speed * dt;
        auto& lanes = state.links[link.id.index()].lanes;

        for (std::size_t k = 0; k < lanes.size(); ++k) {
            LaneState& lane = lanes[k];
            const int lane_index = static_cast<int>(k);

            bool lane_green = false;
            for (MovementId mid : net.lane_movements(link.id, lane_index))
                lane_green = lane_green || state.signals.is_green(net.movement(mid));
            if (lane_green && !lost) {
                const double rate = net.lane_saturation_flow(link.id, lane_index) * dt;
                lane.discharge_credit = std::min(lane.discharge_credit + rate, std::max(1.0, rate));
            }

            // Stop-line discharge from the head of the lane.
            bool departed_stopped = false;
            while (!lane.vehicles.empty()) {
                Vehicle& head = lane.vehicles.front();
                if (head.position + advance < link.length - kEps) break;
                const Movement& mv = net.movement(head.movement);
                if (lost || !state.signals.is_green(mv) || lane.discharge_credit < 1.0 - kEps) break;

                const Link& down = net.link(mv.downstream);
                if (down.kind != LinkKind::exit) {
                    if (!head.next_movement.valid()) {
                        head.next_movement = sample_movement(net, down.id, rng.routing);
                        head.next_lane = choose_lane(net, state.links[down.id.index()], head.next_movement);
                    }
                    const std::size_t slot = sc.lane_offset[down.id.index()] + static_cast<std::size_t>(head.next_lane);
                    if (finite_internal) {
                        const auto& dl = state.links[down.id.index()].lanes[static_cast<std::size_t>(head.next_lane)];
                        const bool room = sc.admitted_into[slot] == 0 &&
                                          static_cast<int>(dl.vehicles.size()) < down.lane_capacity() &&
                                          (dl.vehicles.empty() || sc.provisional_tail[slot] >= jam - kEps);
                        if (!room) break;
                    }
                    ++sc.admitted_into[slot];
                }
                lane.discharge_credit -= 1.0;
                departed_stopped = head.speed_class == SpeedClass::stopped;
                account(head, link.length - head.position, link.free_flow_speed);
                sc.departures.emplace_back(head, down.id);
                lane.vehicles.pop_front();
            }

            // Remaining vehicles advance at free-flow speed, limited by the
            // stop line and by jam spacing behind their leader.
            double prev = kOpenTail;
            bool leader_was_stopped = departed_stopped;
            for (Vehicle& v : lane.vehicles) {
                const bool was_stopped = v.speed_class == SpeedClass::stopped;
                double next = v.position;
                if (!(params.startup_wave && was_stopped && leader_was_stopped)) {
                    const double limit = std::min(link.length, prev - jam);
                    next = std::max(v.position, std::min(v.position + advance, limit));
                }
                account(v, next - v.position, link.free_flow_speed);
                v.position = next;
                prev = next;
                leader_was_stopped = was_stopped;
            }
        }
    }

    const double arrival_time = state.time + dt;
    for (auto& [v, down_id] : sc.departures) {
        const Link& down = net.link(down_id);
        ++out.link_entries[down_id.index()];
        if (down.kind == LinkKind::exit) {
            ++out.exited;
            out.exited_delay += v.accrued_delay;
            ++state.exited;
            continue;
        }
        v.position = 0.0;
        v.movement = v.next_movement;
        v.lane = v.next_lane;
        v.next_movement = MovementId{};
        v.next_lane = 0;
        v.entered_link_at = arrival_time;
        v.speed_class = SpeedClass::moving;
        state.links[down_id.index()].lanes[static_cast<std::size_t>(v.lane)].vehicles.push_back(v);
    }
}

void step(const Network& net, TrafficState& state, const DynamicsParams& params, const DemandRates& demand,
          RandomStreams& rng, StepOutput& out, double probe_fraction,
          std::span<const ScheduledArrival> scheduled) {
    advance_vehicles(net, state, params, rng, out);

    // Arrivals during [t, t+dt) are stamped t and, if admitted, first move in the next step.
    const double t0 = state.time;
    for (const auto& a : scheduled)
        if (a.time >= t0 - kEps && a.time < t0 + params.dt - kEps) enqueue_arrival(net, state, a);
    for (const Link& link : net.links) {
        if (link.kind != LinkKind::entry) continue;
        const double rate = link.id.index() < demand.per_link.size() ? demand.per_link[link.id.index()] : 0.0;
        inject_demand(net, state, link.id, rate, params, rng, probe_fraction);
        LinkState& ls = state.links[link.id.index()];
        const double waiting = static_cast<double>(ls.blocked.size()) * params.dt;
        ls.blocked_waiting += waiting;
        state.cumulative_waiting += waiting;
    }

    for (auto& sig : state.signals.intersections) {
        ++sig.steps_since_switch;
        sig.lost_time_remaining = std::max(0.0, sig.lost_time_remaining - params.dt);
    }
    state.time = t0 + params.dt;
}

MovementCounts counts(const Network& net, const TrafficState& state, MovementId movement) {
    if (!net.has_movement(movement)) throw LookupError("unknown movement " + std::to_string(movement.value));
    const Movement& m = net.movement(movement);
    MovementCounts c;
    for (int lane : m.lanes)
        for (const Vehicle& v : state.links[m.upstream.index()].lanes[static_cast<std::size_t>(lane)].vehicles) {
            if (v.movement != movement) continue;
            ++c.x;
            if (v.speed_class == SpeedClass::stopped)
                ++c.x_s;
            else
                ++c.x_m;
        }
    return c;
}

std::vector<MovementCounts> all_counts(const Network& net, const TrafficState& state, bool probes_only) {
    std::vector<MovementCounts> out(net.movements.size());
    for (const auto& ls : state.links)
        for (const auto& lane : ls.lanes)
            for (const Vehicle& v : lane.vehicles) {
                if (probes_only && !v.is_cv) continue;
                auto& c = out[v.movement.index()];
                ++c.x;
                if (v.speed_class == SpeedClass::stopped)
                    ++c.x_s;
                else
                    ++c.x_m;
            }
    return out;
}

}  // namespace mpsim
