#include "mpsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace mpsim::oracle {

std::vector<double> recompute_pressure(const Network& net, const TrafficState& state,
                                       const std::vector<std::vector<VehicleContribution>>& trace,
                                       const ControllerSpec& spec, IntersectionId node, bool probes_only) {
    const std::size_t n = net.movements.size();
    std::vector<double> x(n, 0.0), xs(n, 0.0), tt(n, 0.0), dist(n, 0.0);

    for (const auto& ls : state.links)
        for (const auto& lane : ls.lanes)
            for (const Vehicle& v : lane.vehicles) {
                if (probes_only && !v.is_cv) continue;
                x[v.movement.index()] += 1.0;
                if (v.speed_class == SpeedClass::stopped) xs[v.movement.index()] += 1.0;
            }

    // Per-step totals first, then across steps: the same grouping the live
    // accumulators use, so the results agree bit for bit.
    std::vector<double> step_tt(n), step_dist(n);
    for (const auto& step : trace) {
        std::fill(step_tt.begin(), step_tt.end(), 0.0);
        std::fill(step_dist.begin(), step_dist.end(), 0.0);
        for (const auto& c : step) {
            if (probes_only && !c.is_cv) continue;
            step_tt[c.movement.index()] += c.travel_time;
            step_dist[c.movement.index()] += c.distance;
        }
        for (std::size_t i = 0; i < n; ++i) {
            tt[i] += step_tt[i];
            dist[i] += step_dist[i];
        }
    }

    auto metric = [&](const Movement& m) {
        const std::size_t i = m.id.index();
        switch (spec.variant) {
            case Variant::q_mp: return x[i];
            case Variant::h_mp: return xs[i];
            case Variant::tt_mp: return tt[i];
            case Variant::d_mp: return std::max(0.0, tt[i] - dist[i] / net.link(m.upstream).free_flow_speed);
        }
        return 0.0;
    };

    const Intersection& ix = net.intersection(node);
    const PhaseIndex active = state.signals.intersections.at(node.index()).active;
    std::vector<double> out;
    for (const Phase& phase : ix.phases) {
        const double factor =
            phase.id == active ? 1.0 : std::max(0.0, (spec.period - spec.lost_time) / spec.period);
        double p = 0.0;
        for (MovementId mid : phase.served_movements) {
            const Movement& m = net.movement(mid);
            double w = metric(m);
            const Link& down = net.link(m.downstream);
            if (down.kind != LinkKind::exit)
                for (MovementId next : down.outgoing) w -= metric(net.movement(next)) * net.movement(next).turning_ratio;
            p += (m.saturation_flow_mean * factor) * w;
        }
        out.push_back(p);
    }
    return out;
}

TinyInstance random_tiny_instance(std::uint64_t seed, int vehicles, int decisions, double period) {
    TinyInstance inst;
    GridParams g;
    g.rows = 1;
    g.cols = 1;
    inst.network = build_grid(g);
    inst.decisions = decisions;
    inst.period = period;

    std::mt19937_64 rng(seed);
    const double horizon = period * decisions;
    const auto entries = inst.network.links_of_kind(LinkKind::entry);
    // Skewed approach weights make some instances lopsided.
    std::vector<double> weight;
    for (std::size_t i = 0; i < entries.size(); ++i) weight.push_back(0.1 + RandomStreams::uniform(rng));
    std::discrete_distribution<std::size_t> pick_entry(weight.begin(), weight.end());
    for (int k = 0; k < vehicles; ++k) {
        ScheduledArrival a;
        a.entry_link = entries[pick_entry(rng)];
        const auto& out = inst.network.link(a.entry_link).outgoing;
        a.movement = out[static_cast<std::size_t>(rng() % out.size())];
        a.time = std::floor(RandomStreams::uniform(rng) * horizon * 0.75);
        inst.arrivals.push_back(a);
    }
    std::stable_sort(inst.arrivals.begin(), inst.arrivals.end(),
                     [](const ScheduledArrival& a, const ScheduledArrival& b) { return a.time < b.time; });
    return inst;
}

namespace {

void check_size(const TinyInstance& inst) {
    if (inst.decisions < 1 || inst.decisions > kMaxEnumeratedDecisions)
        throw DomainError("exhaustive search supports 1.." + std::to_string(kMaxEnumeratedDecisions) +
                          " decisions, got " + std::to_string(inst.decisions));
    if (inst.period * inst.decisions > kMaxTinyHorizon + 1e-9)
        throw DomainError("tiny instance horizon exceeds 60 s");
}

SimulationConfig tiny_config(const TinyInstance& inst, Policy policy, Variant variant) {
    SimulationConfig cfg;
    cfg.dynamics = inst.dynamics;
    cfg.controller.variant = variant;
    cfg.controller.period = inst.period;
    cfg.controller.lost_time = inst.dynamics.lost_time;
    cfg.demand.low = 0.0;
    cfg.demand.high = 0.0;
    cfg.policy = policy;
    cfg.record_decisions = policy == Policy::max_pressure;
    cfg.scheduled = inst.arrivals;
    return cfg;
}

struct Search {
    const TinyInstance& inst;
    int period_steps;
    BestSchedule best{std::numeric_limits<double>::infinity(), {}};
    std::vector<PhaseIndex> current;

    void run(const Simulation& sim, int depth) {
        // Delay never decreases, so a partial schedule already at the best is dominated.
        if (sim.total_delay() >= best.delay) return;
        if (depth == inst.decisions) {
            best.delay = sim.total_delay();
            best.phases = current;
            return;
        }
        const auto& node = inst.network.intersections.front();
        for (const Phase& phase : node.phases) {
            Simulation next = sim;
            next.set_phase(node.id, phase.id);
            next.run_steps(period_steps);
            current.push_back(phase.id);
            run(next, depth + 1);
            current.pop_back();
        }
    }
};

}  // namespace

BestSchedule exhaustive_best_schedule(const TinyInstance& inst) {
    check_size(inst);
    Simulation root(inst.network, tiny_config(inst, Policy::external, Variant::d_mp));
    Search s{inst, root.period_steps(), {std::numeric_limits<double>::infinity(), {}}, {}};
    s.run(root, 0);
    return s.best;
}

double schedule_delay(const TinyInstance& inst, const std::vector<PhaseIndex>& phases) {
    check_size(inst);
    if (static_cast<int>(phases.size()) != inst.decisions) throw ConfigError("schedule length must match decisions");
    Simulation sim(inst.network, tiny_config(inst, Policy::external, Variant::d_mp));
    const IntersectionId node = inst.network.intersections.front().id;
    for (PhaseIndex p : phases) {
        sim.set_phase(node, p);
        sim.run_steps(sim.period_steps());
    }
    return sim.total_delay();
}

double max_pressure_delay(const TinyInstance& inst, Variant variant) {
    check_size(inst);
    Simulation sim(inst.network, tiny_config(inst, Policy::max_pressure, variant));
    sim.run_steps(static_cast<std::int64_t>(sim.period_steps()) * inst.decisions);
    return sim.total_delay();
}

}  // namespace mpsim::oracle
