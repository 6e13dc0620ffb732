#include "mpsim/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace mpsim {

Simulation::Simulation(const Network& net, SimulationConfig cfg)
    : net_(&net), cfg_(std::move(cfg)), rng_(cfg_.seed), state_(make_state(net)), ledger_(make_ledger(net)) {
    validate(cfg_.controller, cfg_.dynamics.dt);
    validate(cfg_.penetration);
    period_steps_ = static_cast<int>(std::lround(cfg_.controller.period / cfg_.dynamics.dt));
    cfg_.controller.lost_time = cfg_.dynamics.lost_time;
    out_.want_probe_records = cfg_.connected_vehicles;
    out_.want_contributions = cfg_.record_contributions;
    windows_.assign(net.movements.size(), MetricWindow{});
    probe_windows_.assign(net.movements.size(), MetricWindow{});
    std::stable_sort(cfg_.scheduled.begin(), cfg_.scheduled.end(),
                     [](const ScheduledArrival& a, const ScheduledArrival& b) { return a.time < b.time; });
}

bool Simulation::at_decision_instant() const { return steps_ % period_steps_ == 0; }

std::vector<MetricWindow> Simulation::controller_windows() const {
    std::vector<MetricWindow> w = cfg_.connected_vehicles ? probe_windows_ : windows_;
    take_snapshot(w, all_counts(*net_, state_, cfg_.connected_vehicles));
    if (cfg_.connected_vehicles) observed_windows(w, cfg_.penetration, w);
    return w;
}

std::vector<double> Simulation::controller_pressures(IntersectionId node) const {
    const auto w = controller_windows();
    const LocalWindows local = gather_local(*net_, node, w);
    return phase_pressures(*net_, local, cfg_.controller, state_.signals.intersections.at(node.index()).active);
}

void Simulation::decide() {
    const auto w = controller_windows();
    for (const Intersection& ix : net_->intersections) {
        const PhaseIndex active = state_.signals.intersections[ix.id.index()].active;
        const LocalWindows local = gather_local(*net_, ix.id, w);
        auto pressures = phase_pressures(*net_, local, cfg_.controller, active);
        const PhaseIndex chosen = select_phase(pressures, active);
        switch_phase(*net_, state_, ix.id, chosen, cfg_.dynamics);
        if (cfg_.record_decisions) decisions_.push_back({state_.time, ix.id, chosen, std::move(pressures)});
    }
}

void Simulation::begin_window() {
    reset_windows(windows_);
    reset_windows(probe_windows_);
    trace_.clear();
}

void Simulation::set_phase(IntersectionId node, PhaseIndex phase) {
    if (cfg_.policy != Policy::external) throw ConfigError("set_phase requires the external policy");
    switch_phase(*net_, state_, node, phase, cfg_.dynamics);
}

void Simulation::advance() {
    if (at_decision_instant()) {
        if (cfg_.policy == Policy::max_pressure) decide();
        begin_window();
    }

    demand_rates(*net_, cfg_.demand, state_.time, rates_);

    const double t_end = state_.time + cfg_.dynamics.dt;
    std::size_t last = next_scheduled_;
    while (last < cfg_.scheduled.size() && cfg_.scheduled[last].time < t_end - 1e-9) ++last;
    const std::span<const ScheduledArrival> due(cfg_.scheduled.data() + next_scheduled_, last - next_scheduled_);
    next_scheduled_ = last;

    const double p = cfg_.connected_vehicles ? cfg_.penetration.p : 1.0;
    step(*net_, state_, cfg_.dynamics, rates_, rng_, out_, p, due);
    ++steps_;

    update_windows(windows_, out_.records);
    if (cfg_.connected_vehicles) update_windows(probe_windows_, out_.probe_records);
    if (cfg_.record_contributions) trace_.push_back(out_.contributions);
    accumulate(ledger_, state_, out_, cfg_.dynamics.dt);
    if (hook_) hook_(*this);
}

void Simulation::run_steps(std::int64_t n) {
    for (std::int64_t i = 0; i < n; ++i) advance();
}

void Simulation::run_until(double t) {
    while (state_.time < t - 1e-9) advance();
}

double Simulation::total_delay() const { return ledger_.total_internal_delay + state_.cumulative_waiting; }

}  // namespace mpsim
