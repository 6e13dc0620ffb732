#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mpsim/controllers.hpp"
#include "mpsim/cv_sensing.hpp"
#include "mpsim/dynamics.hpp"
#include "mpsim/metrics.hpp"
#include "mpsim/network.hpp"
#include "mpsim/rng.hpp"

namespace mpsim {

/// Who sets the signals: the built-in Max Pressure controller, or the caller
/// through set_phase().
enum class Policy { max_pressure, external };

struct SimulationConfig {
    DynamicsParams dynamics{};
    ControllerSpec controller{};
    DemandProfile demand{};
    PenetrationConfig penetration{};
    /// Controllers see probe vehicles only. With p = 1 every vehicle is a probe.
    bool connected_vehicles = false;
    std::uint64_t seed = 0;
    Policy policy = Policy::max_pressure;
    bool record_decisions = true;
    /// Keep per-vehicle contributions since the last decision (for the oracle).
    bool record_contributions = false;
    std::vector<ScheduledArrival> scheduled;  // sorted by time
};

struct Decision {
    double time = 0.0;
    IntersectionId node;
    PhaseIndex chosen = 0;
    std::vector<double> pressures;
};

class Simulation {
public:
    Simulation(const Network& net, SimulationConfig cfg);

    /// One dt transition. At a decision instant the controller acts first.
    void advance();
    void run_steps(std::int64_t n);
    /// Runs until state().time reaches `t` (seconds).
    void run_until(double t);

    /// True when the next advance() starts with a signal decision.
    [[nodiscard]] bool at_decision_instant() const;
    [[nodiscard]] int period_steps() const { return period_steps_; }
    [[nodiscard]] std::int64_t steps() const { return steps_; }

    /// Pressures the controller would compute at `node` right now, from the
    /// windows accumulated since the last decision plus a fresh snapshot.
    [[nodiscard]] std::vector<double> controller_pressures(IntersectionId node) const;
    /// Windows the controller reads (probe-filtered and scaled when CV sensing is on),
    /// snapshot included.
    [[nodiscard]] std::vector<MetricWindow> controller_windows() const;

    /// External policy only.
    void set_phase(IntersectionId node, PhaseIndex phase);

    [[nodiscard]] const Network& network() const { return *net_; }
    [[nodiscard]] const SimulationConfig& config() const { return cfg_; }
    [[nodiscard]] const TrafficState& state() const { return state_; }
    [[nodiscard]] const RunLedger& ledger() const { return ledger_; }
    [[nodiscard]] const StepOutput& last_step() const { return out_; }
    [[nodiscard]] std::span<const MetricWindow> windows() const { return windows_; }
    [[nodiscard]] std::span<const MetricWindow> probe_windows() const { return probe_windows_; }
    [[nodiscard]] const std::vector<Decision>& decisions() const { return decisions_; }
    /// Per-step contributions since the last decision, oldest first.
    [[nodiscard]] const std::vector<std::vector<VehicleContribution>>& window_trace() const { return trace_; }

    /// Internal delay of all vehicles plus boundary waiting, veh-s.
    [[nodiscard]] double total_delay() const;
    [[nodiscard]] RunSummary summary() const { return summarize(ledger_, state_); }

    /// Called after every step.
    void set_step_hook(std::function<void(const Simulation&)> hook) { hook_ = std::move(hook); }

private:
    void decide();
    void begin_window();

    const Network* net_;
    SimulationConfig cfg_;
    RandomStreams rng_;
    TrafficState state_;
    StepOutput out_;
    DemandRates rates_;
    RunLedger ledger_;
    std::vector<MetricWindow> windows_;
    std::vector<MetricWindow> probe_windows_;
    std::vector<Decision> decisions_;
    std::vector<std::vector<VehicleContribution>> trace_;
    std::function<void(const Simulation&)> hook_;
    std::size_t next_scheduled_ = 0;
    std::int64_t steps_ = 0;
    int period_steps_ = 1;
};

}  // namespace mpsim
