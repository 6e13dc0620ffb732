#pragma once

#include <cstdint>
#include <vector>

#include "mpsim/controllers.hpp"
#include "mpsim/dynamics.hpp"
#include "mpsim/network.hpp"
#include "mpsim/simulation.hpp"

namespace mpsim::oracle {

/// Phase pressures at `node` derived straight from vehicle records: the live
/// state for snapshot metrics and the per-step contribution trace since the
/// last decision for windowed metrics. Shares no code with MetricWindow.
/// `probes_only` drops non-connected vehicles from both sources.
std::vector<double> recompute_pressure(const Network& net, const TrafficState& state,
                                       const std::vector<std::vector<VehicleContribution>>& trace,
                                       const ControllerSpec& spec, IntersectionId node, bool probes_only = false);

/// Single intersection with an explicit list of arrivals and no random demand.
struct TinyInstance {
    Network network;
    std::vector<ScheduledArrival> arrivals;
    DynamicsParams dynamics{};
    double period = 5.0;  // s between decisions
    int decisions = 8;    // decision instants, including t = 0
};

inline constexpr int kMaxEnumeratedDecisions = 12;
inline constexpr double kMaxTinyHorizon = 60.0;

/// Random 1x1 instance with `vehicles` arrivals spread over the horizon.
TinyInstance random_tiny_instance(std::uint64_t seed, int vehicles, int decisions = 8, double period = 5.0);

struct BestSchedule {
    double delay = 0.0;  // internal delay plus boundary waiting, veh-s
    std::vector<PhaseIndex> phases;
};

/// Exhaustive search over phase sequences at the decision resolution.
/// Throws DomainError if the instance has more than 12 decisions or a horizon
/// above 60 s.
BestSchedule exhaustive_best_schedule(const TinyInstance& inst);

/// Total delay of a fixed phase sequence on the instance.
double schedule_delay(const TinyInstance& inst, const std::vector<PhaseIndex>& phases);

/// Total delay achieved by Max Pressure with `variant` on the instance's decision grid.
double max_pressure_delay(const TinyInstance& inst, Variant variant);

}  // namespace mpsim::oracle
