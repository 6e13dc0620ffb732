#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "mpsim/dynamics.hpp"
#include "mpsim/network.hpp"

namespace mpsim {

// ---------------------------------------------------------------------------
// Demand

enum class DemandKind { constant, trapezoid };

std::string_view to_string(DemandKind k);
DemandKind demand_kind_from_string(std::string_view s);

/// Trapezoid profile for the north-south entries (veh/h), 4 h long:
/// low for 30 min, linear ramp to high over 60 min, high for 60 min,
/// linear ramp back over 60 min, low for the final 30 min.
/// Throws DomainError for t outside [0, 4 h].
double trapezoid_demand(double t, double low = 600.0, double high = 900.0);

inline constexpr double kTrapezoidHorizon = 4.0 * 3600.0;

struct DemandProfile {
    DemandKind kind = DemandKind::constant;
    double low = 600.0;   // veh/h on NS entries; the constant level for kind=constant
    double high = 900.0;  // veh/h, trapezoid peak
    double scale = 1.0;   // multiplies both

    /// North-south entry rate in veh/h. East-west entries get half of it.
    [[nodiscard]] double ns_rate(double t) const;
    [[nodiscard]] double ew_rate(double t) const { return ns_rate(t) / 2.0; }
    /// Demand for `link` at time t in veh/s (zero for non-entry links).
    [[nodiscard]] double link_rate(const Link& link, double t) const;
};

/// Fills `rates` with per-link entry demand in veh/s.
void demand_rates(const Network& net, const DemandProfile& profile, double t, DemandRates& rates);

// ---------------------------------------------------------------------------
// Analytic flows and degree of saturation

struct LinkFlows {
    std::vector<double> link;      // veh/h, indexed by link
    std::vector<double> movement;  // veh/h, indexed by movement
};

/// Long-run average link flows from entry demand (veh/h per link id, entries
/// only) and turning ratios: solves (I - R^T) f = inflow over internal links.
/// Throws DomainError if the internal routing is not strictly substochastic.
LinkFlows analytic_flows(const Network& net, std::span<const double> entry_demand);

/// Entry demand vector for a profile frozen at time t.
std::vector<double> entry_demand_at(const Network& net, const DemandProfile& profile, double t);

/// Sum over phases of the critical flow ratio. Movements sharing the same
/// lanes of one approach are pooled against those lanes' saturation flow.
double degree_of_saturation(const Network& net, IntersectionId node, const LinkFlows& flows);

// ---------------------------------------------------------------------------
// Run ledger

struct MinuteBin {
    int t_min = 0;              // end of the bin, minutes
    double delay_veh_s = 0.0;   // internal delay incurred inside the bin
    std::int64_t vehicles = 0;  // in network at the end of the bin
    std::int64_t blocked = 0;   // waiting at the boundary at the end of the bin
    std::int64_t entered_cum = 0;
    std::int64_t exited_cum = 0;
    double waiting_s_cum = 0.0;
};

struct RunLedger {
    double bin_seconds = 60.0;
    std::vector<MinuteBin> bins;

    std::int64_t steps = 0;
    double elapsed = 0.0;
    double bin_delay = 0.0;
    double total_internal_delay = 0.0;
    double exited_delay = 0.0;        // accrued internal delay of exited vehicles
    double stopped_vehicle_steps = 0.0;
    std::size_t queue_links = 0;      // links that can hold a queue (non-exit)
};

RunLedger make_ledger(const Network& net, double bin_seconds = 60.0);

/// Folds one completed step into the ledger. Call once per step, after step().
void accumulate(RunLedger& ledger, const TrafficState& state, const StepOutput& step, double dt);

struct RunSummary {
    double horizon_s = 0.0;
    double avg_delay_per_vehicle = 0.0;  // internal delay of exited vehicles / exited
    double avg_queue_per_link = 0.0;     // stopped vehicles per queue link, time-averaged
    double throughput_vph = 0.0;
    double avg_waiting_time = 0.0;       // boundary waiting / all generated vehicles
    double avg_total_delay = 0.0;        // internal + waiting
    double total_internal_delay = 0.0;   // veh-s, all vehicles
    std::int64_t arrivals = 0;
    std::int64_t entered = 0;
    std::int64_t exited = 0;
    std::int64_t in_network = 0;
    std::int64_t blocked = 0;
    double cumulative_waiting = 0.0;
};

RunSummary summarize(const RunLedger& ledger, const TrafficState& state);

/// Vehicles in the network plus vehicles waiting at the boundary, per bin.
std::vector<double> vehicles_in_system(const RunLedger& ledger);

// ---------------------------------------------------------------------------
// Stability

enum class StabilityVerdict { bounded, growing };
std::string_view to_string(StabilityVerdict v);

struct StabilityResult {
    double slope = 0.0;  // veh/min
    StabilityVerdict verdict = StabilityVerdict::bounded;
};

inline constexpr int kDefaultStabilityWindow = 10;       // minutes
inline constexpr double kDefaultStabilityThreshold = 0.05;  // veh/min

/// Least-squares slope of the trailing `window`-minute mean of a per-minute
/// series over its final half. Throws DomainError if the series is shorter
/// than two windows.
StabilityResult stability_diagnostic(std::span<const double> per_minute, int window = kDefaultStabilityWindow,
                                     double threshold = kDefaultStabilityThreshold);

}  // namespace mpsim
