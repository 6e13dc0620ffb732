#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "mpsim/network.hpp"
#include "mpsim/rng.hpp"

namespace mpsim {

enum class SpeedClass : std::uint8_t { moving, stopped };

/// Storage rule for internal links. Entry links are always finite.
enum class CapacityMode { finite, infinite };

/// How per-step delay is attributed to a vehicle.
///  - distance:     dt - e/v_f using the distance actually covered.
///  - all_or_nothing: dt for a stopped vehicle, 0 for a moving one (moving
///    vehicles are credited a full free-flow advance).
enum class DelayAccounting { distance, all_or_nothing };

struct DynamicsParams {
    double dt = 1.0;            // s
    double halt_speed = 0.1;    // m/s, below this a vehicle counts as stopped
    double lost_time = 3.0;     // s of zero discharge after a phase switch
    CapacityMode internal_capacity = CapacityMode::finite;
    DelayAccounting accounting = DelayAccounting::distance;
    /// A stopped vehicle starts only once its leader moved in the previous
    /// step, so a discharging queue dissolves from the front instead of
    /// shifting as a block.
    bool startup_wave = true;
};

struct Vehicle {
    VehicleId id = 0;
    double position = 0.0;  // m from the upstream end of the current link
    SpeedClass speed_class = SpeedClass::moving;
    MovementId movement;       // executed at the downstream stop line
    int lane = 0;
    MovementId next_movement;  // sampled on the first discharge attempt
    int next_lane = 0;
    double entered_network_at = 0.0;
    double entered_link_at = 0.0;
    double distance_this_step = 0.0;  // e_i(t)
    double accrued_delay = 0.0;       // internal delay so far, s
    bool is_cv = false;
};

struct LaneState {
    std::deque<Vehicle> vehicles;  // front() is closest to the stop line
    double discharge_credit = 0.0;
};

/// Arrival waiting at the network boundary because its entry lane had no room.
struct PendingArrival {
    VehicleId id = 0;
    double arrival_time = 0.0;
    MovementId movement;
    int lane = 0;
    bool is_cv = false;
};

struct LinkState {
    std::vector<LaneState> lanes;
    std::deque<PendingArrival> blocked;  // entry links only
    double blocked_waiting = 0.0;        // cumulative waiting seconds accrued here
};

struct IntersectionSignal {
    PhaseIndex active = 0;
    int steps_since_switch = 0;
    double lost_time_remaining = 0.0;
};

/// One-hot phase activation per intersection.
struct SignalAssignment {
    std::vector<IntersectionSignal> intersections;
    /// Test hook: every movement is green and lost time is ignored.
    bool all_green = false;

    [[nodiscard]] bool is_green(const Movement& m) const;
    [[nodiscard]] bool in_lost_time(IntersectionId node) const;
};

struct TrafficState {
    double time = 0.0;
    std::vector<LinkState> links;
    SignalAssignment signals;

    std::int64_t arrivals = 0;   // cumulative vehicles generated at the boundary
    std::int64_t admitted = 0;   // cumulative vehicles that entered an entry link
    std::int64_t exited = 0;     // cumulative vehicles that left through an exit link
    VehicleId next_vehicle_id = 0;
    double cumulative_waiting = 0.0;  // boundary waiting, including vehicles still blocked

    [[nodiscard]] std::int64_t in_network() const;
    [[nodiscard]] std::int64_t blocked() const;
};

TrafficState make_state(const Network& net);

/// Per-movement totals over the vehicles present on the upstream link during
/// one step (i.e. at the start of the step).
struct StepRecord {
    std::int64_t count = 0;
    std::int64_t stopped = 0;
    double travel_time = 0.0;  // vehicle-seconds
    double distance = 0.0;     // meters
};

/// One vehicle's contribution to its movement during one step.
struct VehicleContribution {
    VehicleId vehicle = 0;
    MovementId movement;
    bool stopped = false;
    double travel_time = 0.0;
    double distance = 0.0;
    bool is_cv = false;
};

/// Everything a single call to step() observed, filled into caller-owned buffers.
struct StepOutput {
    std::vector<StepRecord> records;        // indexed by movement
    std::vector<StepRecord> probe_records;  // connected vehicles only; filled if requested
    std::vector<VehicleContribution> contributions;  // filled if requested
    std::vector<std::int64_t> link_entries;          // vehicles moved into each link across a stop line

    double internal_delay = 0.0;  // veh-s incurred by vehicles in the network this step
    std::int64_t exited = 0;
    double exited_delay = 0.0;    // accrued internal delay of the vehicles that exited
    std::int64_t stopped_vehicles = 0;

    bool want_probe_records = false;
    bool want_contributions = false;

    // Reused between calls.
    struct Scratch {
        std::vector<std::size_t> lane_offset;
        std::vector<double> provisional_tail;
        std::vector<int> admitted_into;
        std::vector<std::pair<Vehicle, LinkId>> departures;
    } scratch;
};

/// Boundary demand for one step.
struct DemandRates {
    std::vector<double> per_link;  // veh/s, indexed by link; zero for non-entry links
};

/// Explicitly scheduled arrival (tiny instances and tests).
struct ScheduledArrival {
    double time = 0.0;
    LinkId entry_link;
    MovementId movement;
    bool is_cv = true;
};

struct InjectionResult {
    std::int64_t arrived = 0;
    std::int64_t admitted = 0;
    std::int64_t blocked = 0;  // still waiting at the boundary after this step
};

/// Samples the next movement out of `link` from its turning ratios.
MovementId sample_movement(const Network& net, LinkId link, std::mt19937_64& rng);

/// Lane of `link` a vehicle executing `movement` joins (least occupied serving lane).
int choose_lane(const Network& net, const LinkState& link, MovementId movement);

/// Poisson arrivals at `entry_link` with mean rate*dt, appended to the boundary
/// queue and admitted FIFO while the entry lane has room.
InjectionResult inject_demand(const Network& net, TrafficState& state, LinkId entry_link, double rate,
                              const DynamicsParams& params, RandomStreams& rng, double probe_fraction);

/// Admits a specific vehicle at the boundary (queued behind anything already blocked).
void enqueue_arrival(const Network& net, TrafficState& state, const ScheduledArrival& arrival);

/// Admits boundary vehicles FIFO while space is available; returns the number admitted.
std::int64_t admit_blocked(const Network& net, TrafficState& state, LinkId entry_link);

/// Advances vehicles by one dt: kinematics, stop-line discharge, transfer to
/// downstream links, exits. Does not inject demand or change signals.
void advance_vehicles(const Network& net, TrafficState& state, const DynamicsParams& params,
                      RandomStreams& rng, StepOutput& out);

/// Full transition: vehicle advance, boundary demand, lost-time bookkeeping and
/// the clock. `scheduled` arrivals due in this step are admitted as well.
void step(const Network& net, TrafficState& state, const DynamicsParams& params, const DemandRates& demand,
          RandomStreams& rng, StepOutput& out, double probe_fraction = 1.0,
          std::span<const ScheduledArrival> scheduled = {});

/// Activates `phase` at `node`; a change of phase starts the lost-time interval.
void switch_phase(const Network& net, TrafficState& state, IntersectionId node, PhaseIndex phase,
                  const DynamicsParams& params);

struct MovementCounts {
    std::int64_t x = 0;
    std::int64_t x_s = 0;
    std::int64_t x_m = 0;
};

/// Vehicles currently queued for `movement` on its upstream link.
MovementCounts counts(const Network& net, const TrafficState& state, MovementId movement);

/// Counts for every movement at once; `probes_only` restricts to connected vehicles.
std::vector<MovementCounts> all_counts(const Network& net, const TrafficState& state, bool probes_only = false);

}  // namespace mpsim
