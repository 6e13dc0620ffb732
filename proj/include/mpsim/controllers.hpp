#pragma once

#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "mpsim/dynamics.hpp"
#include "mpsim/network.hpp"

namespace mpsim {

/// Max Pressure variants, distinguished by the metric that feeds the weight.
enum class Variant {
    q_mp,   // instantaneous vehicle count
    h_mp,   // instantaneous stopped (halting) count
    tt_mp,  // travel time accumulated over the last period
    d_mp,   // delay accumulated over the last period
};

inline constexpr std::array<Variant, 4> kAllVariants{Variant::q_mp, Variant::h_mp, Variant::tt_mp, Variant::d_mp};

std::string_view to_string(Variant v);
/// Accepts "qmp", "q-mp", "Q-MP" and the like.
Variant variant_from_string(std::string_view s);
/// Signal update period each variant performs best with on the reference grid.
double default_period(Variant v);

enum class TieBreak { active_then_lowest };

struct ControllerSpec {
    Variant variant = Variant::d_mp;
    double period = 5.0;     // T, seconds
    double lost_time = 3.0;  // seconds
    TieBreak tie_break = TieBreak::active_then_lowest;
};

/// Throws ConfigError unless period >= dt, period is a whole multiple of dt and lost_time >= 0.
void validate(const ControllerSpec& spec, double dt);

/// Per-movement accumulators between two decision instants.
struct MetricWindow {
    double sum_count = 0.0;         // vehicle-steps
    double sum_stopped = 0.0;       // vehicle-steps
    double sum_travel_time = 0.0;   // vehicle-seconds
    double sum_distance = 0.0;      // meters
    double snapshot_count = 0.0;    // x at the decision instant
    double snapshot_stopped = 0.0;  // x_s at the decision instant
    int steps = 0;

    /// tt - e / v_f, clamped at zero.
    [[nodiscard]] double delay(double free_flow_speed) const;
};

void update_windows(std::span<MetricWindow> windows, std::span<const StepRecord> step);
void take_snapshot(std::span<MetricWindow> windows, std::span<const MovementCounts> counts);
void reset_windows(std::span<MetricWindow> windows);

/// The metric a variant reads from one movement's window.
double movement_metric(Variant v, const MetricWindow& w, double free_flow_speed);

/// Windows of the movements an intersection is allowed to see: its own
/// approaches and the movements leaving the links it discharges into.
class LocalWindows {
public:
    LocalWindows() = default;

    [[nodiscard]] IntersectionId intersection() const { return node_; }
    /// Throws LookupError for movements outside the neighbourhood.
    [[nodiscard]] const MetricWindow& at(MovementId id) const;
    [[nodiscard]] bool contains(MovementId id) const;
    [[nodiscard]] std::size_t size() const { return entries_.size(); }

    friend LocalWindows gather_local(const Network& net, IntersectionId node, std::span<const MetricWindow> all);

private:
    IntersectionId node_;
    std::vector<std::pair<MovementId, MetricWindow>> entries_;  // ascending id
};

LocalWindows gather_local(const Network& net, IntersectionId node, std::span<const MetricWindow> all);

/// metric(l,m) - sum_n metric(m,n) H(m,n); downstream terms vanish for exit links.
/// Throws LookupError for an unknown movement or windows of different horizons.
double weight(const Network& net, Variant v, MovementId movement, std::span<const MetricWindow> windows);
double weight(const Network& net, Variant v, MovementId movement, const LocalWindows& windows);

/// 1 for the active phase; (T - lost_time) / T (floored at 0) for a candidate switch.
double saturation_factor(const ControllerSpec& spec, bool is_active);

/// Sum over served movements (ascending id) of c(l,m) * factor * w(l,m).
/// `weights` is aligned with `phase.served_movements`.
double pressure(const Network& net, const Phase& phase, std::span<const double> weights, double factor);

std::vector<double> phase_pressures(const Network& net, const LocalWindows& windows, const ControllerSpec& spec,
                                    PhaseIndex active);

/// Argmax; ties go to the active phase, then to the lowest index.
PhaseIndex select_phase(std::span<const double> pressures, PhaseIndex active);

}  // namespace mpsim
