#pragma once

#include <random>
#include <span>
#include <string_view>

#include "mpsim/controllers.hpp"
#include "mpsim/dynamics.hpp"

namespace mpsim {

enum class ProbeScaling { raw, inverse_p };

std::string_view to_string(ProbeScaling s);
ProbeScaling probe_scaling_from_string(std::string_view s);

struct PenetrationConfig {
    double p = 1.0;
    ProbeScaling scaling = ProbeScaling::raw;
};

/// Throws ConfigError if p is outside [0,1] or inverse-p scaling is used with p = 0.
void validate(const PenetrationConfig& cfg);

/// Connected-vehicle flag drawn once at network entry. Always consumes one draw.
bool tag_vehicle(std::mt19937_64& rng, double p);

/// Multiplier applied to probe-only accumulators.
double probe_scale(const PenetrationConfig& cfg);

/// Window of `movement` rebuilt from the per-vehicle contributions of
/// connected vehicles over `steps` steps plus a snapshot of `state`, then
/// scaled per `cfg`.
MetricWindow observed_window(const Network& net, const TrafficState& state,
                             std::span<const VehicleContribution> contributions, int steps, MovementId movement,
                             const PenetrationConfig& cfg);

/// Applies the scaling to already probe-filtered windows.
void observed_windows(std::span<const MetricWindow> probe_windows, const PenetrationConfig& cfg,
                      std::span<MetricWindow> out);

}  // namespace mpsim
