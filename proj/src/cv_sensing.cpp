#include "mpsim/cv_sensing.hpp"

#include <string>

namespace mpsim {

std::string_view to_string(ProbeScaling s) { return s == ProbeScaling::raw ? "raw" : "inverse-p"; }

ProbeScaling probe_scaling_from_string(std::string_view s) {
    if (s == "raw") return ProbeScaling::raw;
    if (s == "inverse-p" || s == "inverse_p") return ProbeScaling::inverse_p;
    throw ConfigError("unknown probe scaling '" + std::string(s) + "' (expected raw|inverse-p)");
}

void validate(const PenetrationConfig& cfg) {
    if (!(cfg.p >= 0.0 && cfg.p <= 1.0)) throw ConfigError("penetration must lie in [0,1]");
    if (cfg.scaling == ProbeScaling::inverse_p && cfg.p == 0.0)
        throw ConfigError("inverse-p scaling is undefined at zero penetration");
}

bool tag_vehicle(std::mt19937_64& rng, double p) { return RandomStreams::uniform(rng) < p; }

double probe_scale(const PenetrationConfig& cfg) {
    validate(cfg);
    return cfg.scaling == ProbeScaling::inverse_p ? 1.0 / cfg.p : 1.0;
}

namespace {

MetricWindow scaled(MetricWindow w, double s) {
    w.sum_count *= s;
    w.sum_stopped *= s;
    w.sum_travel_time *= s;
    w.sum_distance *= s;
    w.snapshot_count *= s;
    w.snapshot_stopped *= s;
    return w;
}

}  // namespace

MetricWindow observed_window(const Network& net, const TrafficState& state,
                             std::span<const VehicleContribution> contributions, int steps, MovementId movement,
                             const PenetrationConfig& cfg) {
    const double s = probe_scale(cfg);
    MetricWindow w;
    w.steps = steps;
    for (const auto& c : contributions) {
        if (c.movement != movement || !c.is_cv) continue;
        w.sum_count += 1.0;
        w.sum_stopped += c.stopped ? 1.0 : 0.0;
        w.sum_travel_time += c.travel_time;
        w.sum_distance += c.distance;
    }
    const Movement& m = net.movement(movement);
    for (int lane : m.lanes)
        for (const Vehicle& v : state.links[m.upstream.index()].lanes[static_cast<std::size_t>(lane)].vehicles) {
            if (v.movement != movement || !v.is_cv) continue;
            w.snapshot_count += 1.0;
            if (v.speed_class == SpeedClass::stopped) w.snapshot_stopped += 1.0;
        }
    return s == 1.0 ? w : scaled(w, s);
}

void observed_windows(std::span<const MetricWindow> probe_windows, const PenetrationConfig& cfg,
                      std::span<MetricWindow> out) {
    const double s = probe_scale(cfg);
    for (std::size_t i = 0; i < probe_windows.size() && i < out.size(); ++i)
        out[i] = s == 1.0 ? probe_windows[i] : scaled(probe_windows[i], s);
}

}  // namespace mpsim
