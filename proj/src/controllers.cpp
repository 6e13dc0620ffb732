#include "mpsim/controllers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

namespace mpsim {

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::q_mp: return "qmp";
        case Variant::h_mp: return "hmp";
        case Variant::tt_mp: return "ttmp";
        case Variant::d_mp: return "dmp";
    }
    return "?";
}

Variant variant_from_string(std::string_view s) {
    std::string key;
    for (char ch : s)
        if (ch != '-' && ch != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    if (key == "qmp") return Variant::q_mp;
    if (key == "hmp") return Variant::h_mp;
    if (key == "ttmp") return Variant::tt_mp;
    if (key == "dmp") return Variant::d_mp;
    throw ConfigError("unknown controller '" + std::string(s) + "' (expected qmp|hmp|ttmp|dmp)");
}

double default_period(Variant v) {
    switch (v) {
        case Variant::q_mp: return 9.0;
        case Variant::h_mp: return 5.0;
        case Variant::tt_mp: return 9.0;
        case Variant::d_mp: return 5.0;
    }
    return 5.0;
}

void validate(const ControllerSpec& spec, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (spec.period < dt - 1e-9) throw ConfigError("T must be >= dt");
    const double ratio = spec.period / dt;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) throw ConfigError("T must be a whole multiple of dt");
    if (spec.lost_time < 0.0) throw ConfigError("lost_time must be >= 0");
}

double MetricWindow::delay(double free_flow_speed) const {
    return std::max(0.0, sum_travel_time - sum_distance / free_flow_speed);
}

void update_windows(std::span<MetricWindow> windows, std::span<const StepRecord> step) {
    const std::size_t n = std::min(windows.size(), step.size());
    for (std::size_t i = 0; i < n; ++i) {
        MetricWindow& w = windows[i];
        const StepRecord& r = step[i];
        w.sum_count += static_cast<double>(r.count);
        w.sum_stopped += static_cast<double>(r.stopped);
        w.sum_travel_time += r.travel_time;
        w.sum_distance += r.distance;
        ++w.steps;
    }
}

void take_snapshot(std::span<MetricWindow> windows, std::span<const MovementCounts> counts) {
    const std::size_t n = std::min(windows.size(), counts.size());
    for (std::size_t i = 0; i < n; ++i) {
        windows[i].snapshot_count = static_cast<double>(counts[i].x);
        windows[i].snapshot_stopped = static_cast<double>(counts[i].x_s);
    }
}

void reset_windows(std::span<MetricWindow> windows) {
    for (auto& w : windows) w = MetricWindow{};
}

double movement_metric(Variant v, const MetricWindow& w, double free_flow_speed) {
    switch (v) {
        case Variant::q_mp: return w.snapshot_count;
        case Variant::h_mp: return w.snapshot_stopped;
        case Variant::tt_mp: return w.sum_travel_time;
        case Variant::d_mp: return w.delay(free_flow_speed);
    }
    return 0.0;
}

const MetricWindow& LocalWindows::at(MovementId id) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), id,
                               [](const auto& e, MovementId key) { return e.first < key; });
    if (it == entries_.end() || it->first != id)
        throw LookupError("movement " + std::to_string(id.value) + " is not adjacent to intersection " +
                          std::to_string(node_.value));
    return it->second;
}

bool LocalWindows::contains(MovementId id) const {
    return std::binary_search(entries_.begin(), entries_.end(), std::make_pair(id, MetricWindow{}),
                              [](const auto& a, const auto& b) { return a.first < b.first; });
}

LocalWindows gather_local(const Network& net, IntersectionId node, std::span<const MetricWindow> all) {
    LocalWindows local;
    local.node_ = node;
    std::vector<MovementId> ids;
    for (LinkId in : net.intersection(node).incoming_links) {
        for (MovementId mid : net.link(in).outgoing) {
            ids.push_back(mid);
            for (MovementId next : net.link(net.movement(mid).downstream).outgoing) ids.push_back(next);
        }
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    for (MovementId mid : ids) {
        if (mid.index() >= all.size()) throw LookupError("no window for movement " + std::to_string(mid.value));
        local.entries_.emplace_back(mid, all[mid.index()]);
    }
    return local;
}

namespace {

template <typename Lookup>
double weight_impl(const Network& net, Variant v, MovementId movement, Lookup&& window_of) {
    if (!net.has_movement(movement)) throw LookupError("unknown movement " + std::to_string(movement.value));
    const Movement& m = net.movement(movement);
    const MetricWindow& own = window_of(movement);
    double w = movement_metric(v, own, net.link(m.upstream).free_flow_speed);

    const Link& down = net.link(m.downstream);
    if (down.kind == LinkKind::exit) return w;
    for (MovementId next : down.outgoing) {
        const MetricWindow& dw = window_of(next);
        if (dw.steps != own.steps)
            throw LookupError("mismatched window horizon between movements " + std::to_string(movement.value) +
                              " and " + std::to_string(next.value));
        w -= movement_metric(v, dw, down.free_flow_speed) * net.movement(next).turning_ratio;
    }
    return w;
}

}  // namespace

double weight(const Network& net, Variant v, MovementId movement, std::span<const MetricWindow> windows) {
    return weight_impl(net, v, movement, [&](MovementId id) -> const MetricWindow& {
        if (id.index() >= windows.size()) throw LookupError("no window for movement " + std::to_string(id.value));
        return windows[id.index()];
    });
}

double weight(const Network& net, Variant v, MovementId movement, const LocalWindows& windows) {
    return weight_impl(net, v, movement, [&](MovementId id) -> const MetricWindow& { return windows.at(id); });
}

double saturation_factor(const ControllerSpec& spec, bool is_active) {
    if (is_active) return 1.0;
    return std::max(0.0, (spec.period - spec.lost_time) / spec.period);
}

double pressure(const Network& net, const Phase& phase, std::span<const double> weights, double factor) {
    double p = 0.0;
    for (std::size_t i = 0; i < phase.served_movements.size() && i < weights.size(); ++i) {
        const double c_eff = net.movement(phase.served_movements[i]).saturation_flow_mean * factor;
        p += c_eff * weights[i];
    }
    return p;
}

std::vector<double> phase_pressures(const Network& net, const LocalWindows& windows, const ControllerSpec& spec,
                                    PhaseIndex active) {
    const Intersection& node = net.intersection(windows.intersection());
    std::vector<double> out;
    out.reserve(node.phases.size());
    std::vector<double> w;
    for (const Phase& phase : node.phases) {
        w.clear();
        for (MovementId mid : phase.served_movements) w.push_back(weight(net, spec.variant, mid, windows));
        out.push_back(pressure(net, phase, w, saturation_factor(spec, phase.id == active)));
    }
    return out;
}

PhaseIndex select_phase(std::span<const double> pressures, PhaseIndex active) {
    if (pressures.empty()) throw ConfigError("select_phase needs at least one phase");
    PhaseIndex best = 0;
    for (PhaseIndex j = 1; j < static_cast<PhaseIndex>(pressures.size()); ++j)
        if (pressures[static_cast<std::size_t>(j)] > pressures[static_cast<std::size_t>(best)]) best = j;
    if (active >= 0 && static_cast<std::size_t>(active) < pressures.size() &&
        pressures[static_cast<std::size_t>(active)] == pressures[static_cast<std::size_t>(best)])
        return active;
    return best;
}

}  // namespace mpsim
