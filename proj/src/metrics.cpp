#include "mpsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace mpsim {

std::string_view to_string(DemandKind k) { return k == DemandKind::constant ? "constant" : "trapezoid"; }

DemandKind demand_kind_from_string(std::string_view s) {
    if (s == "constant") return DemandKind::constant;
    if (s == "trapezoid") return DemandKind::trapezoid;
    throw ConfigError("unknown demand kind '" + std::string(s) + "' (expected constant|trapezoid)");
}

double trapezoid_demand(double t, double low, double high) {
    if (!(t >= 0.0 && t <= kTrapezoidHorizon))
        throw DomainError("trapezoid demand is defined on [0, 4 h], got t=" + std::to_string(t));
    const double m = t / 60.0;
    if (m <= 30.0) return low;
    if (m <= 90.0) return low + (high - low) * (m - 30.0) / 60.0;
    if (m <= 150.0) return high;
    if (m <= 210.0) return high - (high - low) * (m - 150.0) / 60.0;
    return low;
}

double DemandProfile::ns_rate(double t) const {
    const double base = kind == DemandKind::constant ? low : trapezoid_demand(std::min(t, kTrapezoidHorizon), low, high);
    return base * scale;
}

double DemandProfile::link_rate(const Link& link, double t) const {
    if (link.kind != LinkKind::entry) return 0.0;
    const double vph = is_north_south(link.heading) ? ns_rate(t) : ew_rate(t);
    return vph / 3600.0;
}

void demand_rates(const Network& net, const DemandProfile& profile, double t, DemandRates& rates) {
    rates.per_link.assign(net.links.size(), 0.0);
    for (const Link& l : net.links) rates.per_link[l.id.index()] = profile.link_rate(l, t);
}

std::vector<double> entry_demand_at(const Network& net, const DemandProfile& profile, double t) {
    std::vector<double> d(net.links.size(), 0.0);
    for (const Link& l : net.links) d[l.id.index()] = profile.link_rate(l, t) * 3600.0;
    return d;
}

LinkFlows analytic_flows(const Network& net, std::span<const double> entry_demand) {
    const std::size_t n_links = net.links.size();
    std::vector<int> slot(n_links, -1);
    std::vector<LinkId> internal;
    for (const Link& l : net.links)
        if (l.kind == LinkKind::internal) {
            slot[l.id.index()] = static_cast<int>(internal.size());
            internal.push_back(l.id);
        }

    auto demand_of = [&](const Link& l) {
        if (l.kind != LinkKind::entry) return 0.0;
        return l.id.index() < entry_demand.size() ? entry_demand[l.id.index()] : 0.0;
    };

    const auto n = static_cast<Eigen::Index>(internal.size());
    Eigen::MatrixXd routing = Eigen::MatrixXd::Zero(n, n);  // routing(k, m) = H(k -> m)
    Eigen::VectorXd inflow = Eigen::VectorXd::Zero(n);
    for (const Movement& mv : net.movements) {
        const Link& up = net.link(mv.upstream);
        const int to = slot[mv.downstream.index()];
        if (to < 0) continue;
        if (up.kind == LinkKind::entry)
            inflow(to) += demand_of(up) * mv.turning_ratio;
        else if (up.kind == LinkKind::internal)
            routing(slot[up.id.index()], to) += mv.turning_ratio;
    }

    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    if (n > 0) {
        const Eigen::EigenSolver<Eigen::MatrixXd> eig(routing, false);
        const double radius = eig.eigenvalues().cwiseAbs().maxCoeff();
        if (!(radius < 1.0 - 1e-12))
            throw DomainError("internal routing has spectral radius " + std::to_string(radius) + " >= 1");
        const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - routing.transpose();
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(system);
        if (!lu.isInvertible()) throw DomainError("flow conservation system is singular");
        f = lu.solve(inflow);
    }

    LinkFlows out;
    out.link.assign(n_links, 0.0);
    for (const Link& l : net.links) {
        if (l.kind == LinkKind::entry) out.link[l.id.index()] = demand_of(l);
        if (l.kind == LinkKind::internal) out.link[l.id.index()] = f(slot[l.id.index()]);
    }
    for (const Movement& mv : net.movements) {
        const Link& down = net.link(mv.downstream);
        if (down.kind == LinkKind::exit) out.link[down.id.index()] += out.link[mv.upstream.index()] * mv.turning_ratio;
    }
    out.movement.assign(net.movements.size(), 0.0);
    for (const Movement& mv : net.movements)
        out.movement[mv.id.index()] = out.link[mv.upstream.index()] * mv.turning_ratio;
    return out;
}

double degree_of_saturation(const Network& net, IntersectionId node, const LinkFlows& flows) {
    double total = 0.0;
    for (const Phase& phase : net.intersection(node).phases) {
        // (approach, lanes) -> pooled flow, capacity
        std::map<std::pair<int, std::vector<int>>, std::pair<double, double>> groups;
        for (MovementId mid : phase.served_movements) {
            const Movement& m = net.movement(mid);
            auto& g = groups[{m.upstream.value, m.lanes}];
            g.first += flows.movement.at(mid.index());
            double cap = 0.0;
            for (int lane : m.lanes) cap += net.lane_saturation_flow(m.upstream, lane) * 3600.0;
            g.second = cap;
        }
        double critical = 0.0;
        for (const auto& [key, fc] : groups)
            if (fc.second > 0.0) critical = std::max(critical, fc.first / fc.second);
        total += critical;
    }
    return total;
}

RunLedger make_ledger(const Network& net, double bin_seconds) {
    RunLedger l;
    l.bin_seconds = bin_seconds;
    l.queue_links = net.links.size() - net.count(LinkKind::exit);
    return l;
}

void accumulate(RunLedger& ledger, const TrafficState& state, const StepOutput& step, double dt) {
    ++ledger.steps;
    ledger.elapsed = static_cast<double>(ledger.steps) * dt;
    ledger.bin_delay += step.internal_delay;
    ledger.total_internal_delay += step.internal_delay;
    ledger.exited_delay += step.exited_delay;
    ledger.stopped_vehicle_steps += static_cast<double>(step.stopped_vehicles);

    const double bins_done = std::floor(ledger.elapsed / ledger.bin_seconds + 1e-9);
    if (bins_done > static_cast<double>(ledger.bins.size())) {
        MinuteBin b;
        b.t_min = static_cast<int>(std::lround(bins_done * ledger.bin_seconds / 60.0));
        b.delay_veh_s = ledger.bin_delay;
        b.vehicles = state.in_network();
        b.blocked = state.blocked();
        b.entered_cum = state.admitted;
        b.exited_cum = state.exited;
        b.waiting_s_cum = state.cumulative_waiting;
        ledger.bins.push_back(b);
        ledger.bin_delay = 0.0;
    }
}

RunSummary summarize(const RunLedger& ledger, const TrafficState& state) {
    RunSummary s;
    s.horizon_s = ledger.elapsed;
    s.arrivals = state.arrivals;
    s.entered = state.admitted;
    s.exited = state.exited;
    s.in_network = state.in_network();
    s.blocked = state.blocked();
    s.cumulative_waiting = state.cumulative_waiting;
    s.total_internal_delay = ledger.total_internal_delay;
    if (state.exited > 0) s.avg_delay_per_vehicle = ledger.exited_delay / static_cast<double>(state.exited);
    if (ledger.steps > 0 && ledger.queue_links > 0)
        s.avg_queue_per_link =
            ledger.stopped_vehicle_steps / (static_cast<double>(ledger.steps) * static_cast<double>(ledger.queue_links));
    if (ledger.elapsed > 0.0) s.throughput_vph = static_cast<double>(state.exited) * 3600.0 / ledger.elapsed;
    if (state.arrivals > 0) s.avg_waiting_time = state.cumulative_waiting / static_cast<double>(state.arrivals);
    s.avg_total_delay = s.avg_delay_per_vehicle + s.avg_waiting_time;
    return s;
}

std::vector<double> vehicles_in_system(const RunLedger& ledger) {
    std::vector<double> out;
    out.reserve(ledger.bins.size());
    for (const auto& b : ledger.bins) out.push_back(static_cast<double>(b.vehicles + b.blocked));
    return out;
}

std::string_view to_string(StabilityVerdict v) { return v == StabilityVerdict::bounded ? "bounded" : "growing"; }

StabilityResult stability_diagnostic(std::span<const double> series, int window, double threshold) {
    if (window < 1) throw ConfigError("stability window must be >= 1 minute");
    const auto n = series.size();
    if (n < 2 * static_cast<std::size_t>(window) || n < 2)
        throw DomainError("stability diagnostic needs at least two windows of data (" + std::to_string(2 * window) +
                          " points), got " + std::to_string(n));

    const std::size_t first = n / 2;
    const auto w = static_cast<std::size_t>(window);
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t count = 0;
    double rolling = 0.0;
    for (std::size_t i = first + 1 - std::min(first + 1, w); i < first; ++i) rolling += series[i];
    for (std::size_t i = first; i < n; ++i) {
        rolling += series[i];
        if (i > first) rolling -= series[i - w];
        const double mean = rolling / static_cast<double>(w);
        const auto x = static_cast<double>(i);
        sx += x;
        sy += mean;
        sxx += x * x;
        sxy += x * mean;
        ++count;
    }
    const auto c = static_cast<double>(count);
    const double denom = c * sxx - sx * sx;
    StabilityResult r;
    r.slope = denom > 0.0 ? (c * sxy - sx * sy) / denom : 0.0;
    r.verdict = r.slope > threshold ? StabilityVerdict::growing : StabilityVerdict::bounded;
    return r;
}

}  // namespace mpsim
