#include "mpsim/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace mpsim {

using nlohmann::json;

std::string_view to_string(Mode m) { return m == Mode::meso ? "meso" : "analytic"; }

Mode mode_from_string(std::string_view s) {
    if (s == "meso") return Mode::meso;
    if (s == "analytic") return Mode::analytic;
    throw ConfigError("field 'mode': expected meso|analytic, got '" + std::string(s) + "'");
}

namespace {

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

std::string fixed(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
    throw ConfigError("field '" + field + "': " + what);
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
    const std::set<std::string> keys(known.begin(), known.end());
    for (const auto& [k, v] : obj.items())
        if (!keys.contains(k)) field_error(prefix + k, "unknown key");
}

template <typename T>
void read(const json& obj, const char* key, const std::string& prefix, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception&) {
        field_error(prefix + key, "has the wrong type");
    }
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const auto count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    if (count <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < count; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    const std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

void validate(const ScenarioConfig& cfg) {
    if (cfg.grid.rows < 1) field_error("grid.rows", "must be >= 1");
    if (cfg.grid.cols < 1) field_error("grid.cols", "must be >= 1");
    if (!(cfg.grid.link_length > 0)) field_error("grid.link_length", "must be > 0");
    if (cfg.grid.lanes_per_link < 1) field_error("grid.lanes", "must be >= 1");
    if (!(cfg.grid.free_flow_speed > 0)) field_error("grid.free_flow_speed", "must be > 0");
    if (!(cfg.grid.saturation_flow > 0)) field_error("grid.saturation_flow", "must be > 0");
    if (!(cfg.grid.jam_spacing > 0)) field_error("grid.jam_spacing", "must be > 0");
    const auto& r = cfg.grid.turning_ratios;
    if (std::abs(r.left + r.through + r.right - 1.0) > 1e-9) field_error("grid.turning_ratios", "must sum to 1");
    if (!(cfg.demand.low >= 0)) field_error("demand.low", "must be >= 0");
    if (!(cfg.demand.high >= 0)) field_error("demand.high", "must be >= 0");
    if (!(cfg.demand.scale >= 0)) field_error("demand.scale", "must be >= 0");
    if (!(cfg.dt > 0)) field_error("dt", "must be > 0");
    if (!(cfg.horizon > 0)) field_error("horizon", "must be > 0");
    if (std::abs(cfg.horizon / 60.0 - std::round(cfg.horizon / 60.0)) > 1e-9)
        field_error("horizon", "must be a whole number of minutes");
    if (std::abs(60.0 / cfg.dt - std::round(60.0 / cfg.dt)) > 1e-9) field_error("dt", "must divide 60 s");
    if (cfg.demand.kind == DemandKind::trapezoid && cfg.horizon > kTrapezoidHorizon + 1e-9)
        field_error("horizon", "trapezoid demand is defined for at most 4 h");
    if (cfg.seeds.empty()) field_error("seeds", "must not be empty");
    if (cfg.period && !(*cfg.period > 0)) field_error("T", "must be > 0");
    if (!(cfg.lost_time >= 0)) field_error("lost_time", "must be >= 0");
    ControllerSpec spec{cfg.controller, cfg.effective_period(), cfg.lost_time};
    try {
        validate(spec, cfg.dt);
    } catch (const ConfigError& e) {
        field_error("T", e.what());
    }
    try {
        validate(cfg.penetration);
    } catch (const ConfigError& e) {
        field_error("penetration", e.what());
    }
    if (cfg.stability_window < 1) field_error("stability.window", "must be >= 1");
    if (!(cfg.stability_threshold >= 0)) field_error("stability.threshold", "must be >= 0");
    if (cfg.out_dir.empty()) field_error("out_dir", "must not be empty");
}

json to_json(const ScenarioConfig& cfg) {
    json j;
    j["grid"] = {{"rows", cfg.grid.rows},
                 {"cols", cfg.grid.cols},
                 {"link_length", cfg.grid.link_length},
                 {"lanes", cfg.grid.lanes_per_link},
                 {"turning_ratios",
                  {{"left", cfg.grid.turning_ratios.left},
                   {"through", cfg.grid.turning_ratios.through},
                   {"right", cfg.grid.turning_ratios.right}}},
                 {"free_flow_speed", cfg.grid.free_flow_speed},
                 {"saturation_flow", cfg.grid.saturation_flow},
                 {"jam_spacing", cfg.grid.jam_spacing}};
    j["demand"] = {{"kind", to_string(cfg.demand.kind)},
                   {"low", cfg.demand.low},
                   {"high", cfg.demand.high},
                   {"scale", cfg.demand.scale}};
    j["controller"] = to_string(cfg.controller);
    j["T"] = cfg.effective_period();
    j["lost_time"] = cfg.lost_time;
    j["dt"] = cfg.dt;
    j["horizon"] = cfg.horizon;
    j["seeds"] = cfg.seeds;
    j["connected_vehicles"] = cfg.connected_vehicles;
    j["penetration"] = cfg.penetration.p;
    j["probe_scaling"] = to_string(cfg.penetration.scaling);
    j["mode"] = to_string(cfg.mode);
    j["stability"] = {{"window", cfg.stability_window}, {"threshold", cfg.stability_threshold}};
    return j;
}

ScenarioConfig scenario_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown(j, "",
                   {"grid", "demand", "controller", "T", "lost_time", "dt", "horizon", "seeds", "connected_vehicles",
                    "penetration", "probe_scaling", "mode", "stability", "out_dir", "snapshot_stream", "workers"});
    ScenarioConfig cfg;
    if (auto it = j.find("grid"); it != j.end()) {
        if (!it->is_object()) field_error("grid", "must be an object");
        reject_unknown(*it, "grid.",
                       {"rows", "cols", "link_length", "lanes", "turning_ratios", "free_flow_speed", "saturation_flow",
                        "jam_spacing"});
        read(*it, "rows", "grid.", cfg.grid.rows);
        read(*it, "cols", "grid.", cfg.grid.cols);
        read(*it, "link_length", "grid.", cfg.grid.link_length);
        read(*it, "lanes", "grid.", cfg.grid.lanes_per_link);
        read(*it, "free_flow_speed", "grid.", cfg.grid.free_flow_speed);
        read(*it, "saturation_flow", "grid.", cfg.grid.saturation_flow);
        read(*it, "jam_spacing", "grid.", cfg.grid.jam_spacing);
        if (auto tr = it->find("turning_ratios"); tr != it->end()) {
            if (!tr->is_object()) field_error("grid.turning_ratios", "must be an object");
            reject_unknown(*tr, "grid.turning_ratios.", {"left", "through", "right"});
            read(*tr, "left", "grid.turning_ratios.", cfg.grid.turning_ratios.left);
            read(*tr, "through", "grid.turning_ratios.", cfg.grid.turning_ratios.through);
            read(*tr, "right", "grid.turning_ratios.", cfg.grid.turning_ratios.right);
        }
    }
    if (auto it = j.find("demand"); it != j.end()) {
        if (!it->is_object()) field_error("demand", "must be an object");
        reject_unknown(*it, "demand.", {"kind", "low", "high", "scale"});
        std::string kind(to_string(cfg.demand.kind));
        read(*it, "kind", "demand.", kind);
        try {
            cfg.demand.kind = demand_kind_from_string(kind);
        } catch (const ConfigError& e) {
            field_error("demand.kind", e.what());
        }
        read(*it, "low", "demand.", cfg.demand.low);
        read(*it, "high", "demand.", cfg.demand.high);
        read(*it, "scale", "demand.", cfg.demand.scale);
    }
    std::string controller(to_string(cfg.controller));
    read(j, "controller", "", controller);
    try {
        cfg.controller = variant_from_string(controller);
    } catch (const ConfigError& e) {
        field_error("controller", e.what());
    }
    if (auto it = j.find("T"); it != j.end() && !it->is_null()) {
        double t = 0;
        read(j, "T", "", t);
        cfg.period = t;
    }
    read(j, "lost_time", "", cfg.lost_time);
    read(j, "dt", "", cfg.dt);
    read(j, "horizon", "", cfg.horizon);
    read(j, "seeds", "", cfg.seeds);
    read(j, "connected_vehicles", "", cfg.connected_vehicles);
    if (j.contains("penetration")) {
        read(j, "penetration", "", cfg.penetration.p);
        if (!j.contains("connected_vehicles")) cfg.connected_vehicles = true;
    }
    std::string scaling(to_string(cfg.penetration.scaling));
    read(j, "probe_scaling", "", scaling);
    try {
        cfg.penetration.scaling = probe_scaling_from_string(scaling);
    } catch (const ConfigError& e) {
        field_error("probe_scaling", e.what());
    }
    std::string mode(to_string(cfg.mode));
    read(j, "mode", "", mode);
    cfg.mode = mode_from_string(mode);
    if (auto it = j.find("stability"); it != j.end()) {
        if (!it->is_object()) field_error("stability", "must be an object");
        reject_unknown(*it, "stability.", {"window", "threshold"});
        read(*it, "window", "stability.", cfg.stability_window);
        read(*it, "threshold", "stability.", cfg.stability_threshold);
    }
    read(j, "out_dir", "", cfg.out_dir);
    read(j, "snapshot_stream", "", cfg.snapshot_stream);
    read(j, "workers", "", cfg.workers);
    validate(cfg);
    return cfg;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return scenario_from_json(j);
}

SimulationConfig simulation_config(const ScenarioConfig& cfg, std::uint64_t seed) {
    SimulationConfig s;
    s.dynamics.dt = cfg.dt;
    s.dynamics.lost_time = cfg.lost_time;
    s.dynamics.internal_capacity = cfg.mode == Mode::analytic ? CapacityMode::infinite : CapacityMode::finite;
    s.dynamics.accounting = cfg.mode == Mode::analytic ? DelayAccounting::all_or_nothing : DelayAccounting::distance;
    s.controller.variant = cfg.controller;
    s.controller.period = cfg.effective_period();
    s.controller.lost_time = cfg.lost_time;
    s.demand = cfg.demand;
    s.penetration = cfg.penetration;
    s.connected_vehicles = cfg.connected_vehicles;
    s.seed = seed;
    return s;
}

namespace {

void write_snapshot(std::ostream& os, const Simulation& sim) {
    const auto& st = sim.state();
    json line;
    line["t"] = st.time;
    line["in_network"] = st.in_network();
    line["blocked"] = st.blocked();
    line["exited"] = st.exited;
    json phases = json::array();
    for (const auto& s : st.signals.intersections) phases.push_back(s.active);
    line["phases"] = std::move(phases);
    json links = json::array();
    for (std::size_t i = 0; i < st.links.size(); ++i) {
        std::int64_t n = 0, stopped = 0;
        for (const auto& lane : st.links[i].lanes)
            for (const auto& v : lane.vehicles) {
                ++n;
                stopped += v.speed_class == SpeedClass::stopped ? 1 : 0;
            }
        links.push_back({n, stopped});
    }
    line["links"] = std::move(links);
    os << line.dump() << '\n';
}

}  // namespace

SeedResult run_seed(const Network& net, const ScenarioConfig& cfg, std::uint64_t seed, std::ostream* snapshots) {
    Simulation sim(net, simulation_config(cfg, seed));
    if (snapshots) sim.set_step_hook([snapshots](const Simulation& s) { write_snapshot(*snapshots, s); });
    sim.run_until(cfg.horizon);

    SeedResult r;
    r.seed = seed;
    r.summary = sim.summary();
    r.bins = sim.ledger().bins;
    for (const auto& d : sim.decisions()) r.decision_trace.push_back(d.chosen);
    const auto series = vehicles_in_system(sim.ledger());
    if (series.size() >= 2 * static_cast<std::size_t>(cfg.stability_window))
        r.stability = stability_diagnostic(series, cfg.stability_window, cfg.stability_threshold);
    return r;
}

std::vector<SeedResult> run_seeds(const Network& net, const ScenarioConfig& cfg) {
    std::vector<SeedResult> results(cfg.seeds.size());
    parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) { results[i] = run_seed(net, cfg, cfg.seeds[i]); });
    return results;
}

Stat mean_std(const std::vector<double>& values) {
    Stat s;
    if (values.empty()) return s;
    for (double v : values) s.mean += v;
    s.mean /= static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

namespace {

using Extractor = double (*)(const SeedResult&);

const std::vector<std::pair<const char*, Extractor>>& scalar_metrics() {
    static const std::vector<std::pair<const char*, Extractor>> m{
        {"avg_delay_per_vehicle", [](const SeedResult& r) { return r.summary.avg_delay_per_vehicle; }},
        {"avg_waiting_time", [](const SeedResult& r) { return r.summary.avg_waiting_time; }},
        {"avg_total_delay", [](const SeedResult& r) { return r.summary.avg_total_delay; }},
        {"avg_queue_per_link", [](const SeedResult& r) { return r.summary.avg_queue_per_link; }},
        {"throughput_vph", [](const SeedResult& r) { return r.summary.throughput_vph; }},
        {"total_internal_delay", [](const SeedResult& r) { return r.summary.total_internal_delay; }},
        {"arrivals", [](const SeedResult& r) { return static_cast<double>(r.summary.arrivals); }},
        {"exited", [](const SeedResult& r) { return static_cast<double>(r.summary.exited); }},
        {"in_network", [](const SeedResult& r) { return static_cast<double>(r.summary.in_network); }},
        {"blocked", [](const SeedResult& r) { return static_cast<double>(r.summary.blocked); }},
        {"stability_slope", [](const SeedResult& r) { return r.stability ? r.stability->slope : 0.0; }},
    };
    return m;
}

json metrics_json(const RunSummary& s) {
    return {{"horizon_s", s.horizon_s},
            {"avg_delay_per_vehicle", s.avg_delay_per_vehicle},
            {"avg_waiting_time", s.avg_waiting_time},
            {"avg_total_delay", s.avg_total_delay},
            {"avg_queue_per_link", s.avg_queue_per_link},
            {"throughput_vph", s.throughput_vph},
            {"total_internal_delay", s.total_internal_delay},
            {"cumulative_waiting", s.cumulative_waiting},
            {"arrivals", s.arrivals},
            {"entered", s.entered},
            {"exited", s.exited},
            {"in_network", s.in_network},
            {"blocked", s.blocked}};
}

}  // namespace

std::vector<std::pair<std::string, Stat>> aggregate(const std::vector<SeedResult>& results) {
    std::vector<std::pair<std::string, Stat>> out;
    for (const auto& [name, get] : scalar_metrics()) {
        std::vector<double> v;
        for (const auto& r : results) v.push_back(get(r));
        out.emplace_back(name, mean_std(v));
    }
    return out;
}

std::string run_label(const ScenarioConfig& cfg) {
    std::string label = std::string(to_string(cfg.controller)) + "_T" + num(cfg.effective_period());
    if (cfg.connected_vehicles) label += "_p" + num(cfg.penetration.p);
    return label;
}

double max_degree_of_saturation(const Network& net, const ScenarioConfig& cfg) {
    const double peak = cfg.demand.kind == DemandKind::trapezoid ? 120.0 * 60.0 : 0.0;
    const auto flows = analytic_flows(net, entry_demand_at(net, cfg.demand, peak));
    double worst = 0.0;
    for (const auto& ix : net.intersections) worst = std::max(worst, degree_of_saturation(net, ix.id, flows));
    return worst;
}

json summary_json(const ScenarioConfig& cfg, const SeedResult& r, double max_dos) {
    ScenarioConfig echo = cfg;
    echo.seeds = {r.seed};
    json j;
    j["config"] = to_json(echo);
    j["label"] = run_label(cfg);
    j["seed"] = r.seed;
    j["metrics"] = metrics_json(r.summary);
    j["max_degree_of_saturation"] = max_dos;
    if (r.stability)
        j["stability"] = {{"slope_veh_per_min", r.stability->slope},
                          {"verdict", to_string(r.stability->verdict)},
                          {"window_min", cfg.stability_window},
                          {"threshold", cfg.stability_threshold}};
    else
        j["stability"] = nullptr;
    j["decisions"] = r.decision_trace.size();
    return j;
}

std::string run_csv(const ScenarioConfig& cfg, const SeedResult& r) {
    ScenarioConfig echo = cfg;
    echo.seeds = {r.seed};
    std::ostringstream os;
    os << "# " << to_json(echo).dump() << '\n';
    os << "t_min,delay_veh_s,vehicles,blocked,entered_cum,exited_cum,waiting_s_cum\n";
    for (const auto& b : r.bins)
        os << b.t_min << ',' << fixed(b.delay_veh_s) << ',' << b.vehicles << ',' << b.blocked << ','
           << b.entered_cum << ',' << b.exited_cum << ',' << fixed(b.waiting_s_cum) << '\n';
    return os.str();
}

void ensure_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw OutputError("cannot create output directory " + dir.string() + (ec ? ": " + ec.message() : ""));
    const auto probe = dir / ".write_test";
    {
        std::ofstream out(probe);
        if (!out) throw OutputError("output directory " + dir.string() + " is not writable");
    }
    std::filesystem::remove(probe, ec);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw OutputError("cannot write " + path.string());
    out << text;
    if (!out) throw OutputError("failed writing " + path.string());
}

namespace {

std::string minutes_csv(const ScenarioConfig& cfg, const std::vector<SeedResult>& results) {
    std::ostringstream os;
    os << "# " << to_json(cfg).dump() << '\n';
    os << "t_min,delay_veh_s_mean,delay_veh_s_std,vehicles_mean,vehicles_std,blocked_mean,blocked_std,"
          "entered_cum_mean,entered_cum_std,exited_cum_mean,exited_cum_std,waiting_s_cum_mean,waiting_s_cum_std\n";
    std::size_t n_bins = results.empty() ? 0 : results.front().bins.size();
    for (const auto& r : results) n_bins = std::min(n_bins, r.bins.size());
    for (std::size_t b = 0; b < n_bins; ++b) {
        std::vector<double> delay, veh, blk, ent, ex, wait;
        for (const auto& r : results) {
            const auto& bin = r.bins[b];
            delay.push_back(bin.delay_veh_s);
            veh.push_back(static_cast<double>(bin.vehicles));
            blk.push_back(static_cast<double>(bin.blocked));
            ent.push_back(static_cast<double>(bin.entered_cum));
            ex.push_back(static_cast<double>(bin.exited_cum));
            wait.push_back(bin.waiting_s_cum);
        }
        os << results.front().bins[b].t_min;
        for (const auto* v : {&delay, &veh, &blk, &ent, &ex, &wait}) {
            const Stat s = mean_std(*v);
            os << ',' << fixed(s.mean) << ',' << fixed(s.stdev);
        }
        os << '\n';
    }
    return os.str();
}

void write_outputs(const ScenarioConfig& cfg, const Network& net, const std::vector<SeedResult>& results) {
    const std::filesystem::path dir(cfg.out_dir);
    const std::string label = run_label(cfg);
    const double dos = max_degree_of_saturation(net, cfg);
    for (const auto& r : results) {
        const std::string stem = label + "_seed" + std::to_string(r.seed);
        write_text(dir / ("run_" + stem + ".csv"), run_csv(cfg, r));
        write_text(dir / ("summary_" + stem + ".json"), summary_json(cfg, r, dos).dump(2) + "\n");
    }

    const auto agg = aggregate(results);
    std::ostringstream csv;
    csv << "# " << to_json(cfg).dump() << '\n' << "metric,mean,stdev,n\n";
    json aj;
    aj["config"] = to_json(cfg);
    aj["label"] = label;
    aj["max_degree_of_saturation"] = dos;
    for (const auto& [name, s] : agg) {
        csv << name << ',' << fixed(s.mean) << ',' << fixed(s.stdev) << ',' << results.size() << '\n';
        aj["metrics"][name] = {{"mean", s.mean}, {"stdev", s.stdev}};
    }
    std::size_t bounded = 0, judged = 0;
    for (const auto& r : results)
        if (r.stability) {
            ++judged;
            bounded += r.stability->verdict == StabilityVerdict::bounded ? 1 : 0;
        }
    aj["stability"] = {{"bounded", bounded}, {"judged", judged}, {"seeds", results.size()}};
    write_text(dir / ("aggregate_" + label + ".csv"), csv.str());
    write_text(dir / ("aggregate_" + label + ".json"), aj.dump(2) + "\n");
    write_text(dir / ("minutes_" + label + ".csv"), minutes_csv(cfg, results));
}

}  // namespace

std::vector<SeedResult> run_and_write(const ScenarioConfig& cfg) {
    validate(cfg);
    ensure_output_dir(cfg.out_dir);
    const Network net = build_grid(cfg.grid);
    std::vector<SeedResult> results(cfg.seeds.size());
    const std::string label = run_label(cfg);
    parallel_for(cfg.seeds.size(), cfg.workers, [&](std::size_t i) {
        if (cfg.snapshot_stream) {
            const auto path = std::filesystem::path(cfg.out_dir) /
                              ("snapshots_" + label + "_seed" + std::to_string(cfg.seeds[i]) + ".jsonl");
            std::ofstream os(path, std::ios::binary | std::ios::trunc);
            if (!os) throw OutputError("cannot write " + path.string());
            results[i] = run_seed(net, cfg, cfg.seeds[i], &os);
        } else {
            results[i] = run_seed(net, cfg, cfg.seeds[i]);
        }
    });
    write_outputs(cfg, net, results);
    return results;
}

void compare_and_write(const ScenarioConfig& cfg, const std::vector<Variant>& variants) {
    validate(cfg);
    ensure_output_dir(cfg.out_dir);
    const Network net = build_grid(cfg.grid);

    std::vector<ScenarioConfig> cfgs;
    for (Variant v : variants) {
        ScenarioConfig c = cfg;
        c.controller = v;
        validate(c);
        cfgs.push_back(std::move(c));
    }
    const std::size_t n_seeds = cfg.seeds.size();
    std::vector<SeedResult> flat(cfgs.size() * n_seeds);
    parallel_for(flat.size(), cfg.workers, [&](std::size_t k) {
        const auto& c = cfgs[k / n_seeds];
        flat[k] = run_seed(net, c, c.seeds[k % n_seeds]);
    });

    std::ostringstream table;
    table << "# " << to_json(cfg).dump() << '\n' << "controller,T,metric,mean,stdev,n\n";
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
        const std::vector<SeedResult> per(flat.begin() + static_cast<std::ptrdiff_t>(i * n_seeds),
                                          flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * n_seeds));
        write_outputs(cfgs[i], net, per);
        for (const auto& [name, s] : aggregate(per))
            table << to_string(cfgs[i].controller) << ',' << num(cfgs[i].effective_period()) << ',' << name << ','
                  << fixed(s.mean) << ',' << fixed(s.stdev) << ',' << n_seeds << '\n';
    }
    write_text(std::filesystem::path(cfg.out_dir) / "comparison.csv", table.str());
}

namespace {

struct SweepPoint {
    ScenarioConfig cfg;
    double demand_vph = 0.0;
};

std::vector<SweepRow> run_points(const std::vector<SweepPoint>& points, int workers) {
    std::vector<Network> nets;
    nets.reserve(points.size());
    for (const auto& p : points) nets.push_back(build_grid(p.cfg.grid));
    std::vector<std::pair<std::size_t, std::size_t>> jobs;
    for (std::size_t i = 0; i < points.size(); ++i)
        for (std::size_t s = 0; s < points[i].cfg.seeds.size(); ++s) jobs.emplace_back(i, s);
    std::vector<SeedResult> flat(jobs.size());
    parallel_for(jobs.size(), workers, [&](std::size_t k) {
        const auto& p = points[jobs[k].first];
        flat[k] = run_seed(nets[jobs[k].first], p.cfg, p.cfg.seeds[jobs[k].second]);
    });

    std::vector<SweepRow> rows;
    std::size_t k = 0;
    for (const auto& p : points) {
        std::vector<double> d, q, t, td;
        for (std::size_t s = 0; s < p.cfg.seeds.size(); ++s, ++k) {
            d.push_back(flat[k].summary.avg_delay_per_vehicle);
            q.push_back(flat[k].summary.avg_queue_per_link);
            t.push_back(flat[k].summary.throughput_vph);
            td.push_back(flat[k].summary.avg_total_delay);
        }
        SweepRow row;
        row.controller = std::string(to_string(p.cfg.controller));
        row.period = p.cfg.effective_period();
        row.penetration = p.cfg.connected_vehicles ? p.cfg.penetration.p : 1.0;
        row.connected_vehicles = p.cfg.connected_vehicles;
        row.demand_vph = p.demand_vph;
        row.seeds = p.cfg.seeds.size();
        row.delay = mean_std(d);
        row.queue = mean_std(q);
        row.throughput = mean_std(t);
        row.total_delay = mean_std(td);
        rows.push_back(row);
    }
    return rows;
}

ScenarioConfig at_level(const ScenarioConfig& base, double level) {
    ScenarioConfig c = base;
    c.demand.kind = DemandKind::constant;
    c.demand.low = level;
    c.demand.scale = 1.0;
    return c;
}

}  // namespace

std::vector<SweepRow> sweep_T(const ScenarioConfig& cfg, const std::vector<double>& periods,
                              const std::vector<double>& demand_levels) {
    std::vector<SweepPoint> points;
    for (double t : periods)
        for (double level : demand_levels) {
            ScenarioConfig c = at_level(cfg, level);
            c.period = t;
            validate(c);
            points.push_back({c, level});
        }
    return run_points(points, cfg.workers);
}

std::vector<SweepRow> sweep_penetration(const ScenarioConfig& cfg, const std::vector<double>& penetrations,
                                        const std::vector<double>& demand_levels) {
    std::vector<SweepPoint> points;
    for (double p : penetrations) {
        if (!(p > 0.0 && p <= 1.0)) field_error("penetration", "sweep values must lie in (0, 1]");
        for (double level : demand_levels) {
            ScenarioConfig c = at_level(cfg, level);
            c.connected_vehicles = true;
            c.penetration.p = p;
            validate(c);
            points.push_back({c, level});
        }
    }
    for (Variant v : kAllVariants) {
        if (v == cfg.controller) continue;
        for (double level : demand_levels) {
            ScenarioConfig c = at_level(cfg, level);
            c.controller = v;
            c.period.reset();
            c.connected_vehicles = false;
            c.penetration = PenetrationConfig{};
            validate(c);
            points.push_back({c, level});
        }
    }
    return run_points(points, cfg.workers);
}

std::string sweep_csv(const ScenarioConfig& cfg, const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "# " << to_json(cfg).dump() << '\n';
    os << "controller,T,penetration,connected_vehicles,demand_vph,seeds,delay_mean,delay_std,queue_mean,queue_std,"
          "throughput_mean,throughput_std,total_delay_mean,total_delay_std\n";
    for (const auto& r : rows)
        os << r.controller << ',' << num(r.period) << ',' << num(r.penetration) << ','
           << (r.connected_vehicles ? 1 : 0) << ',' << num(r.demand_vph) << ',' << r.seeds << ','
           << fixed(r.delay.mean) << ',' << fixed(r.delay.stdev) << ',' << fixed(r.queue.mean) << ','
           << fixed(r.queue.stdev) << ',' << fixed(r.throughput.mean) << ',' << fixed(r.throughput.stdev) << ','
           << fixed(r.total_delay.mean) << ',' << fixed(r.total_delay.stdev) << '\n';
    return os.str();
}

}  // namespace mpsim
