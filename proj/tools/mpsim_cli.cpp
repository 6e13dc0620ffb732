#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mpsim/metrics.hpp"
#include "mpsim/network.hpp"
#include "mpsim/scenario.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitOutput = 3;

struct Overrides {
    std::string config;
    std::string controller;
    std::optional<double> period;
    std::optional<double> penetration;
    std::string probe_scaling;
    std::string seeds;
    std::string mode;
    std::string out;
    std::string demand;
    std::optional<double> low, high, scale, horizon;
    std::optional<int> rows, cols, workers;
    bool snapshot_stream = false;
};

void add_common(CLI::App* app, Overrides& o) {
    app->add_option("--config", o.config, "scenario JSON file");
    app->add_option("--controller", o.controller, "qmp | hmp | ttmp | dmp");
    app->add_option("--T", o.period, "signal update period, seconds");
    app->add_option("--penetration", o.penetration, "connected-vehicle fraction; enables probe sensing");
    app->add_option("--probe-scaling", o.probe_scaling, "raw | inverse-p");
    app->add_option("--seeds", o.seeds, "comma list and ranges, e.g. 1-10 or 3,5,8");
    app->add_option("--mode", o.mode, "meso | analytic");
    app->add_option("--out", o.out, "output directory");
    app->add_option("--demand", o.demand, "constant | trapezoid");
    app->add_option("--low", o.low, "NS entry rate (veh/h); the level for constant demand");
    app->add_option("--high", o.high, "trapezoid peak NS entry rate (veh/h)");
    app->add_option("--scale", o.scale, "demand multiplier");
    app->add_option("--horizon", o.horizon, "simulated seconds (whole minutes)");
    app->add_option("--rows", o.rows, "grid rows");
    app->add_option("--cols", o.cols, "grid columns");
    app->add_option("--workers", o.workers, "parallel runs (0 = hardware threads)");
    app->add_flag("--snapshot-stream", o.snapshot_stream, "write per-step JSON lines");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            const auto dash = item.find('-');
            if (dash == std::string::npos) {
                out.push_back(std::stoull(item));
            } else {
                const auto a = std::stoull(item.substr(0, dash));
                const auto b = std::stoull(item.substr(dash + 1));
                if (b < a) throw mpsim::ConfigError("");
                for (auto s = a; s <= b; ++s) out.push_back(s);
            }
        } catch (const std::exception&) {
            throw mpsim::ConfigError("field 'seeds': cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw mpsim::ConfigError("field 'seeds': must not be empty");
    return out;
}

std::vector<double> parse_list(const std::string& text, const std::string& field) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw mpsim::ConfigError("field '" + field + "': cannot parse '" + item + "'");
        }
    }
    if (out.empty()) throw mpsim::ConfigError("field '" + field + "': must not be empty");
    return out;
}

mpsim::ScenarioConfig resolve(const Overrides& o) {
    mpsim::ScenarioConfig cfg = o.config.empty() ? mpsim::ScenarioConfig{} : mpsim::load_scenario(o.config);
    if (!o.controller.empty()) {
        try {
            cfg.controller = mpsim::variant_from_string(o.controller);
        } catch (const mpsim::ConfigError& e) {
            throw mpsim::ConfigError(std::string("field 'controller': ") + e.what());
        }
    }
    if (o.period) cfg.period = *o.period;
    if (o.penetration) {
        cfg.penetration.p = *o.penetration;
        cfg.connected_vehicles = true;
    }
    if (!o.probe_scaling.empty()) cfg.penetration.scaling = mpsim::probe_scaling_from_string(o.probe_scaling);
    if (!o.seeds.empty()) cfg.seeds = parse_seeds(o.seeds);
    if (!o.mode.empty()) cfg.mode = mpsim::mode_from_string(o.mode);
    if (!o.out.empty()) cfg.out_dir = o.out;
    if (!o.demand.empty()) cfg.demand.kind = mpsim::demand_kind_from_string(o.demand);
    if (o.low) cfg.demand.low = *o.low;
    if (o.high) cfg.demand.high = *o.high;
    if (o.scale) cfg.demand.scale = *o.scale;
    if (o.horizon) cfg.horizon = *o.horizon;
    if (o.rows) cfg.grid.rows = *o.rows;
    if (o.cols) cfg.grid.cols = *o.cols;
    if (o.workers) cfg.workers = *o.workers;
    if (o.snapshot_stream) cfg.snapshot_stream = true;
    mpsim::validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mesoscopic grid simulator with Max Pressure signal control"};
    app.require_subcommand(1);

    Overrides run_o, cmp_o, sweep_t_o, sweep_p_o, flows_o;
    auto* run = app.add_subcommand("run", "simulate every seed of one scenario");
    add_common(run, run_o);

    auto* compare = app.add_subcommand("compare", "run several controllers on the same scenario");
    add_common(compare, cmp_o);
    std::string controllers = "qmp,hmp,ttmp,dmp";
    compare->add_option("--controllers", controllers, "comma list of controllers");

    auto* sweep_t = app.add_subcommand("sweep-T", "signal period sweep over constant demand levels");
    add_common(sweep_t, sweep_t_o);
    std::string t_values = "1,2,3,4,5,6,7,8,9,10,11,12";
    std::string t_levels = "600,750,900";
    sweep_t->add_option("--T-values", t_values, "comma list of periods");
    sweep_t->add_option("--levels", t_levels, "comma list of NS demand levels (veh/h)");

    auto* sweep_p = app.add_subcommand("sweep-penetration", "connected-vehicle penetration sweep");
    add_common(sweep_p, sweep_p_o);
    std::string p_values = "0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0";
    std::string p_levels = "600,750,900";
    sweep_p->add_option("--p-values", p_values, "comma list of penetration rates in (0,1]");
    sweep_p->add_option("--levels", p_levels, "comma list of NS demand levels (veh/h)");

    auto* network = app.add_subcommand("network", "dump or validate a network file");
    network->require_subcommand(1);
    auto* dump = network->add_subcommand("dump", "write the grid of a scenario as JSON");
    Overrides dump_o;
    add_common(dump, dump_o);
    std::string dump_file;
    dump->add_option("--file", dump_file, "destination (stdout if omitted)");
    auto* check = network->add_subcommand("validate", "list invariant violations of a network JSON file");
    std::string check_file;
    check->add_option("--file", check_file, "network JSON")->required();

    auto* flows = app.add_subcommand("flows", "analytic link flows and degree of saturation");
    add_common(flows, flows_o);
    std::optional<double> at_minute;
    flows->add_option("--at", at_minute, "demand time in minutes (default: peak)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*run) {
            const auto cfg = resolve(run_o);
            const auto results = mpsim::run_and_write(cfg);
            for (const auto& r : results)
                std::cout << mpsim::run_label(cfg) << " seed " << r.seed << ": avg delay "
                          << r.summary.avg_delay_per_vehicle << " s, avg total " << r.summary.avg_total_delay
                          << " s, stability "
                          << (r.stability ? std::string(mpsim::to_string(r.stability->verdict)) : "n/a") << '\n';
        } else if (*compare) {
            const auto cfg = resolve(cmp_o);
            std::vector<mpsim::Variant> vs;
            std::stringstream ss(controllers);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) vs.push_back(mpsim::variant_from_string(item));
            if (vs.empty()) throw mpsim::ConfigError("field 'controllers': must not be empty");
            auto per_variant = cfg;
            if (!cmp_o.period) per_variant.period.reset();
            mpsim::compare_and_write(per_variant, vs);
            std::cout << "wrote " << (std::filesystem::path(cfg.out_dir) / "comparison.csv").string() << '\n';
        } else if (*sweep_t) {
            const auto cfg = resolve(sweep_t_o);
            mpsim::ensure_output_dir(cfg.out_dir);
            const auto rows = mpsim::sweep_T(cfg, parse_list(t_values, "T-values"), parse_list(t_levels, "levels"));
            const auto path = std::filesystem::path(cfg.out_dir) / ("sweep_T_" + std::string(mpsim::to_string(cfg.controller)) + ".csv");
            mpsim::write_text(path, mpsim::sweep_csv(cfg, rows));
            std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
        } else if (*sweep_p) {
            const auto cfg = resolve(sweep_p_o);
            mpsim::ensure_output_dir(cfg.out_dir);
            const auto rows =
                mpsim::sweep_penetration(cfg, parse_list(p_values, "p-values"), parse_list(p_levels, "levels"));
            const auto path = std::filesystem::path(cfg.out_dir) / ("sweep_penetration_" + std::string(mpsim::to_string(cfg.controller)) + ".csv");
            mpsim::write_text(path, mpsim::sweep_csv(cfg, rows));
            std::cout << "wrote " << rows.size() << " rows to " << path.string() << '\n';
        } else if (*dump) {
            const auto cfg = resolve(dump_o);
            const auto text = mpsim::to_json(mpsim::build_grid(cfg.grid)).dump(2) + "\n";
            if (dump_file.empty())
                std::cout << text;
            else
                mpsim::write_text(dump_file, text);
        } else if (*check) {
            std::ifstream in(check_file);
            if (!in) throw mpsim::ConfigError("cannot open " + check_file);
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(in);
            } catch (const nlohmann::json::parse_error& e) {
                throw mpsim::ConfigError(std::string("network file is not valid JSON: ") + e.what());
            }
            const auto net = mpsim::network_from_json(j);
            const auto violations = mpsim::validate(net);
            for (const auto& v : violations) std::cout << v.entity << ": " << v.rule << '\n';
            if (!violations.empty()) return 1;
            std::cout << "ok: " << net.links.size() << " links, " << net.movements.size() << " movements, "
                      << net.intersections.size() << " intersections\n";
        } else if (*flows) {
            const auto cfg = resolve(flows_o);
            const auto net = mpsim::build_grid(cfg.grid);
            double t = cfg.demand.kind == mpsim::DemandKind::trapezoid ? 120.0 * 60.0 : 0.0;
            if (at_minute) t = *at_minute * 60.0;
            const auto f = mpsim::analytic_flows(net, mpsim::entry_demand_at(net, cfg.demand, t));
            nlohmann::json out;
            for (const auto& ix : net.intersections)
                out["degree_of_saturation"].push_back(
                    {{"intersection", ix.id.value}, {"row", ix.row}, {"col", ix.col},
                     {"value", mpsim::degree_of_saturation(net, ix.id, f)}});
            for (const auto& l : net.links)
                out["link_flow_vph"].push_back({{"link", l.id.value}, {"kind", mpsim::to_string(l.kind)},
                                                {"flow", f.link[l.id.index()]}});
            std::cout << out.dump(2) << '\n';
        }
    } catch (const mpsim::OutputError& e) {
        std::cerr << "output error: " << e.what() << '\n';
        return kExitOutput;
    } catch (const mpsim::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const mpsim::ValidationError& e) {
        std::cerr << "invalid network:\n";
        for (const auto& v : e.violations()) std::cerr << "  " << v.entity << ": " << v.rule << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
