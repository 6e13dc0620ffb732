#include "helpers.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mpsim/scenario.hpp"

using namespace mpsim;
using nlohmann::json;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("mpsim_unit_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ScenarioConfig small(std::uint64_t seed = 1) {
    ScenarioConfig c;
    c.grid.rows = 2;
    c.grid.cols = 2;
    c.horizon = 1200.0;
    c.seeds = {seed};
    c.workers = 1;
    return c;
}

}  // namespace

TEST_SUITE("scenario") {

TEST_CASE("defaults and variant-default periods") {
    ScenarioConfig c;
    CHECK(c.effective_period() == 5.0);
    c.controller = Variant::q_mp;
    CHECK(c.effective_period() == 9.0);
    c.period = 4.0;
    CHECK(c.effective_period() == 4.0);
    CHECK_NOTHROW(validate(c));
}

TEST_CASE("JSON parsing: field errors name the field") {
    auto fails_on = [](const json& j, const std::string& field) {
        try {
            scenario_from_json(j);
        } catch (const ConfigError& e) {
            return std::string(e.what()).find("'" + field + "'") != std::string::npos;
        }
        return false;
    };
    CHECK(fails_on({{"horizon", 0}}, "horizon"));
    CHECK(fails_on({{"horizon", 90}}, "horizon"));
    CHECK(fails_on({{"controller", "xmp"}}, "controller"));
    CHECK(fails_on({{"T", 2.5}}, "T"));
    CHECK(fails_on({{"penetration", 1.5}}, "penetration"));
    CHECK(fails_on({{"grid", {{"rows", 0}}}}, "grid.rows"));
    CHECK(fails_on({{"grid", {{"rowz", 2}}}}, "grid.rowz"));
    CHECK(fails_on({{"demand", {{"kind", "ramp"}}}}, "demand.kind"));
    CHECK(fails_on({{"demand", {{"kind", "trapezoid"}}}, {"horizon", 5 * 3600}}, "horizon"));
    CHECK(fails_on({{"seeds", json::array()}}, "seeds"));
    CHECK(fails_on({{"seeds", "one"}}, "seeds"));
    CHECK(fails_on({{"mode", "micro"}}, "mode"));
    CHECK(fails_on({{"typo", 1}}, "typo"));
    CHECK(fails_on({{"grid", {{"turning_ratios", {{"left", 0.2}, {"through", 0.5}, {"right", 0.2}}}}}},
                   "grid.turning_ratios"));
    CHECK_THROWS_AS(scenario_from_json(json::array()), ConfigError);
}

TEST_CASE("penetration implies connected vehicles unless stated") {
    CHECK(scenario_from_json({{"penetration", 0.5}}).connected_vehicles);
    CHECK_FALSE(scenario_from_json({{"penetration", 0.5}, {"connected_vehicles", false}}).connected_vehicles);
    CHECK_FALSE(scenario_from_json(json::object()).connected_vehicles);
}

TEST_CASE("config JSON round-trips") {
    ScenarioConfig c = small(5);
    c.controller = Variant::tt_mp;
    c.period = 7.0;
    c.demand.kind = DemandKind::trapezoid;
    c.connected_vehicles = true;
    c.penetration = {0.3, ProbeScaling::inverse_p};
    c.mode = Mode::analytic;
    const ScenarioConfig back = scenario_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.mode == Mode::analytic);
    CHECK(back.penetration.scaling == ProbeScaling::inverse_p);
}

TEST_CASE("load_scenario reports unreadable files and bad JSON as config errors") {
    CHECK_THROWS_AS(load_scenario("/nonexistent/mpsim.json"), ConfigError);
    const auto dir = scratch_dir("badjson");
    std::filesystem::create_directories(dir);
    write_text(dir / "bad.json", "{ not json");
    CHECK_THROWS_AS(load_scenario(dir / "bad.json"), ConfigError);
    write_text(dir / "ok.json", R"({"controller": "hmp", "horizon": 600})");
    CHECK(load_scenario(dir / "ok.json").controller == Variant::h_mp);
}

TEST_CASE("mode selects capacity and accounting") {
    ScenarioConfig c;
    c.mode = Mode::analytic;
    auto s = simulation_config(c, 3);
    CHECK(s.dynamics.internal_capacity == CapacityMode::infinite);
    CHECK(s.dynamics.accounting == DelayAccounting::all_or_nothing);
    CHECK(s.seed == 3);
    c.mode = Mode::meso;
    s = simulation_config(c, 3);
    CHECK(s.dynamics.internal_capacity == CapacityMode::finite);
    CHECK(s.dynamics.accounting == DelayAccounting::distance);
}

TEST_CASE("labels") {
    ScenarioConfig c;
    CHECK(run_label(c) == "dmp_T5");
    c.connected_vehicles = true;
    c.penetration.p = 0.5;
    CHECK(run_label(c) == "dmp_T5_p0.5");
    c.controller = Variant::q_mp;
    c.connected_vehicles = false;
    CHECK(run_label(c) == "qmp_T9");
}

TEST_CASE("mean and sample standard deviation") {
    CHECK(mean_std({}).mean == 0.0);
    const Stat one = mean_std({4.0});
    CHECK(one.mean == 4.0);
    CHECK(one.stdev == 0.0);
    const Stat s = mean_std({1.0, 2.0, 3.0, 4.0});
    CHECK(s.mean == 2.5);
    CHECK(s.stdev == doctest::Approx(1.2909944));
}

TEST_CASE("run_seed: summary, bins, stability and a config-echo CSV") {
    const ScenarioConfig c = small(2);
    const Network net = build_grid(c.grid);
    const SeedResult r = run_seed(net, c, 2);
    CHECK(r.bins.size() == 20);
    REQUIRE(r.stability.has_value());
    CHECK(r.summary.arrivals == r.summary.in_network + r.summary.exited + r.summary.blocked);
    CHECK(r.decision_trace.size() == 240 * net.intersections.size());
    const std::string csv = run_csv(c, r);
    std::istringstream is(csv);
    std::string first, header;
    std::getline(is, first);
    std::getline(is, header);
    CHECK(first.rfind("# ", 0) == 0);
    const json echo = json::parse(first.substr(2));
    CHECK(echo["seeds"] == json::array({2}));
    CHECK(echo["controller"] == "dmp");
    CHECK(header == "t_min,delay_veh_s,vehicles,blocked,entered_cum,exited_cum,waiting_s_cum");
    const json summary = summary_json(c, r, 0.5);
    CHECK(summary["seed"] == 2);
    CHECK(summary["config"]["T"] == 5.0);
    CHECK(summary["metrics"].contains("avg_total_delay"));
    CHECK(summary["stability"]["verdict"].is_string());
}

TEST_CASE("runs shorter than two stability windows carry no verdict") {
    ScenarioConfig c = small();
    c.horizon = 600.0;
    const Network net = build_grid(c.grid);
    CHECK_FALSE(run_seed(net, c, 1).stability.has_value());
}

TEST_CASE("parallel seeds equal sequential seeds") {
    ScenarioConfig c = small();
    c.seeds = {1, 2, 3};
    const Network net = build_grid(c.grid);
    c.workers = 3;
    const auto par = run_seeds(net, c);
    c.workers = 1;
    const auto seq = run_seeds(net, c);
    REQUIRE(par.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(par[i].seed == c.seeds[i]);
        CHECK(run_csv(c, par[i]) == run_csv(c, seq[i]));
    }
}

TEST_CASE("aggregate lists metrics in a fixed order") {
    ScenarioConfig c = small();
    c.seeds = {1, 2};
    const Network net = build_grid(c.grid);
    const auto agg = aggregate(run_seeds(net, c));
    REQUIRE_FALSE(agg.empty());
    CHECK(agg.front().first == "avg_delay_per_vehicle");
    CHECK(agg[2].first == "avg_total_delay");
}

TEST_CASE("run_and_write produces per-run and aggregate files, byte-identical on rerun") {
    ScenarioConfig c = small();
    c.seeds = {4, 5};
    c.horizon = 600.0;
    c.out_dir = scratch_dir("outputs").string();
    run_and_write(c);
    const std::filesystem::path dir(c.out_dir);
    for (const char* f : {"run_dmp_T5_seed4.csv", "run_dmp_T5_seed5.csv", "summary_dmp_T5_seed4.json",
                          "aggregate_dmp_T5.csv", "aggregate_dmp_T5.json", "minutes_dmp_T5.csv"})
        CHECK(std::filesystem::exists(dir / f));
    const std::string first = slurp(dir / "run_dmp_T5_seed4.csv") + slurp(dir / "summary_dmp_T5_seed4.json");
    run_and_write(c);
    CHECK(first == slurp(dir / "run_dmp_T5_seed4.csv") + slurp(dir / "summary_dmp_T5_seed4.json"));
}

TEST_CASE("snapshot stream writes one JSON line per step") {
    ScenarioConfig c = small();
    c.horizon = 120.0;
    c.snapshot_stream = true;
    c.out_dir = scratch_dir("snapshots").string();
    run_and_write(c);
    std::ifstream in(std::filesystem::path(c.out_dir) / "snapshots_dmp_T5_seed1.jsonl");
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        const json j = json::parse(line);
        CHECK(j.contains("phases"));
        ++n;
    }
    CHECK(n == 120);
}

TEST_CASE("compare writes one aggregate per controller and a comparison table") {
    ScenarioConfig c = small();
    c.horizon = 600.0;
    c.out_dir = scratch_dir("compare").string();
    compare_and_write(c, {Variant::q_mp, Variant::d_mp});
    const std::filesystem::path dir(c.out_dir);
    CHECK(std::filesystem::exists(dir / "aggregate_qmp_T9.json"));
    CHECK(std::filesystem::exists(dir / "aggregate_dmp_T5.json"));
    const std::string table = slurp(dir / "comparison.csv");
    CHECK(table.find("qmp,9,avg_total_delay") != std::string::npos);
    CHECK(table.find("dmp,5,avg_total_delay") != std::string::npos);
}

TEST_CASE("unwritable output directories raise OutputError") {
    const auto dir = scratch_dir("blocked");
    std::filesystem::create_directories(dir);
    write_text(dir / "file", "x");
    CHECK_THROWS_AS(ensure_output_dir(dir / "file" / "sub"), OutputError);
    CHECK_THROWS_AS(write_text(dir / "missing" / "x.txt", "y"), OutputError);
    ScenarioConfig c = small();
    c.out_dir = (dir / "file").string();
    CHECK_THROWS_AS(run_and_write(c), OutputError);
}

TEST_CASE("sweeps produce one row per point plus benchmarks") {
    ScenarioConfig c = small();
    c.horizon = 600.0;
    const auto t_rows = sweep_T(c, {3.0, 5.0}, {600.0});
    REQUIRE(t_rows.size() == 2);
    CHECK(t_rows[0].period == 3.0);
    CHECK(t_rows[1].period == 5.0);
    CHECK(t_rows[0].demand_vph == 600.0);
    CHECK(t_rows[0].seeds == 1);

    const auto p_rows = sweep_penetration(c, {0.5, 1.0}, {600.0});
    // Two D-MP rows plus the three other variants at full information.
    REQUIRE(p_rows.size() == 5);
    CHECK(p_rows[0].controller == "dmp");
    CHECK(p_rows[0].connected_vehicles);
    CHECK(p_rows[0].penetration == 0.5);
    CHECK_FALSE(p_rows[4].connected_vehicles);
    const std::string csv = sweep_csv(c, p_rows);
    CHECK(csv.rfind("# ", 0) == 0);
}

TEST_CASE("max degree of saturation uses the trapezoid peak") {
    ScenarioConfig c;
    const Network net = build_grid(c.grid);
    const double low = max_degree_of_saturation(net, c);
    c.demand.kind = DemandKind::trapezoid;
    const double peak = max_degree_of_saturation(net, c);
    CHECK(low < 1.0);
    CHECK(peak > low);
    c.demand.kind = DemandKind::constant;
    c.demand.low = 900.0;
    CHECK(max_degree_of_saturation(net, c) == doctest::Approx(peak));
}

}  // TEST_SUITE
