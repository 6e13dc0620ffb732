#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mpsim/controllers.hpp"
#include "mpsim/cv_sensing.hpp"
#include "mpsim/metrics.hpp"
#include "mpsim/network.hpp"
#include "mpsim/simulation.hpp"

namespace mpsim {

/// analytic: infinite internal storage and all-or-nothing delay accounting.
/// meso: finite storage and delay from the distance actually covered.
enum class Mode { meso, analytic };

std::string_view to_string(Mode m);
Mode mode_from_string(std::string_view s);

struct ScenarioConfig {
    GridParams grid{};
    DemandProfile demand{};
    Variant controller = Variant::d_mp;
    std::optional<double> period;  // T; the variant default when unset
    double lost_time = 3.0;
    double dt = 1.0;
    double horizon = 3600.0;  // s, whole minutes
    std::vector<std::uint64_t> seeds{1};
    bool connected_vehicles = false;
    PenetrationConfig penetration{};
    Mode mode = Mode::meso;
    int stability_window = kDefaultStabilityWindow;
    double stability_threshold = kDefaultStabilityThreshold;
    std::string out_dir = "out";
    bool snapshot_stream = false;
    int workers = 0;  // 0: one per hardware thread

    [[nodiscard]] double effective_period() const { return period.value_or(default_period(controller)); }
};

/// Throws ConfigError naming the offending field.
void validate(const ScenarioConfig& cfg);

nlohmann::json to_json(const ScenarioConfig& cfg);
/// Unknown keys are rejected so that typos do not silently fall back to defaults.
ScenarioConfig scenario_from_json(const nlohmann::json& j);
ScenarioConfig load_scenario(const std::filesystem::path& path);

SimulationConfig simulation_config(const ScenarioConfig& cfg, std::uint64_t seed);

/// Filesystem failure while writing results.
class OutputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SeedResult {
    std::uint64_t seed = 0;
    RunSummary summary;
    std::optional<StabilityResult> stability;  // absent when the run is shorter than two windows
    std::vector<MinuteBin> bins;
    std::vector<PhaseIndex> decision_trace;    // chosen phase per decision and intersection
};

/// Runs one seed in the calling thread. `snapshots`, if set, receives one JSON line per step.
SeedResult run_seed(const Network& net, const ScenarioConfig& cfg, std::uint64_t seed,
                    std::ostream* snapshots = nullptr);

/// Runs every seed of `cfg` on a worker pool; results follow the order of cfg.seeds.
std::vector<SeedResult> run_seeds(const Network& net, const ScenarioConfig& cfg);

struct Stat {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation, 0 for a single value
};
Stat mean_std(const std::vector<double>& values);

/// Scalar metrics averaged across seeds, keyed by metric name in a fixed order.
std::vector<std::pair<std::string, Stat>> aggregate(const std::vector<SeedResult>& results);

/// Label used in output file names, e.g. "dmp_T5" or "dmp_T5_p0.5".
std::string run_label(const ScenarioConfig& cfg);

nlohmann::json summary_json(const ScenarioConfig& cfg, const SeedResult& r, double max_degree_of_saturation);
std::string run_csv(const ScenarioConfig& cfg, const SeedResult& r);

/// Highest degree of saturation over intersections, at peak demand.
double max_degree_of_saturation(const Network& net, const ScenarioConfig& cfg);

/// Simulates all seeds and writes per-run CSV + summary JSON plus aggregates
/// into cfg.out_dir. Returns the results.
std::vector<SeedResult> run_and_write(const ScenarioConfig& cfg);

/// One scenario per variant, each at its default T unless cfg.period is set.
void compare_and_write(const ScenarioConfig& cfg, const std::vector<Variant>& variants);

struct SweepRow {
    std::string controller;
    double period = 0.0;
    double penetration = 1.0;
    bool connected_vehicles = false;
    double demand_vph = 0.0;  // NS entry level
    std::size_t seeds = 0;
    Stat delay;       // avg delay per vehicle
    Stat queue;       // avg queue per link
    Stat throughput;  // veh/h
    Stat total_delay; // avg total delay per vehicle
};

/// One row per (T, demand level); demand levels are constant NS entry rates.
std::vector<SweepRow> sweep_T(const ScenarioConfig& cfg, const std::vector<double>& periods,
                              const std::vector<double>& demand_levels);
/// D-MP (cfg.controller) rows per (p, level), then benchmark rows for the
/// other variants at full information with their default T.
std::vector<SweepRow> sweep_penetration(const ScenarioConfig& cfg, const std::vector<double>& penetrations,
                                        const std::vector<double>& demand_levels);

std::string sweep_csv(const ScenarioConfig& cfg, const std::vector<SweepRow>& rows);
void write_text(const std::filesystem::path& path, const std::string& text);
void ensure_output_dir(const std::filesystem::path& dir);

}  // namespace mpsim
