#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "mpsim/controllers.hpp"
#include "mpsim/metrics.hpp"
#include "mpsim/network.hpp"
#include "mpsim/oracle.hpp"
#include "mpsim/scenario.hpp"
#include "mpsim/simulation.hpp"

namespace py = pybind11;
using namespace mpsim;

namespace {

// Structured data crosses the boundary as JSON text; the Python wrapper decodes it.
ScenarioConfig config_from_text(const std::string& text) {
    return scenario_from_json(nlohmann::json::parse(text.empty() ? "{}" : text));
}

py::dict summary_dict(const RunSummary& s) {
    py::dict d;
    d["horizon_s"] = s.horizon_s;
    d["avg_delay_per_vehicle"] = s.avg_delay_per_vehicle;
    d["avg_waiting_time"] = s.avg_waiting_time;
    d["avg_total_delay"] = s.avg_total_delay;
    d["avg_queue_per_link"] = s.avg_queue_per_link;
    d["throughput_vph"] = s.throughput_vph;
    d["total_internal_delay"] = s.total_internal_delay;
    d["cumulative_waiting"] = s.cumulative_waiting;
    d["arrivals"] = s.arrivals;
    d["entered"] = s.entered;
    d["exited"] = s.exited;
    d["in_network"] = s.in_network;
    d["blocked"] = s.blocked;
    return d;
}

// Owns the network so the simulation's reference stays valid for the object's lifetime.
class PySimulation {
public:
    PySimulation(const std::string& config_json, std::uint64_t seed)
        : cfg_(config_from_text(config_json)), net_(build_grid(cfg_.grid)), sim_(net_, simulation_config(cfg_, seed)) {}

    void advance(std::int64_t steps) { sim_.run_steps(steps); }
    void run_until(double t) { sim_.run_until(t); }
    double time() const { return sim_.state().time; }
    std::int64_t in_network() const { return sim_.state().in_network(); }
    std::int64_t blocked() const { return sim_.state().blocked(); }
    std::int64_t arrivals() const { return sim_.state().arrivals; }
    std::int64_t exited() const { return sim_.state().exited; }
    double total_delay() const { return sim_.total_delay(); }
    py::dict summary() const { return summary_dict(sim_.summary()); }
    std::vector<int> active_phases() const {
        std::vector<int> out;
        for (const auto& s : sim_.state().signals.intersections) out.push_back(s.active);
        return out;
    }
    std::vector<int> decision_trace() const {
        std::vector<int> out;
        for (const auto& d : sim_.decisions()) out.push_back(d.chosen);
        return out;
    }
    std::vector<double> vehicles_in_system() const { return mpsim::vehicles_in_system(sim_.ledger()); }
    std::vector<double> pressures(int node) const { return sim_.controller_pressures(IntersectionId{node}); }

private:
    ScenarioConfig cfg_;
    Network net_;
    Simulation sim_;
};

}  // namespace

PYBIND11_MODULE(_mpsim, m) {
    m.doc() = "Grid traffic simulator with Max Pressure signal control";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<LookupError>(m, "LookupError", PyExc_KeyError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ArithmeticError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);

    m.def(
        "network_json",
        [](const std::string& config_json) { return to_json(build_grid(config_from_text(config_json).grid)).dump(); },
        py::arg("config_json") = "", "Grid of a scenario as JSON text.");
    m.def(
        "validate_network_json",
        [](const std::string& network_json) {
            std::vector<std::pair<std::string, std::string>> out;
            for (const auto& v : validate(network_from_json(nlohmann::json::parse(network_json))))
                out.emplace_back(v.entity, v.rule);
            return out;
        },
        py::arg("network_json"), "List of (entity, rule) violations; empty when the network is valid.");
    m.def(
        "scenario_json",
        [](const std::string& config_json) { return to_json(config_from_text(config_json)).dump(); },
        py::arg("config_json") = "", "Validated scenario with defaults filled in.");

    m.def("trapezoid_demand", &trapezoid_demand, py::arg("t"), py::arg("low") = 600.0, py::arg("high") = 900.0);
    m.def(
        "stability_diagnostic",
        [](const std::vector<double>& series, int window, double threshold) {
            const auto r = stability_diagnostic(series, window, threshold);
            return py::make_tuple(r.slope, std::string(to_string(r.verdict)));
        },
        py::arg("series"), py::arg("window") = kDefaultStabilityWindow,
        py::arg("threshold") = kDefaultStabilityThreshold);
    m.def(
        "degrees_of_saturation",
        [](const std::string& config_json, std::optional<double> t) {
            const auto cfg = config_from_text(config_json);
            const auto net = build_grid(cfg.grid);
            const double at = t.value_or(cfg.demand.kind == DemandKind::trapezoid ? 7200.0 : 0.0);
            const auto flows = analytic_flows(net, entry_demand_at(net, cfg.demand, at));
            std::vector<double> out;
            for (const auto& ix : net.intersections) out.push_back(degree_of_saturation(net, ix.id, flows));
            return out;
        },
        py::arg("config_json") = "", py::arg("t") = py::none());

    m.def("select_phase", [](const std::vector<double>& p, int active) { return select_phase(p, active); },
          py::arg("pressures"), py::arg("active"));
    m.def(
        "saturation_factor",
        [](double period, double lost_time, bool active) {
            ControllerSpec s;
            s.period = period;
            s.lost_time = lost_time;
            return saturation_factor(s, active);
        },
        py::arg("period"), py::arg("lost_time"), py::arg("active"));
    m.def(
        "default_period", [](const std::string& v) { return default_period(variant_from_string(v)); },
        py::arg("controller"));

    m.def(
        "run_seed",
        [](const std::string& config_json, std::uint64_t seed) {
            const auto cfg = config_from_text(config_json);
            const auto net = build_grid(cfg.grid);
            SeedResult r;
            {
                py::gil_scoped_release release;
                r = run_seed(net, cfg, seed);
            }
            py::dict d = summary_dict(r.summary);
            if (r.stability) {
                d["stability_slope"] = r.stability->slope;
                d["stability_verdict"] = std::string(to_string(r.stability->verdict));
            }
            d["run_csv"] = run_csv(cfg, r);
            return d;
        },
        py::arg("config_json"), py::arg("seed"), "Simulates one seed and returns its summary.");
    m.def(
        "run_and_write",
        [](const std::string& config_json) {
            const auto cfg = config_from_text(config_json);
            py::gil_scoped_release release;
            return run_and_write(cfg).size();
        },
        py::arg("config_json"), "Writes run CSV, summary and aggregate files; returns the number of seeds.");

    m.def(
        "tiny_instance_bound",
        [](std::uint64_t seed, int vehicles, int decisions, double period) {
            const auto inst = oracle::random_tiny_instance(seed, vehicles, decisions, period);
            const auto best = oracle::exhaustive_best_schedule(inst);
            py::dict d;
            d["best_delay"] = best.delay;
            d["best_phases"] = best.phases;
            for (Variant v : kAllVariants) d[py::str(std::string(to_string(v)))] = oracle::max_pressure_delay(inst, v);
            return d;
        },
        py::arg("seed"), py::arg("vehicles"), py::arg("decisions") = 6, py::arg("period") = 5.0);

    py::class_<PySimulation>(m, "Simulation")
        .def(py::init<const std::string&, std::uint64_t>(), py::arg("config_json") = "", py::arg("seed") = 0)
        .def("advance", &PySimulation::advance, py::arg("steps") = 1)
        .def("run_until", &PySimulation::run_until, py::arg("t"))
        .def_property_readonly("time", &PySimulation::time)
        .def_property_readonly("in_network", &PySimulation::in_network)
        .def_property_readonly("blocked", &PySimulation::blocked)
        .def_property_readonly("arrivals", &PySimulation::arrivals)
        .def_property_readonly("exited", &PySimulation::exited)
        .def_property_readonly("total_delay", &PySimulation::total_delay)
        .def("summary", &PySimulation::summary)
        .def("active_phases", &PySimulation::active_phases)
        .def("decision_trace", &PySimulation::decision_trace)
        .def("vehicles_in_system", &PySimulation::vehicles_in_system)
        .def("pressures", &PySimulation::pressures, py::arg("intersection"));
}
