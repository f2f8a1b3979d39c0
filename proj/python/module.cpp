// Python bindings for the simulation engine and the verification toolbox.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bbm/analytic.hpp"
#include "bbm/bridge.hpp"
#include "bbm/engine.hpp"
#include "bbm/experiments.hpp"
#include "bbm/observables.hpp"
#include "bbm/version.hpp"

namespace py = pybind11;

namespace {

bbm::RunResult run_simple(double T, std::uint64_t seed, std::vector<double> snapshot_times,
                          const std::string& mode, double dt, double sample_dt,
                          const std::string& prune, double prune_param, double enable_after,
                          std::uint64_t particle_limit, bool record_genealogy) {
    bbm::RunConfig cfg;
    cfg.T = T;
    cfg.root_stream = bbm::make_root_key(seed);
    cfg.snapshot_times = snapshot_times.empty() ? std::vector<double>{T} : std::move(snapshot_times);
    cfg.dt = dt;
    cfg.sample_dt = sample_dt;
    cfg.hard_particle_limit = particle_limit;
    cfg.record_genealogy = record_genealogy;
    if (mode == "event") cfg.mode = bbm::RunMode::event;
    else if (mode == "grid") cfg.mode = bbm::RunMode::grid;
    else throw std::invalid_argument("mode must be 'event' or 'grid'");
    if (prune == "none") cfg.prune.mode = bbm::PruneMode::none;
    else if (prune == "line_barrier") { cfg.prune.mode = bbm::PruneMode::line_barrier; cfg.prune.A = prune_param; }
    else if (prune == "gap_to_max") { cfg.prune.mode = bbm::PruneMode::gap_to_max; cfg.prune.L = prune_param; }
    else if (prune == "cap_count") { cfg.prune.mode = bbm::PruneMode::cap_count; cfg.prune.N_max = static_cast<std::uint64_t>(prune_param); }
    else throw std::invalid_argument("unknown prune mode '" + prune + "'");
    cfg.prune.enable_after = enable_after;
    return bbm::run(cfg);
}

} // namespace

PYBIND11_MODULE(_bbmlab, m) {
    m.doc() = "branching Brownian motion simulation and verification toolbox";
    m.attr("__version__") = bbm::kVersion;

    m.def("centering", &bbm::centering, py::arg("t"),
          "front centering sqrt(2) t - (3 / (2 sqrt(2))) log t");
    m.def("envelope", py::overload_cast<double, double, double>(&bbm::envelope),
          py::arg("t"), py::arg("alpha"), py::arg("s"));
    m.def("normal_cdf", &bbm::normal_cdf, py::arg("z"));
    m.def("normal_icdf", &bbm::normal_icdf, py::arg("p"));

    py::class_<bbm::PopulationSnapshot>(m, "PopulationSnapshot")
        .def_readonly("time", &bbm::PopulationSnapshot::time)
        .def_readonly("entries", &bbm::PopulationSnapshot::entries);

    py::class_<bbm::RunStats>(m, "RunStats")
        .def_readonly("nodes_created", &bbm::RunStats::nodes_created)
        .def_readonly("branch_events", &bbm::RunStats::branch_events)
        .def_readonly("pruned_kills", &bbm::RunStats::pruned_kills)
        .def_readonly("max_alive", &bbm::RunStats::max_alive)
        .def_readonly("final_alive", &bbm::RunStats::final_alive);

    py::class_<bbm::RunResult>(m, "RunResult")
        .def_readonly("snapshots", &bbm::RunResult::snapshots)
        .def_readonly("stats", &bbm::RunResult::stats);

    m.def("run", &run_simple, py::arg("T"), py::arg("seed") = 1,
          py::arg("snapshot_times") = std::vector<double>{}, py::arg("mode") = "event",
          py::arg("dt") = 0.01, py::arg("sample_dt") = 0.0, py::arg("prune") = "none",
          py::arg("prune_param") = 0.0, py::arg("enable_after") = 0.0,
          py::arg("particle_limit") = std::uint64_t{20'000'000},
          py::arg("record_genealogy") = false,
          "simulate one realization and return the requested snapshots");

    m.def("max_offset",
          [](const bbm::PopulationSnapshot& s) { return bbm::max_offset(s).offset; },
          py::arg("snapshot"), "centered front position M_t - m_t");
    m.def("derivative_martingale", &bbm::derivative_martingale, py::arg("snapshot"));

    m.def("bridge_nonneg_prob", &bbm::bridge::bridge_nonneg_prob,
          py::arg("t"), py::arg("x"), py::arg("y"));
    m.def("bridge_subinterval_nonneg_prob", &bbm::bridge::bridge_subinterval_nonneg_prob,
          py::arg("r"), py::arg("gamma"), py::arg("y"));
    m.def("bridge_two_point_line_bound", &bbm::bridge::bridge_two_point_line_bound,
          py::arg("Z1"), py::arg("Z2"), py::arg("r1"), py::arg("r2"), py::arg("t"));

    m.def("many_to_one_check",
          [](double t, std::uint64_t trials, std::uint64_t seed, double threshold, bool constant) {
              auto f = constant ? bbm::bridge::Functional::constant(threshold)
                                : bbm::bridge::Functional::terminal_ge(threshold);
              auto c = bbm::bridge::many_to_one_check(f, t, trials, bbm::make_root_key(seed));
              return py::dict(py::arg("lhs") = c.lhs, py::arg("lhs_se") = c.lhs_se,
                              py::arg("rhs") = c.rhs, py::arg("z") = c.z);
          },
          py::arg("t"), py::arg("trials"), py::arg("seed") = 1, py::arg("threshold") = 1.0,
          py::arg("constant") = true);

    m.def("subsequence_average_check",
          [](std::vector<double> times, std::vector<double> values, std::vector<double> schedule) {
              auto rows = bbm::lab::subsequence_average_check(times, values, schedule);
              py::list out;
              for (const auto& r : rows)
                  out.append(py::dict(py::arg("n") = r.n, py::arg("s_n") = r.s_n,
                                      py::arg("s_n1") = r.s_n1,
                                      py::arg("sup_abs_rho") = r.sup_abs_rho,
                                      py::arg("bound") = r.bound, py::arg("ok") = r.ok));
              return out;
          },
          py::arg("times"), py::arg("values"), py::arg("schedule"));
}
