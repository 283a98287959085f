#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <mutex>
#include <sstream>

#include "entroflow/config.hpp"
#include "entroflow/control.hpp"
#include "entroflow/entropy.hpp"
#include "entroflow/error.hpp"
#include "entroflow/experiments.hpp"
#include "entroflow/fokker_planck.hpp"
#include "entroflow/iterate.hpp"
#include "entroflow/parallel.hpp"
#include "entroflow/score.hpp"
#include "entroflow/sde.hpp"

namespace py = pybind11;
using namespace entroflow;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_array(std::span<const double> v) {
    Array a(static_cast<py::ssize_t>(v.size()));
    std::copy(v.begin(), v.end(), a.mutable_data());
    return a;
}

std::span<const double> view(const Array& a) {
    if (a.ndim() != 1) throw ShapeError("expected a one-dimensional array");
    return {a.data(), static_cast<std::size_t>(a.size())};
}

Array to_matrix(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    Array a({static_cast<py::ssize_t>(rows), static_cast<py::ssize_t>(cols)});
    std::copy(flat.begin(), flat.end(), a.mutable_data());
    return a;
}

// Python callables run on worker threads; their exceptions are parked here and
// re-raised after the ensemble finishes.
struct CallbackErrors {
    std::mutex lock;
    std::string message;
};

std::function<double(double, double)> guarded(py::function fn, std::shared_ptr<CallbackErrors> errors) {
    return [fn = std::move(fn), errors](double t, double x) {
        py::gil_scoped_acquire gil;
        try {
            return fn(t, x).cast<double>();
        } catch (py::error_already_set& e) {
            std::lock_guard<std::mutex> g(errors->lock);
            if (errors->message.empty()) errors->message = e.what();
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
}

struct PyPolicy {
    ControlPolicy policy;
    std::shared_ptr<CallbackErrors> errors = std::make_shared<CallbackErrors>();
};

template <class F>
PathEnsemble run_ensemble(const PyPolicy& p, F&& simulate) {
    try {
        py::gil_scoped_release release;
        return simulate();
    } catch (const Error&) {
        std::lock_guard<std::mutex> g(p.errors->lock);
        if (!p.errors->message.empty()) {
            const std::string msg = std::move(p.errors->message);
            p.errors->message.clear();
            throw std::runtime_error("policy callback raised: " + msg);
        }
        throw;
    }
}

SimulationOptions sim_options(double horizon, double dt, std::size_t record_stride, std::uint64_t seed,
                              const Grid& grid) {
    SimulationOptions o;
    o.horizon = horizon;
    o.dt = dt;
    o.record_stride = record_stride;
    o.seed = seed;
    o.domain = grid.domain();
    return o;
}

py::dict outcome_dict(const CommandOutcome& o) {
    py::list checks;
    for (const Check& c : o.checks) {
        checks.append(py::dict(py::arg("module") = c.module, py::arg("name") = c.name, py::arg("pass") = c.pass,
                               py::arg("value") = c.value, py::arg("limit") = c.limit));
    }
    return py::dict(py::arg("pass") = o.pass(), py::arg("checks") = checks, py::arg("files") = o.files,
                    py::arg("notes") = py::module_::import("json").attr("loads")(o.notes.dump()),
                    py::arg("summary") = o.summary);
}

}  // namespace

PYBIND11_MODULE(_entroflow, m) {
    m.doc() = "Langevin-Smoluchowski diffusions: Fokker-Planck flows, scores, controlled reversals and entropy.";

    py::register_exception<Error>(m, "EntroflowError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

    m.def("version", &version_string);
    m.def("set_threads", &set_thread_limit, py::arg("threads"), "Cap worker threads (0 = runtime default).");

    py::class_<Grid>(m, "Grid")
        .def(py::init([](double lower, double upper, std::size_t points) {
                 return Grid(Interval{lower, upper}, points);
             }),
             py::arg("lower"), py::arg("upper"), py::arg("points"))
        .def_property_readonly("lower", &Grid::lower)
        .def_property_readonly("upper", &Grid::upper)
        .def_property_readonly("spacing", &Grid::spacing)
        .def("__len__", &Grid::size)
        .def("nodes", [](const Grid& g) { return to_array(g.nodes()); })
        .def("integrate", [](const Grid& g, const Array& v) { return g.integrate(view(v)); }, py::arg("values"))
        .def("interpolate", [](const Grid& g, const Array& v, double x) { return g.interpolate(view(v), x); },
             py::arg("values"), py::arg("x"))
        .def("__repr__", [](const Grid& g) {
            std::ostringstream s;
            s << "Grid(" << g.lower() << ", " << g.upper() << ", " << g.size() << ")";
            return s.str();
        });

    py::class_<Potential>(m, "Potential")
        .def(py::init([](const std::string& name, std::vector<double> params) {
                 return builtin_potential(name, params);
             }),
             py::arg("name"), py::arg("params") = std::vector<double>{})
        .def_readonly("label", &Potential::label)
        .def_readonly("params", &Potential::params)
        .def_readonly("hessian_lower_bound", &Potential::hessian_lower_bound)
        .def("__call__", &Potential::evaluate, py::arg("x"))
        .def("grad", &Potential::grad, py::arg("x"));

    py::class_<GibbsMeasure>(m, "GibbsMeasure")
        .def(py::init([](const Potential& p, const Grid& g) { return GibbsMeasure(p, g); }), py::arg("potential"),
             py::arg("grid"))
        .def_property_readonly("grid", &GibbsMeasure::grid)
        .def_property_readonly("finite", &GibbsMeasure::finite)
        .def_property_readonly("normalizing_constant", &GibbsMeasure::normalizing_constant)
        .def("density", &GibbsMeasure::density, py::arg("x"))
        .def("density_nodes", [](const GibbsMeasure& q) { return to_array(q.density_nodes()); })
        .def("probability", &GibbsMeasure::probability, py::arg("a"), py::arg("b"));

    m.def("gaussian_slice", [](const Grid& g, double mean, double var) { return to_array(gaussian_slice(g, mean, var)); },
          py::arg("grid"), py::arg("mean"), py::arg("variance"));

    py::class_<DensityField>(m, "DensityField")
        .def_readonly("grid", &DensityField::grid)
        .def_property_readonly("times", [](const DensityField& f) { return to_array(f.times); })
        .def_property_readonly("slices",
                               [](const DensityField& f) {
                                   std::vector<double> flat;
                                   for (const auto& s : f.slices) flat.insert(flat.end(), s.begin(), s.end());
                                   return to_matrix(flat, f.slices.size(), f.grid.size());
                               })
        .def("at", [](const DensityField& f, double t) { return to_array(f.at(t)); }, py::arg("t"))
        .def("mean_variance", [](const DensityField& f, double t) {
            const Moments mo = moments(f, t);
            return py::make_tuple(mo.mean, mo.variance);
        });

    m.def(
        "solve_fokker_planck",
        [](const Potential& pot, const Array& p0, const Grid& g, double horizon, double dt, std::size_t stride) {
            FokkerPlanckOptions o;
            o.horizon = horizon;
            o.dt = dt;
            o.store_stride = stride;
            const auto p = view(p0);
            py::gil_scoped_release release;
            return solve_fokker_planck(pot, p, g, o);
        },
        py::arg("potential"), py::arg("p0"), py::arg("grid"), py::arg("horizon"), py::arg("dt") = 1e-3,
        py::arg("store_stride") = 1, "Solve the Fokker-Planck equation from the density p0 on the grid nodes.");

    py::class_<ScoreField>(m, "ScoreField")
        .def_property_readonly("times", [](const ScoreField& s) { return to_array(s.times()); })
        .def("score", [](const ScoreField& s, double t, double x) { return s.score_at(t, x).value; }, py::arg("t"),
             py::arg("x"))
        .def("log_ratio", [](const ScoreField& s, double t, double x) { return s.log_ratio_at(t, x); }, py::arg("t"),
             py::arg("x"));

    m.def("build_score", [](const DensityField& f, const GibbsMeasure& q) { return build_score(f, q); },
          py::arg("field"), py::arg("gibbs"), "Log density ratio L = log(p/q) and its gradient at every stored time.");

    m.def("relative_entropy", [](const Array& p, const GibbsMeasure& q) { return relative_entropy(view(p), q); },
          py::arg("slice"), py::arg("gibbs"));
    m.def("total_variation",
          [](const Array& a, const Array& b, const Grid& g) { return total_variation(view(a), view(b), g); },
          py::arg("a"), py::arg("b"), py::arg("grid"));
    m.def("fisher_information", &fisher_information, py::arg("score"), py::arg("field"), py::arg("t"));

    m.def(
        "dissipation_check",
        [](const DensityField& f, const ScoreField& s, const GibbsMeasure& q, double t_min) {
            const EntropyReport r = dissipation_check(f, s, q, t_min);
            return py::dict(py::arg("times") = to_array(r.times), py::arg("entropy") = to_array(r.entropy),
                            py::arg("fisher") = to_array(r.fisher), py::arg("tv") = to_array(r.tv),
                            py::arg("relative_residual") = to_array(r.relative_residual),
                            py::arg("pinsker_margin") = to_array(r.pinsker_margin),
                            py::arg("integral_lhs") = r.integral_lhs, py::arg("integral_rhs") = r.integral_rhs,
                            py::arg("max_relative_residual") = r.max_relative_residual(),
                            py::arg("integral_relative_error") = r.integral_relative_error());
        },
        py::arg("field"), py::arg("score"), py::arg("gibbs"), py::arg("t_min") = 0.0);

    py::class_<PyPolicy>(m, "ControlPolicy")
        .def_static("zero", [] { return PyPolicy{ControlPolicy::zero()}; })
        .def_static("score_optimal", [] { return PyPolicy{ControlPolicy::score_optimal()}; })
        .def_static("lambda_optimal", [] { return PyPolicy{ControlPolicy::lambda_optimal()}; })
        .def_static("constant_shift", [](double c) { return PyPolicy{ControlPolicy::constant_shift(c)}; },
                    py::arg("c"))
        .def_static("sine_shift", [](double a) { return PyPolicy{ControlPolicy::sine_shift(a)}; },
                    py::arg("amplitude"))
        .def_static("parse", [](const std::string& text) { return PyPolicy{parse_policy(text)}; }, py::arg("text"))
        .def_static(
            "perturbed",
            [](const std::string& label, py::function delta, double bound) {
                PyPolicy p;
                p.policy = ControlPolicy::perturbed(label, guarded(std::move(delta), p.errors), bound);
                return p;
            },
            py::arg("label"), py::arg("delta"), py::arg("bound") = 10.0,
            "Optimal drift plus delta(t, x), where t is the forward-clock time.")
        .def_static(
            "custom",
            [](const std::string& label, py::function gamma, double bound) {
                PyPolicy p;
                p.policy = ControlPolicy::custom(label, guarded(std::move(gamma), p.errors), bound);
                return p;
            },
            py::arg("label"), py::arg("gamma"), py::arg("bound") = 10.0)
        .def_property_readonly("label", [](const PyPolicy& p) { return p.policy.label; });

    py::class_<PathEnsemble>(m, "PathEnsemble")
        .def_readonly("particles", &PathEnsemble::particles)
        .def_property_readonly("times", [](const PathEnsemble& e) { return to_array(e.times); })
        .def_property_readonly("states",
                               [](const PathEnsemble& e) { return to_matrix(e.states, e.times.size(), e.particles); })
        .def_property_readonly(
            "log_weight", [](const PathEnsemble& e) { return to_matrix(e.log_weight, e.times.size(), e.particles); })
        .def("states_at", [](const PathEnsemble& e, double t) { return to_array(e.states_at(t)); }, py::arg("t"))
        .def("final_states", [](const PathEnsemble& e) { return to_array(e.final_states()); })
        .def("final_log_weights", [](const PathEnsemble& e) { return to_array(e.final_log_weights()); })
        .def_property_readonly("clip_rate", &PathEnsemble::clip_rate);

    m.def(
        "sample_from_slice",
        [](const Grid& g, const Array& p, std::size_t n, std::uint64_t seed) {
            return to_array(sample_from_slice(g, view(p), n, seed));
        },
        py::arg("grid"), py::arg("slice"), py::arg("count"), py::arg("seed"));

    m.def(
        "simulate_forward",
        [](const Potential& pot, const Array& x0, const Grid& g, double horizon, double dt, std::size_t stride,
           std::uint64_t seed) {
            const auto x = view(x0);
            const SimulationOptions o = sim_options(horizon, dt, stride, seed, g);
            py::gil_scoped_release release;
            return simulate_forward(pot, x, o);
        },
        py::arg("potential"), py::arg("initial"), py::arg("grid"), py::arg("horizon"), py::arg("dt") = 1e-3,
        py::arg("record_stride") = 50, py::arg("seed") = 1);

    m.def(
        "simulate_reversed",
        [](const Potential& pot, const ScoreField& s, const PyPolicy& p, const Array& x0, double horizon, double dt,
           std::size_t stride, std::uint64_t seed) {
            const auto x = view(x0);
            const SimulationOptions o = sim_options(horizon, dt, stride, seed, s.grid());
            return run_ensemble(p, [&] { return simulate_reversed(pot, s, p.policy, x, o); });
        },
        py::arg("potential"), py::arg("score"), py::arg("policy"), py::arg("initial"), py::arg("horizon"),
        py::arg("dt") = 1e-3, py::arg("record_stride") = 50, py::arg("seed") = 1,
        "Controlled time-reversed diffusion started from samples of P(T).");

    m.def(
        "expected_cost",
        [](const PathEnsemble& e, const ScoreField& s, const DensityField& f, const GibbsMeasure& q, double t_min) {
            const CostReport r = expected_cost_reversed(e, s, f, q, t_min);
            return py::dict(py::arg("policy") = r.policy, py::arg("total") = r.total, py::arg("std_error") = r.std_error,
                            py::arg("terminal_term") = r.terminal_term, py::arg("energy_term") = r.energy_term,
                            py::arg("reference_entropy") = r.reference_entropy, py::arg("gap") = r.gap,
                            py::arg("clip_rate") = r.clip_rate);
        },
        py::arg("ensemble"), py::arg("score"), py::arg("field"), py::arg("gibbs"), py::arg("t_min") = 1e-3);

    m.def(
        "run_iteration",
        [](const Potential& pot, const GibbsMeasure& q, const Array& p0, double stage_horizon, std::size_t stages,
           double early_stop) {
            IterationOptions o;
            o.stage_horizon = stage_horizon;
            o.stages = stages;
            o.verify_stages.clear();
            o.early_stop = early_stop;
            const auto p = view(p0);
            IterationResult r;
            {
                py::gil_scoped_release release;
                r = run_iteration(pot, q, p, o);
            }
            py::list rows;
            for (const IterationStage& s : r.stages) {
                rows.append(py::dict(py::arg("stage") = s.stage, py::arg("direction") = s.direction,
                                     py::arg("entropy") = s.entropy, py::arg("tv") = s.tv,
                                     py::arg("next_entropy") = s.next_entropy));
            }
            return rows;
        },
        py::arg("potential"), py::arg("gibbs"), py::arg("p0"), py::arg("stage_horizon") = 0.5, py::arg("stages") = 6,
        py::arg("early_stop") = 1e-6, "Entropy and TV at the start of each alternating stage.");

    m.def(
        "ergodic_occupation",
        [](const Potential& pot, const GibbsMeasure& q, double a, double b, double horizon, double dt,
           std::size_t trajectories, std::uint64_t seed) {
            OccupationOptions o{horizon, dt, trajectories, seed};
            Occupation r;
            {
                py::gil_scoped_release release;
                r = ergodic_occupation(pot, q, Interval{a, b}, o);
            }
            return py::dict(py::arg("fraction") = r.fraction, py::arg("std_error") = r.std_error,
                            py::arg("gibbs_probability") = r.gibbs_probability);
        },
        py::arg("potential"), py::arg("gibbs"), py::arg("a"), py::arg("b"), py::arg("horizon") = 1e4,
        py::arg("dt") = 1e-2, py::arg("trajectories") = 16, py::arg("seed") = 1);

    m.def("subcommands", &subcommand_names);
    m.def(
        "run",
        [](const std::string& command, const std::string& out, const std::string& config,
           std::optional<std::uint64_t> seed, int threads) {
            RunRequest req;
            req.command = command;
            req.config_path = config;
            req.out = out;
            req.seed = seed;
            req.threads = threads;
            std::ostringstream log, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_subcommand(req, log, err);
            }
            return py::make_tuple(code, log.str(), err.str());
        },
        py::arg("command"), py::arg("out"), py::arg("config") = "", py::arg("seed") = py::none(),
        py::arg("threads") = 0, "Run a CLI subcommand; returns (exit code, stdout text, stderr text).");

    m.def(
        "run_config",
        [](const std::string& command, const std::string& text, const std::string& out, bool json) {
            const ExperimentConfig c = parse_config_text(text, json);
            CommandOutcome o;
            {
                py::gil_scoped_release release;
                if (command == "forward") o = cmd_forward(c, out);
                else if (command == "reverse") o = cmd_reverse(c, out);
                else if (command == "verify-control") o = cmd_verify_control(c, out);
                else if (command == "entropy-report") o = cmd_entropy_report(c, out);
                else if (command == "iterate") o = cmd_iterate(c, out);
                else if (command == "ergodic") o = cmd_ergodic(c, out);
                else throw ConfigError("unknown command '" + command + "'");
            }
            return outcome_dict(o);
        },
        py::arg("command"), py::arg("text"), py::arg("out"), py::arg("json") = false,
        "Run a command from TOML (or JSON) text; returns its checks and written files.");
}
