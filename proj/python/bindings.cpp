#include "claimsfpr/aggregate.hpp"
#include "claimsfpr/error.hpp"
#include "claimsfpr/illnessdeath.hpp"
#include "claimsfpr/linkfit.hpp"
#include "claimsfpr/montecarlo.hpp"
#include "claimsfpr/pipeline.hpp"
#include "claimsfpr/synthdata.hpp"

#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace claimsfpr;

namespace {

Link parse_link(const std::string& name) {
    if (name == "logit") return Link::logit;
    if (name == "log") return Link::log;
    throw py::value_error("link must be 'logit' or 'log', got '" + name + "'");
}

// Accepts either a number or a callable f(t, a).
std::function<double(double, double)> as_field(const py::object& obj) {
    if (py::isinstance<py::float_>(obj) || py::isinstance<py::int_>(obj)) {
        const double v = obj.cast<double>();
        return [v](double, double) { return v; };
    }
    auto fn = obj.cast<std::function<double(double, double)>>();
    return fn;
}

CharacteristicInputs make_inputs(double p_obs_start, double p_obs_end, double i_obs_mid, double m_mid, double R_mid,
                                 double delta) {
    return CharacteristicInputs{p_obs_start, p_obs_end, i_obs_mid, m_mid, R_mid, delta};
}

py::dict quantile_dict(const std::array<double, 3>& q) {
    py::dict d;
    d["q025"] = q[0];
    d["q50"] = q[1];
    d["q975"] = q[2];
    return d;
}

}  // namespace

PYBIND11_MODULE(_claimsfpr, m) {
    m.doc() = "False-positive rates of diagnosis codes in claims data via the illness-death model";

    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

    m.def("link_forward", [](const std::string& link, double x) { return link_forward(parse_link(link), x); },
          py::arg("link"), py::arg("x"));
    m.def("link_inverse", [](const std::string& link, double y) { return link_inverse(parse_link(link), y); },
          py::arg("link"), py::arg("y"));

    m.def(
        "pde_rhs", [](double p, double i, double m_, double R) { return pde_rhs(EpiPoint{p, i, m_, R}); },
        py::arg("p"), py::arg("i"), py::arg("m"), py::arg("R"));

    m.def(
        "correct_proportion",
        [](double observed, double se, double sp) { return correct_proportion(observed, AccuracyPair(se, sp)); },
        py::arg("observed"), py::arg("se"), py::arg("sp"));
    m.def(
        "apparent_proportion",
        [](double value, double se, double sp) { return apparent_proportion(value, AccuracyPair(se, sp)); },
        py::arg("true_value"), py::arg("se"), py::arg("sp"));

    m.def(
        "integrate_characteristic",
        [](double p0, const py::object& incidence, const py::object& mortality, const py::object& ratio, double t0,
           double a0, double delta, int steps) {
            const RateFields fields{as_field(incidence), as_field(mortality), as_field(ratio)};
            const auto r = integrate_characteristic(p0, fields, t0, a0, delta, steps);
            return py::make_tuple(r.p, r.clamped);
        },
        py::arg("p0"), py::arg("incidence"), py::arg("mortality"), py::arg("ratio"), py::arg("t0"), py::arg("a0"),
        py::arg("delta"), py::arg("steps") = 64,
        "Integrate prevalence along t - a = const from (t0, a0) over delta years. Fields are numbers or f(t, a). "
        "Returns (p, clamped).");

    m.def(
        "specificity_residual",
        [](double sp, double se, double p_obs_start, double p_obs_end, double i_obs_mid, double m_mid, double R_mid,
           double delta) {
            return specificity_residual(sp, se, make_inputs(p_obs_start, p_obs_end, i_obs_mid, m_mid, R_mid, delta));
        },
        py::arg("sp"), py::arg("se"), py::arg("p_obs_start"), py::arg("p_obs_end"), py::arg("i_obs_mid"),
        py::arg("m_mid"), py::arg("R_mid"), py::arg("delta"));

    m.def(
        "solve_specificity",
        [](double se, double p_obs_start, double p_obs_end, double i_obs_mid, double m_mid, double R_mid,
           double delta) {
            const auto s = solve_specificity(se, make_inputs(p_obs_start, p_obs_end, i_obs_mid, m_mid, R_mid, delta));
            py::dict d;
            d["sp"] = s.sp;
            d["fpr"] = 1.0 - s.sp;
            d["flags"] = s.flags;
            d["flag_names"] = describe_flags(s.flags);
            d["solved"] = s.solved();
            d["sign_changes"] = s.sign_changes;
            return d;
        },
        py::arg("se"), py::arg("p_obs_start"), py::arg("p_obs_end"), py::arg("i_obs_mid"), py::arg("m_mid"),
        py::arg("R_mid"), py::arg("delta"));

    m.def(
        "sample_sensitivities",
        [](std::size_t n, double se_min, double se_max, std::uint64_t seed) {
            McConfig c;
            c.n_draws = n;
            c.se_min = se_min;
            c.se_max = se_max;
            c.seed = seed;
            return sample_sensitivities(c);
        },
        py::arg("n"), py::arg("se_min") = 0.5, py::arg("se_max") = 0.999, py::arg("seed") = 20220225);

    m.def(
        "empirical_quantiles",
        [](const std::vector<double>& samples, const std::vector<double>& probs) {
            return empirical_quantiles(samples, probs);
        },
        py::arg("samples"), py::arg("probs"));

    m.def("default_age_grid", &default_age_grid);

    m.def(
        "write_reference_scenario",
        [](const std::filesystem::path& directory, std::uint64_t seed, std::optional<double> noise) {
            auto spec = reference_scenario();
            spec.seed = seed;
            spec.noise_denominator = noise;
            const auto scenario = generate_scenario(spec);
            write_scenario(scenario, directory);
            return py::module_::import("json").attr("loads")(scenario.truth.to_json().dump());
        },
        py::arg("directory"), py::arg("seed") = 1, py::arg("noise") = py::none(),
        "Write the synthetic reference input tables and truth.json into directory; returns the truth document.");

    m.def(
        "run_pipeline",
        [](const std::filesystem::path& data_dir, const std::filesystem::path& out_dir, std::size_t draws,
           std::uint64_t seed, double se_min, double se_max, std::optional<std::vector<double>> ages,
           bool figures, unsigned workers) {
            RunConfig cfg;
            cfg.inputs = InputPaths::from_directory(data_dir);
            cfg.out_dir = out_dir;
            cfg.mc.n_draws = draws;
            cfg.mc.seed = seed;
            cfg.mc.se_min = se_min;
            cfg.mc.se_max = se_max;
            cfg.mc.workers = workers;
            if (ages) cfg.mc.age_grid = *ages;
            cfg.figures = figures;
            RunReport report;
            {
                py::gil_scoped_release release;
                report = run_pipeline(cfg);
            }
            py::dict counts;
            counts["male"] = quantile_dict(report.count_quantiles[0]);
            counts["female"] = quantile_dict(report.count_quantiles[1]);
            counts["total"] = quantile_dict(report.count_quantiles[2]);
            py::list outputs;
            for (const auto& p : report.outputs) outputs.append(p.string());
            py::dict d;
            d["counts"] = counts;
            d["outputs"] = outputs;
            d["metadata"] = py::module_::import("json").attr("loads")(report.metadata.dump());
            return d;
        },
        py::arg("data_dir"), py::arg("out_dir"), py::arg("draws") = 100000, py::arg("seed") = 20220225,
        py::arg("se_min") = 0.5, py::arg("se_max") = 0.999, py::arg("ages") = py::none(), py::arg("figures") = true,
        py::arg("workers") = 0);
}
