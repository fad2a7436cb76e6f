#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mhdlayer/asymptotics.hpp"
#include "mhdlayer/cli_harness.hpp"
#include "mhdlayer/errors.hpp"

namespace py = pybind11;
using namespace mhdlayer;

namespace {

py::array_t<double> as_array(const ScalarField& f) {
    const auto& g = f.grid();
    py::array_t<double> a({g.nz, g.nx});
    std::copy(f.data().begin(), f.data().end(), a.mutable_data());
    return a;
}

py::dict beta_dict(const BetaReport& b) {
    py::dict d;
    d["eps"] = b.eps;
    d["eps1"] = b.eps1;
    d["eps2"] = b.eps2;
    d["kappa"] = b.kappa;
    d["beta0"] = b.beta0;
    d["beta1"] = b.beta1;
    d["beta2"] = b.beta2;
    d["beta3"] = b.beta3;
    d["beta4"] = b.beta4;
    d["betabar0"] = b.betabar0;
    d["betabar1"] = b.betabar1;
    d["betabar2"] = b.betabar2;
    py::list side;
    for (const auto& s : b.side_conditions) side.append(py::make_tuple(s.name, s.value, s.satisfied));
    d["side_conditions"] = side;
    return d;
}

EpsilonFamily make_family(const std::string& law, double alpha, double kappa) {
    EpsilonFamily f;
    f.law = eps_law_from_string(law);
    f.alpha = alpha;
    f.kappa = kappa;
    return f;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Boundary-layer MHD channel laboratory";
    m.attr("__version__") = kToolVersion;

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_RuntimeError);
    py::register_exception<CflError>(m, "CflError", PyExc_RuntimeError);

    py::class_<GridSpec, std::shared_ptr<GridSpec>>(m, "Grid")
        .def(py::init([](int nx, int nz, double h, double stretch) {
                 return std::const_pointer_cast<GridSpec>(build_grid(nx, nz, h, stretch));
             }),
             py::arg("nx"), py::arg("nz"), py::arg("h") = 1.0, py::arg("stretch") = 0.0)
        .def_readonly("nx", &GridSpec::nx)
        .def_readonly("nz", &GridSpec::nz)
        .def_readonly("h", &GridSpec::h)
        .def_readonly("dx", &GridSpec::dx)
        .def_property_readonly("z", [](const GridSpec& g) { return py::array_t<double>(g.z.size(), g.z.data()); })
        .def_property_readonly("wz", [](const GridSpec& g) { return py::array_t<double>(g.wz.size(), g.wz.data()); });

    py::class_<IdealState>(m, "IdealState")
        .def(py::init([](const std::string& kind, int sign, const std::string& U, double U_scale, const std::string& B,
                         double B_scale, double amplitude, double h) {
                 return make_ideal_state(ideal_kind_from_string(kind), sign, {U, U_scale}, {B, B_scale}, amplitude,
                                         h);
             }),
             py::arg("kind"), py::arg("sign") = 1, py::arg("U") = "one_plus_half_cos", py::arg("U_scale") = 1.0,
             py::arg("B") = "one_plus_half_cos", py::arg("B_scale") = 1.0, py::arg("amplitude") = 0.0,
             py::arg("h") = 1.0)
        .def_readonly("sign", &IdealState::sign)
        .def_readonly("h", &IdealState::h)
        .def("eval",
             [](const IdealState& s, double x, double z, double t) {
                 const IdealValue v = eval_ideal(s, x, z, t);
                 return py::make_tuple(py::make_tuple(v.u0[0], v.u0[1]), py::make_tuple(v.b0[0], v.b0[1]), v.p0);
             },
             py::arg("x"), py::arg("z"), py::arg("t") = 0.0)
        .def("sample_u",
             [](const IdealState& s, const std::shared_ptr<GridSpec>& g) {
                 const VectorField u = sample_ideal_u(s, g);
                 return py::make_tuple(as_array(u.f1), as_array(u.f3));
             })
        .def("residual", [](const IdealState& s, const std::shared_ptr<GridSpec>& g) { return ideal_residual(s, g); });

    m.def(
        "lemma31_norms",
        [](const IdealState& s, double nu, int nx, int nz, int per_layer) {
            const CorrectorSet cs =
                build_correctors(s, {nu, nu, 1.0, CorrectorMode::exact_exponential}, make_cutoffs(s.h));
            const Lemma31Report r = lemma31_norms(cs, layer_resolving_grid(nx, nz, s.h, nu, per_layer), 0.0);
            return r.values;
        },
        py::arg("state"), py::arg("nu"), py::arg("nx") = 32, py::arg("nz") = 4097, py::arg("per_layer") = 40);

    m.def("beta_values", [](double eps, double e1, double e2, double kappa) {
        return beta_dict(beta_values(eps, e1, e2, kappa));
    });
    m.def(
        "beta_report",
        [](const std::string& law, double alpha, double kappa, double eps, double eps_max) {
            return beta_dict(beta_report(make_family(law, alpha, kappa), eps, eps_max));
        },
        py::arg("law"), py::arg("alpha"), py::arg("kappa"), py::arg("eps"), py::arg("eps_max"));
    m.def(
        "check_assumption",
        [](const std::string& law, double alpha, const std::vector<double>& eps_grid) {
            return check_assumption_2_1(make_family(law, alpha, 2.0), eps_grid).pass();
        },
        py::arg("law"), py::arg("alpha") = 0.6, py::arg("eps_grid"));
    m.def("fit_rate", [](const std::vector<std::pair<double, double>>& pairs, double predicted) {
        const RateFit f = fit_rate(pairs, predicted);
        return py::make_tuple(f.slope, f.r2, f.pass);
    });

    m.def(
        "run_experiment",
        [](const std::string& config_json, const std::string& output_dir) {
            ExperimentConfig c = parse_config(config_json);
            if (!output_dir.empty()) c.output_dir = output_dir;
            RunManifest r;
            {
                py::gil_scoped_release nogil;
                r = run_experiment(c);
            }
            py::dict d;
            d["verdict_pass"] = r.verdict_pass;
            d["failed_verdicts"] = r.failed_verdicts;
            d["wall_clock_s"] = r.wall_clock_s;
            py::dict files;
            for (const auto& f : r.files) files[py::str(f.path)] = f.sha256;
            d["files"] = files;
            return d;
        },
        py::arg("config_json"), py::arg("output_dir") = "");
    m.def("validate_config", [](const std::string& config_json) { return serialize_config(parse_config(config_json)).dump(); });
}
