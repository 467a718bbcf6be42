#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ietlab/distrib.hpp"
#include "ietlab/error.hpp"
#include "ietlab/experiments.hpp"
#include "ietlab/iet.hpp"
#include "ietlab/io.hpp"
#include "ietlab/orbit.hpp"
#include "ietlab/parallel.hpp"
#include "ietlab/rauzy.hpp"
#include "ietlab/suspension.hpp"

namespace py = pybind11;
using namespace ietlab;

namespace {

py::array_t<std::int64_t> to_numpy(const IntMatrix& m) {
  const auto d = static_cast<py::ssize_t>(m.size());
  py::array_t<std::int64_t> out({d, d});
  auto v = out.mutable_unchecked<2>();
  for (py::ssize_t i = 0; i < d; ++i)
    for (py::ssize_t j = 0; j < d; ++j) v(i, j) = m(i, j);
  return out;
}

std::vector<double> as_vector(std::span<const double> s) { return {s.begin(), s.end()}; }
std::vector<int> as_vector(std::span<const int> s) { return {s.begin(), s.end()}; }

EmpiricalDistribution dist(const std::vector<double>& s) { return empirical(s); }

py::tuple point(SurfacePoint p) { return py::make_tuple(p.x, p.y); }

ExperimentConfig config_from(const std::string& text) { return parse_config(json::parse(text)); }

py::dict row_dict(const LimitRow& r) {
  py::dict d;
  d["n"] = r.n;
  d["mean"] = r.mean;
  d["var"] = r.var;
  d["d_kr"] = r.d_kr;
  d["d_lp"] = r.d_lp;
  d["var_slope"] = r.var_slope;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Interval exchanges, Rauzy-Veech renormalization and limit laws of Birkhoff sums";

  static PyObject* error_type = nullptr;
  error_type = py::exception<Error>(m, "IetlabError", PyExc_ValueError).ptr();  // kept alive by the module
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.def("version", &version_string);
  m.def("hardware_threads", &hardware_threads);

  // -- exchanges and observables ---------------------------------------------
  py::class_<Iet>(m, "Iet")
      .def(py::init([](const std::vector<double>& lengths, const std::vector<int>& perm) { return Iet::make(lengths, perm); }),
           py::arg("lengths"), py::arg("perm"), "Lengths of any positive scale and a one-based permutation.")
      .def_static("from_zero_based",
                  [](const std::vector<double>& l, const std::vector<int>& p) { return Iet::from_zero_based(l, p); })
      .def_static("rotation", &Iet::rotation, py::arg("alpha"))
      .def_property_readonly("size", &Iet::size)
      .def_property_readonly("lengths", [](const Iet& t) { return as_vector(t.lengths()); })
      .def_property_readonly("lefts", [](const Iet& t) { return as_vector(t.lefts()); })
      .def_property_readonly("offsets", [](const Iet& t) { return as_vector(t.offsets()); })
      .def_property_readonly("perm", [](const Iet& t) { return as_vector(t.perm()); }, "Zero-based bottom positions.")
      .def_property_readonly("perm_one_based", &Iet::perm_one_based)
      .def("interval_index", &Iet::interval_index)
      .def("apply", &Iet::apply)
      .def("apply_inverse", &Iet::apply_inverse)
      .def("__call__", &Iet::apply)
      .def("__len__", &Iet::size)
      .def("__eq__", [](const Iet& a, const Iet& b) { return a == b; })
      .def("to_json", [](const Iet& t) { return to_json(t).dump(); })
      .def("__repr__", [](const Iet& t) { return "Iet(" + to_json(t).dump() + ")"; });

  m.def("is_irreducible", [](const std::vector<int>& p) { return is_irreducible(p); }, py::arg("perm_zero_based"));

  py::class_<PiecewiseFunction>(m, "PiecewiseFunction")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("a"), py::arg("b"))
      .def_static("constant", &PiecewiseFunction::constant)
      .def_static("piecewise_constant",
                  [](const std::vector<double>& v) { return PiecewiseFunction::piecewise_constant(v); })
      .def_property_readonly("a", [](const PiecewiseFunction& f) { return as_vector(f.a()); })
      .def_property_readonly("b", [](const PiecewiseFunction& f) { return as_vector(f.b()); })
      .def_property_readonly("lipschitz", &PiecewiseFunction::lipschitz)
      .def("__call__", [](const PiecewiseFunction& f, const Iet& t, double x) { return f(t, x); })
      .def("centered", &PiecewiseFunction::centered)
      .def("scaled", &PiecewiseFunction::scaled)
      .def("shifted", &PiecewiseFunction::shifted)
      .def("sup_abs", &PiecewiseFunction::sup_abs)
      .def("__eq__", [](const PiecewiseFunction& a, const PiecewiseFunction& b) { return a == b; })
      .def("__repr__", [](const PiecewiseFunction& f) { return "PiecewiseFunction(" + to_json(f).dump() + ")"; });

  m.def("mean_value", &mean_value, py::arg("f"), py::arg("iet"));
  m.def("birkhoff_sum", [](const Iet& t, const PiecewiseFunction& f, double x, std::uint64_t n) { return birkhoff_sum(t, f, x, n); },
        py::arg("iet"), py::arg("f"), py::arg("x"), py::arg("n"));
  m.def("iterate", &iterate, py::arg("iet"), py::arg("x"), py::arg("n"));
  m.def(
      "sample_points",
      [](const Iet& t, std::size_t count, std::uint64_t seed, bool iid) {
        return sample_points(t, count, seed, iid ? SampleStrategy::Iid : SampleStrategy::GridJitter);
      },
      py::arg("iet"), py::arg("count"), py::arg("seed"), py::arg("iid") = false);
  m.def(
      "birkhoff_sums",
      [](const Iet& t, const std::vector<PiecewiseFunction>& fs, const std::vector<double>& xs,
         const std::vector<std::uint64_t>& ns, unsigned threads) {
        BirkhoffTable tab;
        {
          py::gil_scoped_release release;
          tab = birkhoff_sums(t, fs, xs, ns, threads);
        }
        py::array_t<double> out({tab.points, tab.functions, tab.checkpoints});
        std::copy(tab.values.begin(), tab.values.end(), out.mutable_data());
        return out;
      },
      py::arg("iet"), py::arg("functions"), py::arg("points"), py::arg("checkpoints"), py::arg("threads") = 1,
      "Array of shape (points, functions, checkpoints) holding S_n f(x).");
  m.def("log_spaced", &log_spaced, py::arg("lo"), py::arg("hi"), py::arg("count"));

  // -- renormalization --------------------------------------------------------
  py::class_<RauzyStep>(m, "RauzyStep")
      .def_property_readonly("move", [](const RauzyStep& s) { return s.move == Move::Top ? "top" : "bottom"; })
      .def_property_readonly("matrix", [](const RauzyStep& s) { return to_numpy(s.matrix); })
      .def_readonly("successor", &RauzyStep::successor)
      .def_readonly("unnormalized_lengths", &RauzyStep::unnormalized_lengths)
      .def_readonly("log_scale", &RauzyStep::log_scale)
      .def_readonly("steps", &RauzyStep::steps);
  m.def("rauzy_step", &rauzy_step, py::arg("iet"));
  m.def("zorich_block", &zorich_block, py::arg("iet"));

  py::class_<OseledetsFrame>(m, "OseledetsFrame")
      .def_readonly("dim", &OseledetsFrame::dim)
      .def_property_readonly("frame",
                             [](const OseledetsFrame& f) {
                               const auto d = static_cast<py::ssize_t>(f.dim);
                               py::array_t<double> out({d, d});
                               auto v = out.mutable_unchecked<2>();
                               for (py::ssize_t j = 0; j < d; ++j)
                                 for (py::ssize_t i = 0; i < d; ++i) v(i, j) = f.frame[j * d + i];
                               return out;
                             })
      .def_readonly("log_diagonal", &OseledetsFrame::log_diagonal)
      .def_readonly("blocks", &OseledetsFrame::blocks)
      .def_readonly("elementary_steps", &OseledetsFrame::elementary_steps)
      .def_readonly("total_log_scale", &OseledetsFrame::total_log_scale)
      .def_readonly("theta_hat", &OseledetsFrame::theta_hat);
  m.def(
      "cocycle_orbit",
      [](const Iet& t, std::uint64_t k, std::uint64_t frame_seed) {
        py::gil_scoped_release release;
        return cocycle_orbit(t, k, frame_seed);
      },
      py::arg("iet"), py::arg("blocks"), py::arg("frame_seed") = 0);

  py::class_<SecondDirection>(m, "SecondDirection")
      .def_readonly("direction", &SecondDirection::direction)
      .def_readonly("perron", &SecondDirection::perron)
      .def_readonly("theta_hat", &SecondDirection::theta_hat)
      .def_readonly("gap", &SecondDirection::gap)
      .def_readonly("gap_warning", &SecondDirection::gap_warning)
      .def_readonly("blocks", &SecondDirection::blocks)
      .def_readonly("log_scale", &SecondDirection::log_scale);
  m.def("second_direction_details", &second_direction_details, py::arg("iet"), py::arg("blocks"),
        py::arg("min_log_scale") = 30.0, py::arg("frame_seed") = 0);
  m.def("second_direction", &second_direction, py::arg("iet"), py::arg("blocks"));
  m.def("cocycle_function", [](const std::vector<double>& v, const Iet& t) { return cocycle_function(v, t); },
        py::arg("v"), py::arg("iet"));

  py::class_<DegeneracyResult>(m, "DegeneracyResult")
      .def_readonly("degenerate", &DegeneracyResult::degenerate)
      .def_readonly("i_hat", &DegeneracyResult::i_hat)
      .def_readonly("beta", &DegeneracyResult::beta)
      .def_readonly("theta_hat", &DegeneracyResult::theta_hat);
  m.def(
      "degeneracy_index",
      [](const Iet& t, const PiecewiseFunction& f, std::uint64_t nmax, const std::vector<double>& theta, unsigned threads,
         std::uint64_t seed) {
        py::gil_scoped_release release;
        return degeneracy_index(t, f, nmax, theta, threads, seed);
      },
      py::arg("iet"), py::arg("f"), py::arg("nmax"), py::arg("theta_hat") = std::vector<double>{}, py::arg("threads") = 1,
      py::arg("seed") = 0);

  // -- suspensions ------------------------------------------------------------
  py::class_<Suspension>(m, "Suspension")
      .def(py::init([](const Iet& base, std::vector<double> heights, std::optional<std::vector<double>> tau) {
             return Suspension::make(base, std::move(heights), std::move(tau));
           }),
           py::arg("base"), py::arg("heights"), py::arg("tau") = py::none())
      .def_property_readonly("base", &Suspension::base)
      .def_property_readonly("heights", [](const Suspension& s) { return as_vector(s.heights()); })
      .def_property_readonly("tau", [](const Suspension& s) { return as_vector(s.tau()); })
      .def_property_readonly("area", &Suspension::area)
      .def_property_readonly("min_height", &Suspension::min_height)
      .def_property_readonly("max_height", &Suspension::max_height)
      .def("normalized", &Suspension::normalized)
      .def("roof", &Suspension::roof)
      .def("to_json", [](const Suspension& s) { return to_json(s).dump(); });
  m.def("canonical_suspension", &canonical_suspension, py::arg("iet"));
  m.def("valid_suspension_data",
        [](const std::vector<double>& tau, const std::vector<int>& perm) { return valid_suspension_data(tau, perm); });
  m.def(
      "flow", [](const Suspension& s, std::pair<double, double> p, double t) { return point(flow(s, {p.first, p.second}, t)); },
      py::arg("suspension"), py::arg("point"), py::arg("time"));
  m.def("return_time", &return_time, py::arg("suspension"), py::arg("x"), py::arg("n"));
  m.def(
      "ergodic_integral",
      [](const Suspension& s, const PiecewiseFunction& f, std::pair<double, double> p, double t) {
        return ergodic_integral(s, f, SurfacePoint{p.first, p.second}, t);
      },
      py::arg("suspension"), py::arg("f"), py::arg("point"), py::arg("time"));
  m.def("surface_integral", [](const Suspension& s, const PiecewiseFunction& f) { return surface_integral(s, make_psi(s, f)); },
        py::arg("suspension"), py::arg("f"), "Integral over the surface of f(x) / h(x).");
  m.def("weak_lip_bound", &weak_lip_bound, py::arg("suspension"), py::arg("f"));

  py::class_<DensityGrid>(m, "DensityGrid")
      .def_readonly("rectangles", &DensityGrid::rectangles)
      .def_readonly("nx", &DensityGrid::nx)
      .def_readonly("ny", &DensityGrid::ny)
      .def_property_readonly("rho",
                             [](const DensityGrid& g) {
                               py::array_t<double> out({g.rectangles, g.nx, g.ny});
                               std::copy(g.rho.begin(), g.rho.end(), out.mutable_data());
                               return out;
                             })
      .def_readonly("cell_area", &DensityGrid::cell_area)
      .def("sup_deviation", &DensityGrid::sup_deviation)
      .def("total_mass", &DensityGrid::total_mass);
  m.def(
      "density_field",
      [](const Suspension& s, double time, std::size_t nx, std::size_t ny, std::size_t samples, std::uint64_t seed,
         unsigned threads, const std::string& estimator) {
        DensityEstimator est;
        if (estimator == "arc-average") est = DensityEstimator::ArcAverage;
        else if (estimator == "sampled") est = DensityEstimator::Sampled;
        else throw Error(Errc::InvalidArgument, "estimator must be 'arc-average' or 'sampled'");
        py::gil_scoped_release release;
        return density_field(s, time, nx, ny, samples, seed, threads, est);
      },
      py::arg("suspension"), py::arg("time"), py::arg("nx") = 4, py::arg("ny") = 4, py::arg("samples") = 1'000'000,
      py::arg("seed") = 1, py::arg("threads") = 1, py::arg("estimator") = "arc-average");

  // -- distributions ----------------------------------------------------------
  m.def("standardize", [](const std::vector<double>& s) { return as_vector(standardize(dist(s)).samples()); });
  m.def("d_kr", [](const std::vector<double>& p, const std::vector<double>& q) { return d_kr(dist(p), dist(q)); });
  m.def(
      "d_lp", [](const std::vector<double>& p, const std::vector<double>& q, double tol) { return d_lp(dist(p), dist(q), tol); },
      py::arg("p"), py::arg("q"), py::arg("tol") = 1e-9);
  m.def(
      "d_levy",
      [](const std::vector<double>& p, const std::vector<double>& q, double tol) { return d_levy(dist(p), dist(q), tol); },
      py::arg("p"), py::arg("q"), py::arg("tol") = 1e-9);

  // -- experiments (configs and summaries travel as JSON text) ---------------
  m.def("random_iet", [](std::size_t d, std::uint64_t seed) { return random_iet(d, seed); }, py::arg("d"), py::arg("seed"));
  m.def("random_zero_mean_function", &random_zero_mean_function, py::arg("iet"), py::arg("seed"));
  m.def(
      "run_limit",
      [](const std::string& config, unsigned threads) {
        const ExperimentConfig c = config_from(config);
        LimitResult r;
        {
          py::gil_scoped_release release;
          r = run_limit(c, threads);
        }
        py::list rows;
        for (const auto& row : r.rows) rows.append(row_dict(row));
        return py::make_tuple(rows, r.pass, r.summary.dump());
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "run_verify",
      [](const std::string& config, unsigned threads) {
        const ExperimentConfig c = config_from(config);
        py::gil_scoped_release release;
        const VerifyResult r = run_verify(c, threads);
        return std::make_pair(r.pass, r.summary.dump());
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "run_lyapunov",
      [](const std::string& config, unsigned threads) {
        const ExperimentConfig c = config_from(config);
        py::gil_scoped_release release;
        const LyapunovResult r = run_lyapunov(c, threads);
        return std::make_pair(r.pass, r.summary.dump());
      },
      py::arg("config"), py::arg("threads") = 1);
  m.def(
      "run_command",
      [](const std::string& command, const std::string& config, const std::string& out, unsigned threads) {
        ExperimentConfig c;
        try {
          c = config_from(config);
        } catch (const json::exception&) {
          return 3;
        } catch (const Error& e) {
          return exit_code_for(e.code());
        }
        py::gil_scoped_release release;
        if (command == "limit") return cmd_limit(c, out, threads);
        if (command == "verify") return cmd_verify(c, out, threads);
        if (command == "lyapunov") return cmd_lyapunov(c, out, threads);
        return 3;
      },
      py::arg("command"), py::arg("config"), py::arg("out"), py::arg("threads") = 1,
      "Runs a subcommand writing report files into `out`; returns the CLI exit code.");
}
