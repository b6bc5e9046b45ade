#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <optional>
#include <sstream>

#include "ajreserve/errors.hpp"
#include "ajreserve/workflow.hpp"

namespace py = pybind11;
using namespace ajreserve;

namespace {

KernelSpec kernel_spec(const std::vector<std::string>& names) {
  KernelSpec spec;
  spec.families.clear();
  for (const auto& n : names) spec.families.push_back(parse_kernel_family(n));
  if (spec.families.empty()) throw ValidationError("kernel list is empty");
  return spec;
}

std::vector<Feature> features(const std::vector<std::string>& names) {
  std::vector<Feature> out;
  for (const auto& n : names) out.push_back(parse_feature(n));
  return out;
}

Triangle triangle_from_rows(const std::vector<std::vector<std::optional<double>>>& rows, bool cumulative) {
  const int dim = static_cast<int>(rows.size());
  Triangle t(dim, cumulative ? TriangleKind::CumulativePaid : TriangleKind::Count);
  for (int r = 1; r <= dim; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r - 1)];
    for (int c = 1; c <= dim; ++c) {
      if (!t.observed(r, c)) continue;
      if (static_cast<std::size_t>(c) > row.size() || !row[static_cast<std::size_t>(c - 1)])
        throw ValidationError("missing observed cell (" + std::to_string(r) + ", " + std::to_string(c) + ")");
      t.set(r, c, *row[static_cast<std::size_t>(c - 1)]);
    }
  }
  return t;
}

py::dict report_dict(const ReserveReport& r) {
  py::dict d;
  d["y_closed"] = r.y_closed;
  d["y_rbns"] = r.y_rbns;
  d["y_ibnr"] = r.y_ibnr;
  d["y_tot"] = r.y_tot;
  d["paid_to_date"] = r.paid_to_date;
  d["reserve"] = r.reserve;
  d["var_rbns"] = r.var_rbns;
  d["var_ibnr"] = r.var_ibnr;
  d["sd_tot"] = r.sd_tot;
  d["n_closed"] = r.n_closed;
  d["n_rbns"] = r.n_rbns;
  d["n_beyond_support"] = r.n_beyond_support;
  d["n_tail_truncated"] = r.n_tail_truncated;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Claim-size-clock Aalen-Johansen reserving";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());

  py::class_<ClaimRecord>(m, "ClaimRecord")
      .def(py::init<>())
      .def(py::init([](std::string id, int type, int u, int t, int dev, double paid, bool settled) {
             return ClaimRecord{std::move(id), type, u, t, dev, paid, settled};
           }),
           py::arg("claim_id"), py::arg("claim_type"), py::arg("accident_period"), py::arg("reporting_delay"),
           py::arg("development_period"), py::arg("incremental_paid"), py::arg("settled"))
      .def_readwrite("claim_id", &ClaimRecord::claim_id)
      .def_readwrite("claim_type", &ClaimRecord::claim_type)
      .def_readwrite("accident_period", &ClaimRecord::accident_period)
      .def_readwrite("reporting_delay", &ClaimRecord::reporting_delay)
      .def_readwrite("development_period", &ClaimRecord::development_period)
      .def_readwrite("incremental_paid", &ClaimRecord::incremental_paid)
      .def_readwrite("settled", &ClaimRecord::settled)
      .def("__repr__", [](const ClaimRecord& r) {
        return "ClaimRecord(" + r.claim_id + ", U=" + std::to_string(r.accident_period) +
               ", dev=" + std::to_string(r.development_period) + ")";
      });

  m.def(
      "read_claims",
      [](const std::filesystem::path& path, int months_per_period) {
        return read_claim_records_file(path.string(), IngestOptions{months_per_period});
      },
      py::arg("path"), py::arg("months_per_period") = 12);
  m.def(
      "write_claims",
      [](const std::filesystem::path& path, const std::vector<ClaimRecord>& records) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write " + path.string());
        write_claim_records(out, records);
      },
      py::arg("path"), py::arg("records"));

  py::class_<StepCdf>(m, "StepCdf")
      .def(py::init<std::vector<double>, std::vector<double>, double>(), py::arg("sizes"), py::arg("values"),
           py::arg("base") = 0.0)
      .def_static("degenerate", &StepCdf::degenerate, py::arg("at"))
      .def_property_readonly("sizes", &StepCdf::sizes)
      .def_property_readonly("values", &StepCdf::values)
      .def_property_readonly("base", &StepCdf::base)
      .def_property_readonly("z_cap", &StepCdf::z_cap)
      .def_property_readonly("residual_mass", &StepCdf::residual_mass)
      .def_property_readonly("tail_truncated", &StepCdf::tail_truncated)
      .def("__call__", &StepCdf::operator(), py::arg("z"))
      .def("effective", &StepCdf::effective, py::arg("z"));

  m.def("crps", &crps, py::arg("cdf"), py::arg("y"));
  m.def("tail_integral", &tail_integral, py::arg("cdf"), py::arg("w"), py::arg("m") = 1);
  m.def("residual_moment", &residual_moment, py::arg("cdf"), py::arg("w"), py::arg("m") = 1);
  m.def("error_incidence", &error_incidence, py::arg("predicted"), py::arg("actual"));

  m.def(
      "chain_ladder",
      [](const std::vector<std::vector<std::optional<double>>>& rows) {
        const auto t = triangle_from_rows(rows, true);
        const auto cl = chain_ladder(t);
        py::dict d;
        d["factors"] = cl.factors;
        d["completed"] = cl.completed;
        d["ultimates"] = cl.ultimates;
        d["total_ultimate"] = cl.total_ultimate;
        d["total_reserve"] = cl.total_reserve;
        if (t.dim() >= 3) {
          const auto mack = mack_process_variance(t, cl);
          d["sigma2"] = mack.sigma2;
          d["process_variance"] = mack.total;
        }
        return d;
      },
      py::arg("cumulative"), "Rows of a cumulative triangle; cells below the diagonal may be None.");

  py::class_<SimulatedPortfolio>(m, "Simulation")
      .def_readonly("replication", &SimulatedPortfolio::replication)
      .def_property_readonly("ultimates", &SimulatedPortfolio::ultimates)
      .def_property_readonly("actual_total", &SimulatedPortfolio::actual_total)
      .def_property_readonly("n_claims", [](const SimulatedPortfolio& s) { return s.claims.size(); })
      .def_property_readonly("n_open", [](const SimulatedPortfolio& s) { return s.observed.n_rbns(); })
      .def_property_readonly("claim_ids",
                             [](const SimulatedPortfolio& s) {
                               std::vector<std::string> ids;
                               for (const auto& c : s.claims) ids.push_back(c.claim_id);
                               return ids;
                             })
      .def("observed_records", &SimulatedPortfolio::observed_records)
      .def("full_records", &SimulatedPortfolio::full_records);

  m.def(
      "simulate",
      [](int k, const std::string& scenario, std::uint64_t seed, int replication, const std::string& censor_rule,
         const std::string& volume_preset, std::optional<int> first_volume, std::optional<int> volume_decrement) {
        ScenarioConfig c;
        c.k = k;
        c.scenario = parse_scenario(scenario);
        c.seed = seed;
        c.censor_rule = parse_censor_rule(censor_rule);
        c.volume_preset = parse_volume_preset(volume_preset);
        if (first_volume) c.first_volume = *first_volume;
        if (volume_decrement) c.volume_decrement = *volume_decrement;
        c.validate();
        py::gil_scoped_release release;
        return generate_scenario(c, replication);
      },
      py::arg("k") = 4, py::arg("scenario") = "alpha", py::arg("seed") = 1, py::arg("replication") = 0,
      py::arg("censor_rule") = "uniform_quantile", py::arg("volume_preset") = "narrative",
      py::arg("first_volume") = py::none(), py::arg("volume_decrement") = py::none());

  m.def(
      "fit_predict",
      [](std::vector<ClaimRecord> records, int k, const std::vector<std::string>& feature_names,
         const std::vector<std::string>& kernel, double eta, const std::string& fallback, std::size_t threads) {
        FitOptions o;
        o.k = k;
        o.features = features(feature_names);
        o.kernel = kernel_spec(kernel);
        o.eta = eta;
        o.fallback = parse_support_fallback(fallback);
        o.threads = threads;
        FitPredictResult r;
        {
          py::gil_scoped_release release;
          r = fit_predict(std::move(records), o);
        }
        py::dict d = report_dict(r.report);
        py::list claims;
        for (std::size_t i = 0; i < r.rbns.claims.size(); ++i) {
          const auto& c = r.rbns.claims[i];
          py::dict row;
          row["claim_id"] = c.claim_id;
          row["paid"] = c.paid;
          row["ultimate"] = c.ultimate;
          row["variance"] = c.variance;
          row["cdf"] = r.curves[r.curve_of_open_claim[i]].cdf;
          claims.append(row);
        }
        d["claims"] = claims;
        d["curve_violations"] = r.curve_violations;
        return d;
      },
      py::arg("records"), py::arg("k") = 4, py::arg("features") = std::vector<std::string>{},
      py::arg("kernel") = std::vector<std::string>{"exact"}, py::arg("eta") = 0.75, py::arg("fallback") = "zero",
      py::arg("threads") = 1);

  m.def(
      "reproduce",
      [](const std::vector<int>& ks, int replications, std::uint64_t seed, const std::vector<std::string>& scenarios,
         std::size_t threads) {
        ReproduceOptions o;
        o.ks = ks;
        o.replications = replications;
        o.seed = seed;
        o.threads = threads;
        o.scenarios.clear();
        for (const auto& s : scenarios) o.scenarios.push_back(parse_scenario(s));
        ReproduceResult r;
        {
          py::gil_scoped_release release;
          r = reproduce(o);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["k"] = row.k;
          d["scenario"] = scenario_name(row.scenario);
          d["U"] = row.uses_u;
          d["actual_average"] = row.actual_average;
          d["ei_aj"] = row.ei_aj;
          d["ei_cl"] = row.ei_cl;
          d["cv_aj"] = row.cv_aj;
          d["cv_cl"] = row.cv_cl;
          d["relative_crps"] = row.relative_crps;
          rows.append(d);
        }
        return rows;
      },
      py::arg("ks") = std::vector<int>{4}, py::arg("replications") = 20, py::arg("seed") = 1,
      py::arg("scenarios") = std::vector<std::string>{"alpha", "beta"}, py::arg("threads") = 0);
}
