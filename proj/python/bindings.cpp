#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

#include "rtwatch/cli.hpp"
#include "rtwatch/errors.hpp"
#include "rtwatch/ingest.hpp"
#include "rtwatch/report.hpp"
#include "rtwatch/rt_core.hpp"
#include "rtwatch/sim_oracle.hpp"

namespace py = pybind11;
using namespace rtwatch;

namespace {

using Column = std::vector<std::optional<double>>;

std::ifstream open(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  return in;
}

EstimatorConfig make_config(std::optional<double> sigma, double r_min, double r_max, std::size_t grid_points,
                            double serial_interval, int window_days, double window_std, double hdi_mass,
                            double leading_trim_cutoff) {
  EstimatorConfig cfg;
  cfg.grid = RtGrid(r_min, r_max, grid_points);
  cfg.serial = SerialInterval(serial_interval);
  cfg.sigma = sigma;
  cfg.window_days = window_days;
  cfg.window_std = window_std;
  cfg.hdi_mass = hdi_mass;
  cfg.leading_trim_cutoff = leading_trim_cutoff;
  return cfg;
}

CaseSeries make_series(const std::vector<std::int64_t>& counts, const std::string& start) {
  CaseSeries s;
  Date d = Date::from_iso(start);
  for (auto c : counts) {
    s.dates.push_back(d);
    s.counts.push_back(c);
    ++d;
  }
  return s;
}

py::dict series_dict(const CaseSeries& s) {
  std::vector<std::string> dates;
  for (auto d : s.dates) dates.push_back(d.iso());
  py::dict out;
  out["dates"] = dates;
  out["cases"] = s.counts;
  return out;
}

JoinedTable table_from(const std::vector<std::string>& dates, const std::map<std::string, Column>& columns) {
  JoinedTable t;
  for (const auto& [name, values] : columns) {
    if (values.size() != dates.size()) throw DataError("column '" + name + "' length differs from dates");
    std::vector<std::pair<Date, std::optional<double>>> pts;
    for (std::size_t i = 0; i < dates.size(); ++i) pts.emplace_back(Date::from_iso(dates[i]), values[i]);
    t.add_series(name, pts);
  }
  return t;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Real-time R-value estimation, simulation, ingestion and charting";

  auto data_error = py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<SourceError>(m, "SourceError", PyExc_OSError);
  py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
  (void)data_error;

  py::class_<RtRecord>(m, "RtRecord")
      .def_property_readonly("date", [](const RtRecord& r) { return r.date.iso(); })
      .def_readonly("mode", &RtRecord::mode)
      .def_readonly("mean", &RtRecord::mean)
      .def_readonly("hdi_low", &RtRecord::hdi_low)
      .def_readonly("hdi_high", &RtRecord::hdi_high)
      .def_readonly("flagged", &RtRecord::flagged)
      .def("__repr__", [](const RtRecord& r) {
        return "RtRecord(" + r.date.iso() + ", mode=" + format_number(r.mode) + ")";
      });

  py::class_<RtEstimate>(m, "RtEstimate")
      .def_readonly("records", &RtEstimate::records)
      .def_readonly("sigma", &RtEstimate::sigma)
      .def_readonly("hdi_mass", &RtEstimate::hdi_mass)
      .def("__len__", &RtEstimate::size)
      .def("to_csv", [](const RtEstimate& e) {
        std::ostringstream out;
        emit_estimates(e, out);
        return out.str();
      })
      .def("write_csv", [](const RtEstimate& e, const std::filesystem::path& p) { emit_estimates(e, p); },
           py::arg("path"));

  m.def(
      "estimate_rt",
      [](const std::vector<std::int64_t>& counts, const std::string& start, std::optional<double> sigma, double r_min,
         double r_max, std::size_t grid_points, double serial_interval, int window_days, double window_std,
         double hdi_mass, double leading_trim_cutoff) {
        auto cfg = make_config(sigma, r_min, r_max, grid_points, serial_interval, window_days, window_std, hdi_mass,
                               leading_trim_cutoff);
        auto series = make_series(counts, start);
        py::gil_scoped_release release;
        return estimate_rt(series, cfg);
      },
      "Posterior summaries of R_t for daily counts starting at `start`; sigma=None selects by marginal likelihood.",
      py::arg("counts"), py::arg("start") = "2021-01-01", py::arg("sigma") = py::none(), py::arg("r_min") = 0.0,
      py::arg("r_max") = 12.0, py::arg("grid_points") = 1201, py::arg("serial_interval") = 7.0,
      py::arg("window_days") = 7, py::arg("window_std") = 2.0, py::arg("hdi_mass") = 0.9,
      py::arg("leading_trim_cutoff") = 10.0);

  m.def("expected_rate", &expected_rate, py::arg("k_prev"), py::arg("gamma"), py::arg("r"));
  m.def("log_poisson_pmf", &log_poisson_pmf, py::arg("k"), py::arg("lam"));
  m.def(
      "highest_density_interval",
      [](const std::vector<double>& dist, double r_min, double r_max, double mass) {
        RtGrid grid(r_min, r_max, dist.size());
        auto iv = highest_density_interval(dist, grid, mass);
        return std::make_pair(iv.low, iv.high);
      },
      py::arg("distribution"), py::arg("r_min"), py::arg("r_max"), py::arg("mass") = 0.9);

  m.def("scenario_names", [] {
    std::vector<std::string> names;
    for (const auto& s : standard_scenarios()) names.push_back(s.name);
    return names;
  });
  m.def(
      "simulate",
      [](const std::string& scenario, std::optional<std::uint64_t> seed, std::optional<double> k0,
         bool deterministic) {
        auto sc = find_scenario(scenario);
        if (seed) sc.config.seed = *seed;
        if (k0) sc.config.k0 = *k0;
        sc.config.mode = deterministic ? SimMode::deterministic_mean : SimMode::stochastic;
        auto sim = simulate_cases(sc.trajectory, sc.config);
        auto out = series_dict(sim.cases);
        out["true_r"] = sc.trajectory.true_r;
        out["means"] = sim.means;
        return out;
      },
      py::arg("scenario"), py::arg("seed") = py::none(), py::arg("k0") = py::none(),
      py::arg("deterministic") = false);
  m.def(
      "simulate_trajectory",
      [](const std::vector<double>& true_r, const std::string& start, std::uint64_t seed, double k0,
         bool deterministic) {
        RtTrajectory traj;
        Date d = Date::from_iso(start);
        for (double r : true_r) {
          traj.dates.push_back(d);
          traj.true_r.push_back(r);
          ++d;
        }
        SimConfig cfg;
        cfg.seed = seed;
        cfg.k0 = k0;
        cfg.mode = deterministic ? SimMode::deterministic_mean : SimMode::stochastic;
        auto sim = simulate_cases(traj, cfg);
        auto out = series_dict(sim.cases);
        out["means"] = sim.means;
        return out;
      },
      py::arg("true_r"), py::arg("start") = "2021-01-01", py::arg("seed") = 1, py::arg("k0") = 100.0,
      py::arg("deterministic") = false);

  m.def(
      "parse_owid",
      [](const std::string& path, const std::string& iso_code) {
        auto in = open(path);
        auto data = parse_owid(in, iso_code);
        auto out = series_dict(data.cases);
        out["location"] = data.location;
        out["flags"] = data.flags.size();
        out["clamped_days"] = data.audit.clamped_days;
        out["missing_days"] = data.audit.missing_days;
        return out;
      },
      py::arg("path"), py::arg("iso_code"));
  m.def(
      "parse_oxcgrt",
      [](const std::string& path, const std::string& country) {
        auto in = open(path);
        py::list out;
        for (const auto& r : parse_oxcgrt(in, country)) {
          py::dict row;
          row["date"] = r.date.iso();
          row["stringency_index"] = r.stringency_index;
          row["stringency_variants"] = r.stringency_variants;
          for (std::size_t k = 0; k < kIndicatorCount; ++k)
            row[py::str(std::string(indicator_info(static_cast<Indicator>(k)).code))] = r.indicators[k];
          row["flags"] = r.flags;
          out.append(row);
        }
        return out;
      },
      py::arg("path"), py::arg("country"));
  m.def(
      "parse_mobility",
      [](const std::string& path, const std::string& country, std::optional<std::string> sub_region,
         int average_days) {
        auto in = open(path);
        std::optional<std::string_view> sub;
        if (sub_region) sub = *sub_region;
        auto data = parse_mobility(in, country, sub);
        auto records = average_days > 1 ? moving_average(data.records, average_days) : data.records;
        py::list out;
        for (const auto& r : records) {
          py::dict row;
          row["date"] = r.date.iso();
          for (std::size_t c = 0; c < kMobilityCategoryCount; ++c)
            row[py::str(std::string(mobility_category_name(static_cast<MobilityCategory>(c))))] = r.categories[c];
          row["flags"] = r.flags;
          out.append(row);
        }
        return out;
      },
      py::arg("path"), py::arg("country"), py::arg("sub_region") = py::none(), py::arg("average_days") = 1);
  m.def(
      "parse_trends",
      [](const std::string& path, const std::vector<std::string>& labels) {
        py::list out;
        for (const auto& r : parse_trends_file(path, labels)) {
          py::dict row;
          row["date"] = r.date.iso();
          row["term"] = r.term;
          row["interest"] = r.interest;
          row["flags"] = r.flags;
          out.append(row);
        }
        return out;
      },
      py::arg("path"), py::arg("term_labels") = std::vector<std::string>{});

  m.def("figure_names", [] {
    std::vector<std::string> names;
    for (const auto& p : figure_presets()) names.push_back(p.name);
    return names;
  });
  m.def(
      "chart_overlay",
      [](const std::vector<std::string>& dates, const std::map<std::string, Column>& columns,
         const std::string& preset) {
        auto table = table_from(dates, columns);
        auto spec = find_preset(preset);
        if (!spec) throw DataError("unknown figure preset '" + preset + "'");
        return chart_overlay(table, preset == "fig6" ? trends_chart(table) : *spec);
      },
      "SVG for a figure preset over date-aligned columns (None for missing cells).", py::arg("dates"),
      py::arg("columns"), py::arg("preset"));
  m.def(
      "estimate_chart",
      [](const RtEstimate& est, const std::string& preset) {
        auto spec = find_preset(preset);
        if (!spec) throw DataError("unknown figure preset '" + preset + "'");
        return chart_overlay(join_daily({}, est, {}, {}), *spec);
      },
      py::arg("estimate"), py::arg("preset") = "fig2");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(args, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      "Runs the command-line tool in-process; returns (exit_code, stdout, stderr).", py::arg("args"));
}
