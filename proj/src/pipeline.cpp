#include "antibunch/pipeline.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "antibunch/corrections.hpp"
#include "antibunch/random.hpp"
#include "antibunch/ttg_io.hpp"

namespace antibunch {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::optional<double> finite_or_null(double v) {
  return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

json opt_to_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> opt_from_json(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

std::string ttg_name(std::size_t index, int channel) {
  return "power_" + std::to_string(index) + "_ch" + std::to_string(channel) + ".ttg";
}

std::string g2_name(std::size_t index) { return "power_" + std::to_string(index) + "_g2.csv"; }

double seconds(std::uint64_t ps) { return static_cast<double>(ps) / kPsPerSecond; }

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
}

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ManifestError(std::string("missing ") + what + ": " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ManifestError(std::string("unreadable ") + what + " " + path.string() + ": " + e.what());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  EmitterScenario probe = scenario;
  probe.pump_uW = 0.0;
  try {
    probe.validate();
    detector.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (powers_uW.empty()) throw ConfigError("powers_uW must list at least one pump power");
  for (double p : powers_uW)
    if (!(p >= 0.0)) throw ConfigError("pump powers must be non-negative");
  if (bin_width_ps < 1) throw ConfigError("correlation.bin_width_ps must be at least 1");
  if (tau_max_ps < bin_width_ps) throw ConfigError("correlation.tau_max_ps must be >= bin_width_ps");
  if (scenario.duration_ps == 0) throw ConfigError("scenario.duration_ps must be positive");
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  try {
    const json& s = j.at("scenario");
    c.scenario.tau_rad_ps = s.at("tau_rad_ps").get<double>();
    c.scenario.beta_per_uW = s.at("beta_per_uW").get<double>();
    c.scenario.collection_efficiency = s.value("collection_efficiency", 1.0);
    c.scenario.background_cps = s.value("background_cps", 0.0);
    c.scenario.duration_ps = s.at("duration_ps").get<std::uint64_t>();
    if (j.contains("detector")) {
      const json& d = j.at("detector");
      c.detector.jitter_sigma_ps = d.value("jitter_sigma_ps", 0.0);
      c.detector.dead_time_ps = d.value("dead_time_ps", std::uint64_t{0});
      c.detector.dark_cps = d.value("dark_cps", 0.0);
      c.detector.efficiency = d.value("efficiency", 1.0);
    }
    c.powers_uW = j.at("powers_uW").get<std::vector<double>>();
    if (j.contains("correlation")) {
      const json& k = j.at("correlation");
      c.tau_max_ps = k.value("tau_max_ps", c.tau_max_ps);
      c.bin_width_ps = k.value("bin_width_ps", c.bin_width_ps);
    }
    c.outputs = j.value("outputs", std::string("out"));
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("budget")) {
      const json& b = j.at("budget");
      c.budget = BudgetInput{b.at("reflectivity").get<double>(),
                             b.at("coupler_transmission").get<double>()};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  json j;
  j["scenario"] = {{"tau_rad_ps", c.scenario.tau_rad_ps},
                   {"beta_per_uW", c.scenario.beta_per_uW},
                   {"collection_efficiency", c.scenario.collection_efficiency},
                   {"background_cps", c.scenario.background_cps},
                   {"duration_ps", c.scenario.duration_ps}};
  j["detector"] = {{"jitter_sigma_ps", c.detector.jitter_sigma_ps},
                   {"dead_time_ps", c.detector.dead_time_ps},
                   {"dark_cps", c.detector.dark_cps},
                   {"efficiency", c.detector.efficiency}};
  j["powers_uW"] = c.powers_uW;
  j["correlation"] = {{"tau_max_ps", c.tau_max_ps}, {"bin_width_ps", c.bin_width_ps}};
  j["outputs"] = c.outputs.string();
  j["seed"] = c.seed;
  if (c.budget)
    j["budget"] = {{"reflectivity", c.budget->reflectivity},
                   {"coupler_transmission", c.budget->coupler_transmission}};
  return j;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

PowerStreams simulate_power(const PipelineConfig& config, std::size_t power_index) {
  const std::uint64_t sub = derive_seed(config.seed, power_index);
  EmitterScenario scenario = config.scenario;
  scenario.pump_uW = config.powers_uW.at(power_index);
  scenario.seed = derive_seed(sub, 0);

  const auto acquire = [&](const TimeTagStream& source, std::uint64_t first) {
    const auto with_bg = add_background(source, scenario.background_cps,
                                        config.detector.dark_cps, derive_seed(sub, first));
    auto [a, b] = hbt_split(with_bg, derive_seed(sub, first + 1));
    return std::pair{apply_detector(a, config.detector, derive_seed(sub, first + 2)),
                     apply_detector(b, config.detector, derive_seed(sub, first + 3))};
  };

  auto [ch0, ch1] = acquire(simulate_emission(scenario), 1);
  const auto [bg0, bg1] = acquire(TimeTagStream(scenario.duration_ps), 5);
  const double bg_rate =
      static_cast<double>(bg0.size() + bg1.size()) / seconds(scenario.duration_ps);
  return {std::move(ch0), std::move(ch1), bg_rate};
}

void cmd_simulate(const PipelineConfig& config) {
  config.validate();
  const fs::path dir = config.outputs;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create output directory '" + dir.string() +
                             "': " + ec.message());

  json manifest;
  manifest["version"] = 1;
  manifest["duration_ps"] = config.scenario.duration_ps;
  manifest["seed"] = config.seed;
  manifest["powers"] = json::array();
  for (std::size_t i = 0; i < config.powers_uW.size(); ++i) {
    const auto streams = simulate_power(config, i);
    write_ttg_file(dir / ttg_name(i, 0), streams.ch0);
    write_ttg_file(dir / ttg_name(i, 1), streams.ch1);
    manifest["powers"].push_back({{"index", i},
                                  {"power_uW", config.powers_uW[i]},
                                  {"ch0", ttg_name(i, 0)},
                                  {"ch1", ttg_name(i, 1)},
                                  {"background_cps", streams.background_cps}});
  }
  write_json_file(dir / "manifest.json", manifest);
}

json report_to_json(const Report& r) {
  json powers = json::array();
  for (const auto& p : r.powers) {
    powers.push_back({{"power_uW", p.power_uW},
                      {"detected_cps", p.detected_cps},
                      {"background_cps", p.background_cps},
                      {"rho", opt_to_json(p.rho)},
                      {"g2_zero", opt_to_json(p.g2_zero)},
                      {"g2_zero_err", opt_to_json(p.g2_zero_err)},
                      {"gamma_c_per_us", opt_to_json(p.gamma_c_per_us)},
                      {"gamma_c_err_per_us", opt_to_json(p.gamma_c_err_per_us)},
                      {"corrected_cps", opt_to_json(p.corrected_cps)},
                      {"converged", p.converged},
                      {"flags", p.flags}});
  }
  const auto& g = r.global;
  json global = {{"tau_rad_us", opt_to_json(g.tau_rad_us)},
                 {"tau_rad_err_us", opt_to_json(g.tau_rad_err_us)},
                 {"beta_per_uW", opt_to_json(g.beta_per_uW)},
                 {"I_sat_cps", opt_to_json(g.I_sat_cps)},
                 {"P_sat_uW", opt_to_json(g.P_sat_uW)},
                 {"alpha_cps_per_uW", opt_to_json(g.alpha_cps_per_uW)},
                 {"eta", opt_to_json(g.eta)},
                 {"lifetime_converged", g.lifetime_converged},
                 {"saturation_converged", g.saturation_converged}};
  return {{"powers", powers}, {"global", global}, {"all_converged", r.all_converged}};
}

Report report_from_json(const json& j) {
  Report r;
  for (const json& p : j.at("powers")) {
    PowerReport pr;
    pr.power_uW = p.at("power_uW").get<double>();
    pr.detected_cps = p.at("detected_cps").get<double>();
    pr.background_cps = p.at("background_cps").get<double>();
    pr.rho = opt_from_json(p, "rho");
    pr.g2_zero = opt_from_json(p, "g2_zero");
    pr.g2_zero_err = opt_from_json(p, "g2_zero_err");
    pr.gamma_c_per_us = opt_from_json(p, "gamma_c_per_us");
    pr.gamma_c_err_per_us = opt_from_json(p, "gamma_c_err_per_us");
    pr.corrected_cps = opt_from_json(p, "corrected_cps");
    pr.converged = p.at("converged").get<bool>();
    pr.flags = p.at("flags").get<std::vector<std::string>>();
    r.powers.push_back(std::move(pr));
  }
  const json& g = j.at("global");
  r.global.tau_rad_us = opt_from_json(g, "tau_rad_us");
  r.global.tau_rad_err_us = opt_from_json(g, "tau_rad_err_us");
  r.global.beta_per_uW = opt_from_json(g, "beta_per_uW");
  r.global.I_sat_cps = opt_from_json(g, "I_sat_cps");
  r.global.P_sat_uW = opt_from_json(g, "P_sat_uW");
  r.global.alpha_cps_per_uW = opt_from_json(g, "alpha_cps_per_uW");
  r.global.eta = opt_from_json(g, "eta");
  r.global.lifetime_converged = g.at("lifetime_converged").get<bool>();
  r.global.saturation_converged = g.at("saturation_converged").get<bool>();
  r.all_converged = j.at("all_converged").get<bool>();
  return r;
}

void print_report_table(std::ostream& out, const Report& r) {
  const auto cell = [](const std::optional<double>& v, int prec) {
    std::ostringstream s;
    if (v)
      s << std::fixed << std::setprecision(prec) << *v;
    else
      s << "-";
    return s.str();
  };
  out << std::left << std::setw(9) << "P[uW]" << std::setw(12) << "det[cps]" << std::setw(8)
      << "rho" << std::setw(18) << "g2(0)" << std::setw(20) << "gamma_c[1/us]" << std::setw(12)
      << "corr[cps]" << "status\n";
  for (const auto& p : r.powers) {
    out << std::setw(9) << cell(p.power_uW, 3) << std::setw(12) << cell(p.detected_cps, 1)
        << std::setw(8) << cell(p.rho, 3) << std::setw(18)
        << (cell(p.g2_zero, 3) + " +- " + cell(p.g2_zero_err, 3)) << std::setw(20)
        << (cell(p.gamma_c_per_us, 3) + " +- " + cell(p.gamma_c_err_per_us, 3)) << std::setw(12)
        << cell(p.corrected_cps, 1) << (p.converged ? "ok" : "FAILED");
    for (const auto& f : p.flags) out << " [" << f << "]";
    out << '\n';
  }
  const auto& g = r.global;
  out << "tau_rad = " << cell(g.tau_rad_us, 4) << " +- " << cell(g.tau_rad_err_us, 4)
      << " us, beta = " << cell(g.beta_per_uW, 4) << " /uW\n";
  out << "I_sat = " << cell(g.I_sat_cps, 1) << " cps, P_sat = " << cell(g.P_sat_uW, 4)
      << " uW, alpha = " << cell(g.alpha_cps_per_uW, 2) << " cps/uW\n";
  out << "eta = " << cell(g.eta, 4) << '\n';
  out << (r.all_converged ? "all fits converged\n" : "some fits did not converge\n");
}

Report cmd_report(const PipelineConfig& config) {
  config.validate();
  const fs::path dir = config.outputs;
  const json manifest = read_json_file(dir / "manifest.json", "manifest");

  Report report;
  std::vector<LifetimePoint> lifetime_points;
  std::vector<SaturationPoint> saturation_points;
  bool all_ok = true;

  for (const json& entry : manifest.at("powers")) {
    const auto index = entry.at("index").get<std::size_t>();
    PowerReport pr;
    pr.power_uW = entry.at("power_uW").get<double>();
    pr.background_cps = entry.at("background_cps").get<double>();

    TimeTagStream ch[2];
    for (int c = 0; c < 2; ++c) {
      const fs::path path = dir / entry.at(c == 0 ? "ch0" : "ch1").get<std::string>();
      if (!fs::exists(path)) throw ManifestError("missing artifact: " + path.string());
      ch[c] = read_ttg_file(path);
    }
    const double t_s = seconds(ch[0].duration_ps());
    pr.detected_cps = static_cast<double>(ch[0].size() + ch[1].size()) / t_s;

    const auto raw = correlate(ch[0], ch[1], config.tau_max_ps, config.bin_width_ps);
    std::optional<CorrelationHistogram> hist;
    try {
      hist = normalize(raw);
    } catch (const NormalizationError& e) {
      pr.flags.push_back(e.what());
    }

    if (pr.detected_cps > 0.0 && pr.detected_cps > pr.background_cps) {
      pr.rho = signal_fraction(
          {CountRate(pr.detected_cps - pr.background_cps), CountRate(pr.background_cps)});
    } else {
      pr.flags.push_back("background rate not below detected rate");
    }

    std::optional<CorrectedG2> corrected;
    if (hist && pr.rho) {
      corrected = background_correct_g2(hist->values, *pr.rho);
      if (corrected->negative_count > 0)
        pr.flags.push_back(std::to_string(corrected->negative_count) +
                           " corrected bins below zero");
      G2FitOptions opts;
      opts.rho = *pr.rho;
      const G2Fit g2 = fit_g2(*hist, opts, &corrected->values);
      pr.converged = g2.fit.converged;
      if (g2.fit.converged) {
        pr.g2_zero = finite_or_null(g2.params.g2_zero);
        pr.g2_zero_err = finite_or_null(g2.g2_zero_err);
        pr.gamma_c_per_us = finite_or_null(g2.params.gamma_c_per_us);
        pr.gamma_c_err_per_us = finite_or_null(g2.gamma_c_err_per_us);
        if (pr.gamma_c_per_us && pr.gamma_c_err_per_us && *pr.gamma_c_err_per_us > 0.0)
          lifetime_points.push_back({pr.power_uW, *pr.gamma_c_per_us, *pr.gamma_c_err_per_us});
        const double b = g2.params.g2_zero;
        if (b >= 0.0 && b <= 1.0) {
          pr.corrected_cps = corrected_rate(CountRate(pr.detected_cps),
                                            CountRate(pr.background_cps), b)
                                 .cps;
        } else {
          pr.flags.push_back("g2(0) outside [0, 1]; brightness correction skipped");
        }
      } else {
        pr.flags.push_back("g2 fit: " + g2.fit.diagnostic);
      }
    }
    if (!pr.converged) all_ok = false;

    const double signal_cps = pr.detected_cps - pr.background_cps;
    const double n_total = static_cast<double>(ch[0].size() + ch[1].size());
    saturation_points.push_back(
        {pr.power_uW, signal_cps, std::sqrt(std::max(n_total, 1.0)) / t_s});

    if (hist) {
      std::ofstream csv(dir / g2_name(index), std::ios::trunc);
      write_histogram_csv(csv, *hist, corrected ? &corrected->values : nullptr);
    }
    report.powers.push_back(std::move(pr));
  }

  GlobalReport& g = report.global;
  if (lifetime_points.size() >= 2) {
    try {
      const LifetimeFit lf = fit_lifetime(lifetime_points);
      g.lifetime_converged = lf.fit.converged;
      g.tau_rad_us = finite_or_null(lf.params.tau_rad_us);
      g.tau_rad_err_us = finite_or_null(lf.tau_rad_err_us);
      g.beta_per_uW = finite_or_null(lf.params.beta_per_uW);
    } catch (const FitError&) {
      g.lifetime_converged = false;
    }
    if (!g.lifetime_converged) all_ok = false;
  }
  if (saturation_points.size() >= 4) {
    try {
      const SaturationFit sf = fit_saturation(saturation_points);
      g.saturation_converged = sf.fit.converged;
      g.I_sat_cps = finite_or_null(sf.params.I_sat_cps);
      g.P_sat_uW = finite_or_null(sf.params.P_sat_uW);
      g.alpha_cps_per_uW = finite_or_null(sf.params.alpha_cps_per_uW);
    } catch (const FitError&) {
      g.saturation_converged = false;
    }
    if (!g.saturation_converged) all_ok = false;
  }
  if (config.budget)
    g.eta = fiber_coupling_efficiency(config.budget->reflectivity,
                                      config.budget->coupler_transmission)
                .eta;
  report.all_converged = all_ok;

  write_json_file(dir / "report.json", report_to_json(report));
  return report;
}

CsvRows read_csv(std::istream& in) {
  CsvRows rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows.empty()) continue;  // header
      throw std::runtime_error("malformed CSV at line " + std::to_string(line_no));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_histogram_csv(std::ostream& out, const CorrelationHistogram& h,
                         const std::vector<double>* corrected) {
  out << "# tau_max_ps=" << h.tau_max_ps << " bin_width_ps=" << h.bin_width_ps
      << " n_start=" << h.n_start << " n_stop=" << h.n_stop << " duration_ps=" << h.duration_ps
      << '\n';
  out << "bin_lo_ps,bin_hi_ps,counts,normalized_value";
  if (corrected) out << ",corrected_value";
  out << '\n';
  out << std::setprecision(17);
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out << h.bin_lo_ps(k) << ',' << h.bin_hi_ps(k) << ',' << h.counts[k] << ',';
    if (h.normalized)
      out << h.values[k];
    else
      out << "nan";
    if (corrected) out << ',' << (*corrected)[k];
    out << '\n';
  }
}

CorrelationHistogram read_histogram_csv(std::istream& in) {
  std::stringstream body;
  std::string line;
  std::optional<CorrelationHistogram> meta;
  while (std::getline(in, line)) {
    if (line.rfind("# tau_max_ps=", 0) == 0) {
      std::int64_t tau = 0, width = 0;
      std::uint64_t n0 = 0, n1 = 0, dur = 0;
      if (std::sscanf(line.c_str(),
                      "# tau_max_ps=%" SCNd64 " bin_width_ps=%" SCNd64 " n_start=%" SCNu64 " n_stop=%" SCNu64
                      " duration_ps=%" SCNu64,
                      &tau, &width, &n0, &n1, &dur) == 5) {
        meta = CorrelationHistogram::empty(tau, width);
        meta->n_start = n0;
        meta->n_stop = n1;
        meta->duration_ps = dur;
      }
      continue;
    }
    body << line << '\n';
  }
  if (!meta) throw std::runtime_error("histogram CSV lacks the '# tau_max_ps=...' metadata line");
  const CsvRows rows = read_csv(body);
  CorrelationHistogram h = *meta;
  if (rows.size() != h.counts.size())
    throw std::runtime_error("histogram CSV row count does not match its binning");
  h.values.resize(rows.size());
  bool finite = true;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].size() < 4) throw std::runtime_error("histogram CSV rows need 4 columns");
    h.counts[k] = static_cast<std::uint64_t>(rows[k][2]);
    h.values[k] = rows[k][3];
    finite = finite && std::isfinite(h.values[k]);
  }
  h.normalized = finite;
  if (!finite) h.values.clear();
  return h;
}

json fit_to_json(const std::vector<std::string>& names, const Eigen::VectorXd& values,
                 const Eigen::VectorXd& errors, const FitResultd& fit) {
  json params = json::object();
  json errs = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    params[names[i]] = opt_to_json(finite_or_null(values[k]));
    errs[names[i]] = opt_to_json(finite_or_null(errors[k]));
  }
  json j = {{"params", params},
            {"stderr", errs},
            {"chi2_reduced", opt_to_json(finite_or_null(fit.chi2_reduced))},
            {"converged", fit.converged},
            {"iterations", fit.iterations}};
  if (!fit.diagnostic.empty()) j["diagnostic"] = fit.diagnostic;
  return j;
}

}  // namespace antibunch
