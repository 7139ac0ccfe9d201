// antibunch: simulate | correlate | fit | correct | budget | report

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"

#include "antibunch/corrections.hpp"
#include "antibunch/correlator.hpp"
#include "antibunch/fitters.hpp"
#include "antibunch/pipeline.hpp"
#include "antibunch/ttg_io.hpp"

using namespace antibunch;
using nlohmann::json;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return in;
}

// Writes to `path`, or standard output when it is empty.
template <typename Fn>
void with_output(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  fn(out);
}

int emit_fit(const std::string& out_path, const json& j, bool converged) {
  with_output(out_path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  return converged ? 0 : kExitNotConverged;
}

const std::vector<double>& need_columns(const std::vector<double>& row, std::size_t n) {
  if (row.size() < n)
    throw std::runtime_error("CSV row has " + std::to_string(row.size()) + " columns, need " +
                             std::to_string(n));
  return row;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-photon emitter simulation and correlation analysis"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate HBT time-tag files for every pump power");
  std::string sim_config;
  std::string sim_outputs;
  sim->add_option("--config", sim_config, "Pipeline JSON config")->required();
  sim->add_option("--outputs", sim_outputs, "Override the config's output directory");

  // correlate
  auto* cor = app.add_subcommand("correlate", "Coincidence histogram of two .ttg files");
  std::string cor_a, cor_b, cor_tau = "10us", cor_bin = "50ns", cor_out;
  cor->add_option("start", cor_a, "Start channel .ttg")->required();
  cor->add_option("stop", cor_b, "Stop channel .ttg")->required();
  cor->add_option("--tau-max", cor_tau, "Half window, e.g. 10us")->capture_default_str();
  cor->add_option("--bin-width", cor_bin, "Bin width, e.g. 50ns")->capture_default_str();
  cor->add_option("--out", cor_out, "CSV output (default stdout)");

  // fit
  auto* fit = app.add_subcommand("fit", "Model fits; CSV in, JSON out");
  fit->require_subcommand(1);
  std::string fit_in, fit_out;
  bool unweighted = false;
  std::optional<double> fit_rho;
  auto add_io = [&](CLI::App* c) {
    c->add_option("--input", fit_in, "Input CSV")->required();
    c->add_option("--out", fit_out, "JSON output (default stdout)");
  };
  auto* fit_sat = fit->add_subcommand("saturation", "CSV: P_uW,rate_cps,sigma");
  add_io(fit_sat);
  auto* fit_g2c = fit->add_subcommand("g2", "CSV from `correlate`");
  add_io(fit_g2c);
  fit_g2c->add_option("--rho", fit_rho, "Apply background correction with this signal fraction");
  auto* fit_life = fit->add_subcommand("lifetime", "CSV: P_uW,gamma_c_per_us,sigma");
  add_io(fit_life);
  fit_life->add_flag("--unweighted", unweighted, "Ignore the sigma column");
  auto* fit_lor = fit->add_subcommand("lorentzian", "CSV: energy_meV,intensity");
  add_io(fit_lor);

  // correct
  auto* corr = app.add_subcommand("correct", "Background and brightness corrections");
  corr->require_subcommand(1);
  auto* corr_g2 = corr->add_subcommand("g2", "Background-correct a histogram CSV");
  std::string cg_in, cg_out;
  std::optional<double> cg_rho, cg_signal, cg_background;
  corr_g2->add_option("--input", cg_in, "Histogram CSV from `correlate`")->required();
  corr_g2->add_option("--out", cg_out, "CSV output (default stdout)");
  auto* rho_opt = corr_g2->add_option("--rho", cg_rho, "Signal fraction S/(S+B)");
  auto* s_opt = corr_g2->add_option("--signal", cg_signal, "Signal rate S [cps]");
  auto* b_opt = corr_g2->add_option("--background", cg_background, "Background rate B [cps]");
  rho_opt->excludes(s_opt)->excludes(b_opt);
  s_opt->needs(b_opt);
  b_opt->needs(s_opt);

  auto* corr_rate = corr->add_subcommand("rate", "Single-photon rate (I_det - B) sqrt(1 - g2(0))");
  std::optional<double> cr_det, cr_bg, cr_g2;
  std::string cr_in, cr_out;
  corr_rate->add_option("--detected", cr_det, "Detected rate [cps]");
  corr_rate->add_option("--background", cr_bg, "Background rate [cps]");
  corr_rate->add_option("--g2-zero", cr_g2, "g2(0)");
  corr_rate->add_option("--input", cr_in, "CSV: detected_cps,background_cps,g2_zero");
  corr_rate->add_option("--out", cr_out, "Output (default stdout)");

  // budget
  auto* bud = app.add_subcommand("budget", "Fiber coupling efficiency from round-trip reflectivity");
  double reflectivity = 0, transmission = 0;
  std::string bud_json;
  bud->add_option("--reflectivity", reflectivity, "Round-trip reflectivity R")->required();
  bud->add_option("--coupler-transmission", transmission, "Fiber coupler transmission T_fc")
      ->required();
  bud->add_option("--json", bud_json, "Also write the JSON to this file");

  // report
  auto* rep = app.add_subcommand("report", "Analyse simulated artifacts and assemble the report");
  std::string rep_config, rep_outputs, rep_json;
  rep->add_option("--config", rep_config, "Pipeline JSON config")->required();
  rep->add_option("--outputs", rep_outputs, "Override the config's output directory");
  rep->add_option("--json", rep_json, "Also copy report JSON to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      auto config = load_config(sim_config);
      if (!sim_outputs.empty()) config.outputs = sim_outputs;
      cmd_simulate(config);
      std::cout << "wrote " << 2 * config.powers_uW.size() << " .ttg files to "
                << config.outputs.string() << '\n';
      return 0;
    }

    if (*cor) {
      const auto a = read_ttg_file(cor_a);
      const auto b = read_ttg_file(cor_b);
      const auto tau = static_cast<std::int64_t>(parse_duration_ps(cor_tau));
      const auto width = static_cast<std::int64_t>(parse_duration_ps(cor_bin));
      auto h = correlate(a, b, tau, width);
      try {
        h = normalize(h);
      } catch (const NormalizationError& e) {
        std::cerr << "warning: " << e.what() << '\n';
      }
      with_output(cor_out, [&](std::ostream& o) { write_histogram_csv(o, h); });
      return 0;
    }

    if (*fit) {
      if (*fit_g2c) {
        auto in = open_input(fit_in);
        const auto h = read_histogram_csv(in);
        if (!h.normalized) throw std::runtime_error("histogram has no normalized values");
        G2FitOptions opts;
        G2Fit g;
        if (fit_rho) {
          const auto corrected = background_correct_g2(h.values, *fit_rho);
          opts.rho = *fit_rho;
          g = fit_g2(h, opts, &corrected.values);
        } else {
          g = fit_g2(h, opts);
        }
        Eigen::Vector2d v(g.params.g2_zero, g.params.gamma_c_per_us);
        Eigen::Vector2d e(g.g2_zero_err, g.gamma_c_err_per_us);
        return emit_fit(fit_out, fit_to_json({"g2_zero", "gamma_c_per_us"}, v, e, g.fit),
                        g.fit.converged);
      }
      auto in = open_input(fit_in);
      const auto rows = read_csv(in);
      if (*fit_sat) {
        std::vector<SaturationPoint> pts;
        for (const auto& r : rows) {
          need_columns(r, 3);
          pts.push_back({r[0], r[1], r[2]});
        }
        const auto s = fit_saturation(pts);
        Eigen::Vector3d v(s.params.I_sat_cps, s.params.P_sat_uW, s.params.alpha_cps_per_uW);
        return emit_fit(fit_out,
                        fit_to_json({"I_sat_cps", "P_sat_uW", "alpha_cps_per_uW"}, v,
                                    s.fit.stderrs(), s.fit),
                        s.fit.converged);
      }
      if (*fit_life) {
        std::vector<LifetimePoint> pts;
        for (const auto& r : rows) {
          need_columns(r, unweighted ? 2 : 3);
          pts.push_back({r[0], r[1], unweighted ? 1.0 : r[2]});
        }
        const auto l = fit_lifetime(pts, !unweighted);
        Eigen::Vector2d v(l.params.tau_rad_us, l.params.beta_per_uW);
        Eigen::Vector2d e(l.tau_rad_err_us, l.beta_err_per_uW);
        return emit_fit(fit_out, fit_to_json({"tau_rad_us", "beta_per_uW"}, v, e, l.fit),
                        l.fit.converged);
      }
      if (*fit_lor) {
        std::vector<SpectrumPoint> pts;
        for (const auto& r : rows) {
          need_columns(r, 2);
          pts.push_back({r[0], r[1]});
        }
        const auto l = fit_lorentzian(pts);
        Eigen::Vector4d v(l.params.center_meV, l.params.fwhm_ueV, l.params.amplitude,
                          l.params.offset);
        return emit_fit(fit_out,
                        fit_to_json({"center_meV", "fwhm_ueV", "amplitude", "offset"}, v,
                                    l.fit.stderrs(), l.fit),
                        l.fit.converged);
      }
    }

    if (*corr) {
      if (*corr_g2) {
        double rho = 0;
        if (cg_rho)
          rho = *cg_rho;
        else if (cg_signal && cg_background)
          rho = signal_fraction({CountRate(*cg_signal), CountRate(*cg_background)});
        else
          throw std::runtime_error("give --rho or both --signal and --background");
        auto in = open_input(cg_in);
        const auto h = read_histogram_csv(in);
        if (!h.normalized) throw std::runtime_error("histogram has no normalized values");
        const auto corrected = background_correct_g2(h.values, rho);
        if (corrected.negative_count > 0)
          std::cerr << "warning: " << corrected.negative_count
                    << " corrected values below zero (kept unclamped)\n";
        with_output(cg_out, [&](std::ostream& o) { write_histogram_csv(o, h, &corrected.values); });
        return 0;
      }
      if (*corr_rate) {
        if (!cr_in.empty()) {
          auto in = open_input(cr_in);
          const auto rows = read_csv(in);
          with_output(cr_out, [&](std::ostream& o) {
            o << "detected_cps,background_cps,g2_zero,corrected_cps\n" << std::setprecision(17);
            for (const auto& r : rows) {
              need_columns(r, 3);
              const auto c = corrected_rate(CountRate(r[0]), CountRate(r[1]), r[2]);
              o << r[0] << ',' << r[1] << ',' << r[2] << ',' << c.cps << '\n';
            }
          });
          return 0;
        }
        if (!cr_det || !cr_bg || !cr_g2)
          throw std::runtime_error("give --detected, --background and --g2-zero, or --input");
        const auto c = corrected_rate(CountRate(*cr_det), CountRate(*cr_bg), *cr_g2);
        const json j = {{"detected_cps", *cr_det},
                        {"background_cps", *cr_bg},
                        {"g2_zero", *cr_g2},
                        {"corrected_cps", c.cps}};
        with_output(cr_out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
        return 0;
      }
    }

    if (*bud) {
      const auto b = fiber_coupling_efficiency(reflectivity, transmission);
      const json j = {{"reflectivity", b.reflectivity},
                      {"coupler_transmission", b.coupler_transmission},
                      {"eta", b.eta}};
      std::cout << j.dump(2) << '\n';
      if (!bud_json.empty()) with_output(bud_json, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
      return 0;
    }

    if (*rep) {
      auto config = load_config(rep_config);
      if (!rep_outputs.empty()) config.outputs = rep_outputs;
      const Report report = cmd_report(config);
      print_report_table(std::cout, report);
      if (!rep_json.empty())
        with_output(rep_json, [&](std::ostream& o) { o << report_to_json(report).dump(2) << '\n'; });
      return report.all_converged ? 0 : kExitNotConverged;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return 0;
}
