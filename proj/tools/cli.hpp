#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "choquard.hpp"

namespace choquard::cli {

using Json = nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kValidation = 2, kNumerical = 3 };

/// Rounds to 12 significant digits so the dump is the shortest round-trip form of that value.
inline double sig12(double v) {
  if (!std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return std::strtod(buf, nullptr);
}

inline Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return sig12(v);
}

inline Json num_list(const std::vector<double>& v) {
  Json out = Json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

inline Json grid_json(const RadialGrid& g) {
  return Json{{"kind", g.is_ball() ? "unit_ball" : "whole_space"},
              {"n", static_cast<int>(g.size())},
              {"grading", num(g.grading())}};
}

inline Json constants_json(const ConstantsBundle& b) {
  return Json{{"alpha", num(b.alpha)},     {"S", num(b.S)},       {"C_alpha", num(b.C_alpha)},
              {"C_tilde_alpha", num(b.C_tilde_alpha)}, {"S_HL", num(b.S_HL)}, {"C_bar_alpha", num(b.C_bar_alpha)}};
}

inline Json concentration_json(const MinimizeResult& r) {
  Json c{{"kind", to_string(r.concentration)}};
  if (r.concentration == Concentration::Concentrating) c["lambda_hat"] = num(r.lambda_hat);
  return c;
}

inline Json minimize_json(const MinimizeResult& r, int grid_n, double grading) {
  return Json{{"alpha", num(r.alpha.value())},
              {"a", r.potential.describe()},
              {"grid", Json{{"kind", "unit_ball"}, {"n", grid_n}, {"grading", num(grading)}}},
              {"energy", num(r.energy)},
              {"discrete_energy", num(r.discrete_energy)},
              {"iterations", r.iterations},
              {"el_residual", num(r.el_residual)},
              {"pohozaev_residual", num(r.pohozaev_residual)},
              {"concentration", concentration_json(r)},
              {"lambda_hat", num(r.lambda_hat)},
              {"core_mass", num(r.core_mass)},
              {"start", r.start}};
}

inline Json sweep_json(const SweepReport& rep, const std::optional<MuCheck>& mu) {
  Json points = Json::array();
  for (const auto& p : rep.points)
    points.push_back(Json{{"eps", num(p.eps)},
                          {"energy", num(p.energy)},
                          {"discrete_energy", num(p.discrete_energy)},
                          {"lambda_hat", num(p.lambda_hat)},
                          {"eps_lambda", num(p.eps_lambda)},
                          {"el_residual", num(p.el_residual)},
                          {"iterations", p.iterations},
                          {"concentration", to_string(p.concentration)},
                          {"mu_hat", num(p.mu_hat)},
                          {"lambda_fit", num(p.lambda_fit)}});
  Json out{{"alpha", num(rep.alpha.value())},
           {"eps_ladder", num_list(rep.eps_ladder)},
           {"energies", num_list(rep.energies)},
           {"fitted_c2", num(rep.fitted_c2)},
           {"fitted_c3", num(rep.fitted_c3)},
           {"predicted_c2", num(rep.predicted_c2)},
           {"lambda_hats", num_list(rep.lambda_hats)},
           {"eps_lambda_products", num_list(rep.eps_lambda_products)},
           {"predicted_eps_lambda", num(rep.predicted_eps_lambda)},
           {"phi_a", num(rep.phi_a)},
           {"q_v", num(rep.q_v)},
           {"a_at_origin", num(rep.a_at_origin)},
           {"points", points}};
  if (mu)
    out["mu"] = Json{{"intercept", num(mu->intercept)},
                     {"slope", num(mu->slope)},
                     {"predicted_slope", num(mu->predicted_slope)},
                     {"derived_slope", num(mu->derived_slope)},
                     {"points", mu->points}};
  else
    out["mu"] = nullptr;
  return out;
}

inline Json error_json(const std::string& code, const std::string& message) {
  return Json{{"error", Json{{"code", code}, {"message", message}}}};
}

/// One row per scalar leaf (dotted keys); a top-level "points" array becomes a table instead.
inline void write_csv(const Json& doc, std::ostream& out) {
  auto cell = [](const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return std::string("nan");
    return v.dump();
  };
  if (doc.contains("points") && doc["points"].is_array() && !doc["points"].empty()) {
    const auto& pts = doc["points"];
    bool first = true;
    for (const auto& [k, v] : pts[0].items()) {
      out << (first ? "" : ",") << k;
      first = false;
    }
    out << "\n";
    for (const auto& p : pts) {
      first = true;
      for (const auto& [k, v] : p.items()) {
        out << (first ? "" : ",") << cell(v);
        first = false;
      }
      out << "\n";
    }
    return;
  }
  std::vector<std::pair<std::string, std::string>> rows;
  auto walk = [&](auto&& self, const Json& node, const std::string& prefix) -> void {
    for (const auto& [k, v] : node.items()) {
      const std::string key = prefix.empty() ? k : prefix + "." + k;
      if (v.is_object())
        self(self, v, key);
      else if (!v.is_array())
        rows.emplace_back(key, cell(v));
    }
  };
  walk(walk, doc, "");
  out << "key,value\n";
  for (const auto& [k, v] : rows) out << k << "," << v << "\n";
}

inline void emit(const Json& doc, const std::string& format, std::ostream& out) {
  if (format == "csv")
    write_csv(doc, out);
  else
    out << doc.dump(2) << "\n";
}

inline std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw DomainError("malformed number '" + item + "' in list");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) throw DomainError("malformed number '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw DomainError("empty list");
  return out;
}

struct PotentialArgs {
  std::optional<double> constant;
  std::string file;

  PotentialSpec spec(const char* name, double fallback) const {
    if (constant && !file.empty()) throw DomainError(std::string("give either a constant or a file for ") + name);
    if (!file.empty()) return PotentialSpec::from_csv_file(file);
    return PotentialSpec::constant(constant.value_or(fallback));
  }
};

/// Replaces a trailing ".json" by ".csv" (or appends ".csv").
inline std::string companion_csv(const std::string& path) {
  const std::string ext = ".json";
  if (path.size() >= ext.size() && path.compare(path.size() - ext.size(), ext.size(), ext) == 0)
    return path.substr(0, path.size() - ext.size()) + ".csv";
  return path + ".csv";
}

inline GridPtr checked_grid(DomainKind kind, int n, double grading) {
  if (n < 16) throw DomainError("grid-n must be at least 16");
  return make_grid(kind, n, grading);
}

/// Parses argv, runs one subcommand and writes one document to `out`. Returns the exit code.
inline int run(int argc, const char* const* argv, std::ostream& out) {
  CLI::App app{"Upper-critical Choquard problems on the unit ball in R^3"};
  app.require_subcommand(1);
  std::string format = "json";
  app.add_option("--format", format, "Output format")->check(CLI::IsMember({"json", "csv"}));

  double alpha = 1.0;
  int grid_n = -1;
  double grading = 0.7;
  double tol = 1e-8;
  bool json_flag = false;
  PotentialArgs a_args, v_args;
  std::string dump_path, out_path, eps_text;
  int max_iter = MinimizeOptions{}.max_iterations;
  double min_tol = MinimizeOptions{}.tolerance;

  auto add_alpha = [&](CLI::App* s) { s->add_option("--alpha", alpha, "Riesz exponent in (0,3)"); };
  auto add_grid = [&](CLI::App* s, int def) {
    s->add_option("--grid-n", grid_n, "Grid nodes (default " + std::to_string(def) + ")");
    s->add_option("--grading", grading, "Geometric panel grading in (0,1)");
  };
  auto add_a = [&](CLI::App* s) {
    s->add_option("--a-const", a_args.constant, "Constant potential a");
    s->add_option("--a-file", a_args.file, "Two-column CSV profile (r, a)");
  };

  auto* c_constants = app.add_subcommand("constants", "Sharp constants for one alpha");
  add_alpha(c_constants);
  c_constants->add_flag("--json", json_flag);

  auto* c_green = app.add_subcommand("green", "Green's function of -Delta + a with pole at 0");
  add_a(c_green);
  auto* c_robin = app.add_subcommand("robin", "Robin value phi_a(0)");
  add_a(c_robin);
  auto* c_critical = app.add_subcommand("critical-level", "Constant lambda* with phi_{-lambda*}(0) = 0");
  c_critical->add_option("--tol", tol, "Bisection tolerance");
  auto* c_identity = app.add_subcommand("identity-check", "Convolution identity of the bubble");
  add_alpha(c_identity);
  auto* c_nondeg = app.add_subcommand("nondegeneracy", "Radial nondegeneracy of the bubble");
  add_alpha(c_nondeg);
  auto* c_min = app.add_subcommand("minimize", "Minimize S_HL(a) over radial H^1_0 fields");
  add_alpha(c_min);
  add_a(c_min);
  c_min->add_flag("--json", json_flag);
  c_min->add_option("--dump-field", dump_path, "CSV of (r, u) with a JSON header line");
  c_min->add_option("--tol", min_tol, "Euler-Lagrange residual target");
  c_min->add_option("--max-iter", max_iter, "Iteration cap per restart");
  auto* c_sweep = app.add_subcommand("sweep", "Minimize along a + eps V over an eps ladder");
  add_alpha(c_sweep);
  add_a(c_sweep);
  c_sweep->add_option("--v-const", v_args.constant, "Constant perturbation V");
  c_sweep->add_option("--v-file", v_args.file, "Two-column CSV profile (r, V)");
  c_sweep->add_option("--eps", eps_text, "Strictly decreasing comma list")->required();
  c_sweep->add_option("--out", out_path, "JSON report path (companion CSV alongside)");
  c_sweep->add_option("--tol", min_tol, "Euler-Lagrange residual target");
  c_sweep->add_option("--max-iter", max_iter, "Iteration cap per restart");

  for (auto* s : {c_green, c_robin, c_critical, c_nondeg}) add_grid(s, 256);
  for (auto* s : {c_identity, c_min, c_sweep}) add_grid(s, 512);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    emit(error_json("usage_error", e.what()), "json", out);
    return kValidation;
  }
  auto grid_or = [&](int def) { return grid_n < 0 ? def : grid_n; };

  try {
    Json doc;
    if (c_constants->parsed()) {
      doc = constants_json(constants_bundle(Alpha(alpha)));
    } else if (c_green->parsed() || c_robin->parsed()) {
      const auto grid = checked_grid(DomainKind::UnitBall, grid_or(256), grading);
      const auto a = a_args.spec("a", 0.0);
      const GreenData g = solve_green(a, grid);
      doc = Json{{"a", a.describe()},
                 {"robin", num(g.robin)},
                 {"lambda1", num(first_eigenvalue(a, grid))},
                 {"grid", grid_json(*grid)}};
      if (c_green->parsed()) {
        std::vector<double> r(grid->size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = grid->node(i);
        doc["r"] = num_list(r);
        doc["G"] = num_list(g.G.values());
        doc["H"] = num_list(g.H.values());
      }
    } else if (c_critical->parsed()) {
      const auto grid = checked_grid(DomainKind::UnitBall, grid_or(256), grading);
      doc = Json{{"lambda_star", num(critical_level(tol, grid))}, {"tol", num(tol)}, {"grid", grid_json(*grid)}};
    } else if (c_identity->parsed()) {
      const auto grid = checked_grid(DomainKind::WholeSpace, grid_or(512), grading);
      doc = Json{{"max_rel_err", num(convolution_identity_error(Alpha(alpha), grid))},
                 {"grid", grid_json(*grid)},
                 {"alpha", num(alpha)}};
    } else if (c_nondeg->parsed()) {
      const auto grid = checked_grid(DomainKind::WholeSpace, grid_or(256), grading);
      const auto rep = nondegeneracy(Alpha(alpha), grid);
      doc = Json{{"kernel_residual", num(rep.kernel_residual)},
                 {"spectral_gap_estimate", num(rep.spectral_gap_estimate)},
                 {"kernel_quotient", num(rep.kernel_quotient)},
                 {"bubble_quotient", num(rep.bubble_quotient)},
                 {"alpha", num(alpha)},
                 {"grid", grid_json(*grid)}};
    } else if (c_min->parsed()) {
      MinimizeOptions opts;
      opts.grid_n = grid_or(512);
      opts.grading = grading;
      opts.tolerance = min_tol;
      opts.max_iterations = max_iter;
      checked_grid(DomainKind::UnitBall, opts.grid_n, grading);
      const Alpha al(alpha);
      const auto res = minimize_shl(a_args.spec("a", 0.0), al, opts);
      doc = minimize_json(res, opts.grid_n, grading);
      if (!dump_path.empty()) {
        std::ofstream f(dump_path);
        if (!f) throw DomainError("cannot write " + dump_path);
        const bool solved = res.concentration == Concentration::Achieved;
        const RadialField u = solved ? least_energy_solution(res)
                                     : least_energy_scale(res.discrete_energy, al) * res.minimizer;
        Json header{{"field", solved ? "least_energy_solution" : "scaled_minimizer"},
                    {"alpha", num(alpha)},
                    {"a", res.potential.describe()},
                    {"energy", num(res.energy)},
                    {"concentration", to_string(res.concentration)},
                    {"columns", Json::array({"r", "u"})}};
        f << header.dump() << "\n";
        char line[64];
        for (std::size_t i = 0; i < u.size(); ++i) {
          std::snprintf(line, sizeof line, "%.12g,%.12g\n", u.grid()->node(i), u[i]);
          f << line;
        }
      }
    } else if (c_sweep->parsed()) {
      MinimizeOptions opts;
      opts.grid_n = grid_or(512);
      opts.grading = grading;
      opts.tolerance = min_tol;
      opts.max_iterations = max_iter;
      checked_grid(DomainKind::UnitBall, opts.grid_n, grading);
      const auto ladder = parse_list(eps_text);
      const auto rep = epsilon_sweep(a_args.spec("a", -std::numbers::pi * std::numbers::pi / 4.0),
                                     v_args.spec("V", -1.0), Alpha(alpha), ladder, opts);
      std::optional<MuCheck> mu;
      try {
        mu = mu_expansion_check(rep);
      } catch (const ConvergenceError&) {
      }
      doc = sweep_json(rep, mu);
      if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw DomainError("cannot write " + out_path);
        f << doc.dump(2) << "\n";
        std::ofstream c(companion_csv(out_path));
        c << "eps,energy,lambda_hat,eps_lambda\n";
        char line[128];
        for (const auto& p : rep.points) {
          std::snprintf(line, sizeof line, "%.12g,%.12g,%.12g,%.12g\n", p.eps, p.energy, p.lambda_hat, p.eps_lambda);
          c << line;
        }
        return kOk;
      }
    }
    emit(doc, format, out);
    return kOk;
  } catch (const DomainError& e) {
    emit(error_json(e.code(), e.what()), "json", out);
    return kValidation;
  } catch (const Error& e) {
    emit(error_json(e.code(), e.what()), "json", out);
    return kNumerical;
  } catch (const std::exception& e) {
    emit(error_json("internal_error", e.what()), "json", out);
    return kNumerical;
  }
}

}  // namespace choquard::cli
