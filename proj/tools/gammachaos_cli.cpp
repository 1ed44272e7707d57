// gammachaos_cli: moments | bound | density | stein | verify | report
//
// Configuration is one JSON document (--config); flags override it. The output
// directory comes from --output-dir, else $GAMMACHAOS_OUTPUT_DIR, else the
// config's "output_dir", else "gammachaos_out".
// Exit codes: 0 ok, 1 invalid input, 2 numerical failure, 3 precondition refused.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gammachaos/bounds.hpp"
#include "gammachaos/identities.hpp"
#include "gammachaos/json_io.hpp"
#include "gammachaos/simulate.hpp"
#include "gammachaos/stein.hpp"

namespace fs = std::filesystem;
using namespace gammachaos;

namespace {

const char* kVersion = "1.0.0";

struct Flags {
  std::string config, output_dir, spec, grid, theorem, method;
  std::optional<double> alpha, x, bandwidth;
  std::optional<std::uint64_t> seed, n, chunk_size;
  std::optional<int> workers, k, s;
};

struct Job {
  std::string command;
  json cfg;  // merged configuration (canonical parts only)
  McConfig mc;
  fs::path out;
};

const std::set<std::string> kTopKeys = {"command", "spec",   "alpha",  "grid",      "k",         "x",
                                        "theorem", "s",      "mc",     "output_dir", "tolerances", "method",
                                        "bandwidth"};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      std::size_t pos = 0;
      v.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError("--grid: '" + tok + "' is not a number");
    }
  }
  require(!v.empty(), "--grid: empty list");
  return v;
}

Job make_run(const std::string& command, const Flags& f) {
  Job r;
  r.command = command;
  json cfg = json::object();
  if (!f.config.empty()) {
    cfg = read_json_file(f.config);
    reject_unknown_keys(cfg, kTopKeys, "config");
    if (cfg.contains("command") && cfg["command"] != command)
      throw ValidationError("config is for command '" + cfg["command"].get<std::string>() + "'");
  }
  std::string out_cfg;
  if (cfg.contains("output_dir")) out_cfg = get_as<std::string>(cfg["output_dir"], "output_dir");
  cfg.erase("output_dir");
  if (!f.spec.empty()) {
    try {
      cfg["spec"] = json::parse(f.spec);
    } catch (const json::parse_error&) {
      cfg["spec"] = f.spec;  // a path
    }
  }
  if (cfg.contains("spec") && cfg["spec"].is_string()) {
    // resolve file specs relative to the config file
    fs::path p = cfg["spec"].get<std::string>();
    if (p.is_relative() && !f.config.empty() && !fs::exists(p)) p = fs::path(f.config).parent_path() / p;
    cfg["spec"] = read_json_file(p.string());
  }
  if (f.alpha) cfg["alpha"] = *f.alpha;
  if (f.x) cfg["x"] = *f.x;
  if (f.k) cfg["k"] = *f.k;
  if (f.s) cfg["s"] = *f.s;
  if (f.bandwidth) cfg["bandwidth"] = *f.bandwidth;
  if (!f.theorem.empty()) cfg["theorem"] = f.theorem;
  if (!f.method.empty()) cfg["method"] = f.method;
  if (!f.grid.empty()) cfg["grid"] = parse_list(f.grid);
  r.mc = cfg.contains("mc") ? parse_mc(cfg["mc"]) : McConfig{};
  if (f.seed) r.mc.seed = *f.seed;
  if (f.n) r.mc.n = *f.n;
  if (f.chunk_size) r.mc.chunk_size = *f.chunk_size;
  if (f.workers) r.mc.workers = *f.workers;
  require(r.mc.workers >= 1 && r.mc.workers <= 1024, "workers must be in [1, 1024]");
  // worker count never enters the canonical config
  cfg["mc"] = {{"n", r.mc.n}, {"seed", r.mc.seed}, {"chunk_size", r.mc.chunk_size}};
  cfg["command"] = command;
  r.cfg = cfg;

  if (!f.output_dir.empty())
    r.out = f.output_dir;
  else if (const char* env = std::getenv("GAMMACHAOS_OUTPUT_DIR"); env && *env)
    r.out = env;
  else if (!out_cfg.empty())
    r.out = out_cfg;
  else
    r.out = "gammachaos_out";
  return r;
}

template <class T>
T cfg_get(const Job& r, const std::string& key, T def) {
  return r.cfg.contains(key) ? get_as<T>(r.cfg.at(key), key) : def;
}

ChaosVector spec_of(const Job& r) {
  if (!r.cfg.contains("spec")) throw ValidationError("a chaos 'spec' is required for '" + r.command + "'");
  return parse_chaos_spec(r.cfg.at("spec"));
}

double alpha_of(const Job& r, const ChaosVector& F) {
  if (r.cfg.contains("alpha")) {
    const double a = get_as<double>(r.cfg.at("alpha"), "alpha");
    require(std::isfinite(a) && a > 0, "alpha must be positive");
    return a;
  }
  return variance(F);
}

std::vector<double> grid_of(const Job& r) {
  if (!r.cfg.contains("grid")) throw ValidationError("a 'grid' is required for '" + r.command + "'");
  return parse_grid(r.cfg.at("grid"));
}

void write_file(const fs::path& p, const std::string& s) {
  std::ofstream o(p, std::ios::binary);
  if (!o) throw ValidationError("cannot write '" + p.string() + "'");
  o << s;
}

void write_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

void write_csv(const fs::path& p, const std::vector<std::string>& header, const std::vector<std::vector<double>>& rows) {
  std::string s;
  for (std::size_t i = 0; i < header.size(); ++i) s += (i ? "," : "") + header[i];
  s += "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) s += (i ? "," : "") + fmt17(row[i]);
    s += "\n";
  }
  write_file(p, s);
}

void write_manifest(const Job& r, const std::vector<std::string>& files) {
  const std::string canon = r.cfg.dump();
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
  write_json(r.out / "manifest.json", {{"tool", "gammachaos_cli"},
                                       {"version", kVersion},
                                       {"command", r.command},
                                       {"seed", r.mc.seed},
                                       {"n", r.mc.n},
                                       {"chunk_size", r.mc.chunk_size},
                                       {"config_hash", hash},
                                       {"config", r.cfg},
                                       {"files", files}});
}

// ------------------------------------------------------------------ commands

json moments_json(const ChaosVector& F, double alpha) {
  json j;
  j["EF"] = expectation(F);
  j["EF2"] = moment(F, 2);
  j["EF3"] = moment(F, 3);
  j["EF4"] = moment(F, 4);
  j["alpha"] = alpha;
  const int q = F.pure_order();
  j["q"] = q > 0 ? json(q) : json(nullptr);
  if (q > 0 && q % 2 == 1)
    throw PreconditionError("chaos order " + std::to_string(q) +
                            " is odd; the fourth-moment combination and Theta are only supported for even orders");
  j["fourth_moment_combo"] = fourth_moment_combo(F, alpha);
  if (q > 0) {
    const auto T = theta(F, alpha);
    j["theta_var"] = expect_product(T, T);
  } else {
    j["theta_var"] = nullptr;
  }
  return j;
}

int cmd_moments(const Job& r) {
  const auto F = spec_of(r);
  const json j = moments_json(F, alpha_of(r, F));
  fs::create_directories(r.out);
  write_json(r.out / "moments.json", j);
  write_manifest(r, {"moments.json"});
  std::cout << j.dump() << "\n";
  return 0;
}

int cmd_density(const Job& r) {
  const auto F = spec_of(r);
  const double alpha = alpha_of(r, F);
  const auto xs = grid_of(r);
  const int k = cfg_get<int>(r, "k", 0);
  const auto method = cfg_get<std::string>(r, "method", "malliavin");
  std::vector<std::vector<double>> rows;
  json info = {{"method", method}, {"k", k}, {"alpha", alpha}};
  if (method == "malliavin") {
    const auto est = density_malliavin(F, alpha, k, xs, r.mc);
    std::uint64_t rej = est.front().rejected;
    for (std::size_t i = 0; i < xs.size(); ++i)
      rows.push_back({xs[i], est[i].value, est[i].stderr_, double(est[i].n)});
    info["rejected"] = rej;
    info["rejection_rate"] = double(rej) / double(r.mc.n);
    info["unstable_points"] = json::array();
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (est[i].unstable) info["unstable_points"].push_back(xs[i]);
  } else if (method == "kde") {
    require(k == 0, "kde estimates the density only (k = 0)");
    const double h = cfg_get<double>(r, "bandwidth", 1.06 * std::sqrt(alpha) * std::pow(double(r.mc.n), -0.2));
    info["bandwidth"] = h;
    const auto est = density_kde(F, alpha, xs, h, r.mc);
    for (std::size_t i = 0; i < xs.size(); ++i)
      rows.push_back({xs[i], est[i].value, est[i].stderr_, double(est[i].n)});
  } else if (method == "cf") {
    require(k == 0, "the Fourier oracle computes the density only (k = 0)");
    if (!r.cfg.at("spec").is_object() || r.cfg.at("spec").value("type", "") != "second_chaos")
      throw ValidationError("the Fourier oracle needs a second_chaos spec");
    SecondChaosSpec sc;
    sc.zeta = r.cfg.at("spec").at("zeta").get<std::vector<double>>();
    std::sort(sc.zeta.rbegin(), sc.zeta.rend());
    sc.alpha = alpha;
    const double h = cfg_get<double>(r, "bandwidth", 0.0);
    const auto v = density_cf_oracle(sc, xs, h);
    for (std::size_t i = 0; i < xs.size(); ++i) rows.push_back({xs[i], v[i], 0.0, 0.0});
  } else {
    throw ValidationError("unknown density method '" + method + "' (malliavin, kde, cf)");
  }
  fs::create_directories(r.out);
  write_csv(r.out / "density.csv", {"x", "estimate", "stderr", "n"}, rows);
  write_json(r.out / "density.json", info);
  write_manifest(r, {"density.csv", "density.json"});
  std::cout << info.dump() << "\n";
  return 0;
}

BoundReport run_bound(const Job& r, const ChaosVector& F, double alpha, const std::vector<double>& xs) {
  const int q = F.pure_order();
  const auto thm = cfg_get<std::string>(r, "theorem", q > 0 ? "1.1" : "6.1");
  if (thm == "1.1") return assemble_bound_thm11(F, alpha, xs, r.mc);
  if (thm == "1.2") return assemble_bound_thm12(F, alpha, cfg_get<int>(r, "k", 1), xs, r.mc);
  if (thm == "6.1") return assemble_bound_thm61(F, alpha, cfg_get<int>(r, "s", 8), xs, r.mc);
  throw ValidationError("unknown theorem '" + thm + "' (1.1, 1.2, 6.1)");
}

json bound_outputs(const Job& r, const ChaosVector& F, double alpha, const std::vector<double>& xs,
                   std::vector<std::vector<double>>& rows) {
  const auto rep = run_bound(r, F, alpha, xs);
  const auto dens = density_malliavin(F, alpha, rep.k, xs, r.mc);
  const GammaTarget tg(alpha);
  json j = to_json(rep);
  j["comparison"] = json::array();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double target = gamma_pdf_deriv(tg, rep.k, xs[i]);
    const double diff = std::abs(dens[i].value - target);
    rows.push_back({xs[i], dens[i].value, target, diff, rep.points[i].bound});
    j["comparison"].push_back({{"x", xs[i]},
                               {"density_mc", dens[i].value},
                               {"stderr", dens[i].stderr_},
                               {"density_target", target},
                               {"abs_diff", diff},
                               {"bound", rep.points[i].bound},
                               {"dominated", diff <= rep.points[i].bound + 4 * dens[i].stderr_}});
  }
  return j;
}

int cmd_bound(const Job& r) {
  const auto F = spec_of(r);
  const double alpha = alpha_of(r, F);
  const auto xs = grid_of(r);
  std::vector<std::vector<double>> rows;
  const json j = bound_outputs(r, F, alpha, xs, rows);
  fs::create_directories(r.out);
  write_csv(r.out / "bound.csv", {"x", "density_mc", "density_target", "abs_diff", "bound"}, rows);
  write_json(r.out / "bound_report.json", j);
  write_manifest(r, {"bound.csv", "bound_report.json"});
  std::cout << json{{"theorem", j["theorem"]}, {"points", xs.size()}, {"radical", j["radical"]}}.dump() << "\n";
  return 0;
}

int cmd_stein(const Job& r) {
  if (!r.cfg.contains("alpha")) throw ValidationError("'alpha' is required for 'stein'");
  if (!r.cfg.contains("x")) throw ValidationError("'x' (the threshold) is required for 'stein'");
  const double alpha = get_as<double>(r.cfg.at("alpha"), "alpha");
  const double x = get_as<double>(r.cfg.at("x"), "x");
  const int k = cfg_get<int>(r, "k", 0);
  const auto ys = grid_of(r);
  const auto sol = solve(alpha, k, x, ys);
  const auto env = envelope(alpha, k, x);
  std::vector<std::vector<double>> rows;
  double max_res = 0.0;
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    const double y = sol.grid[i];
    rows.push_back({y, sol.f_values[i], sol.fprime_values[i], sol.residuals[i], env(y)});
    if (y != 0.0) max_res = std::max(max_res, std::abs(sol.residuals[i]));
  }
  const json info = {{"alpha", alpha},       {"k", k},
                     {"x", x},               {"Eh", sol.Eh},
                     {"Eh_quadrature", sol.Eh_quadrature}, {"max_abs_residual", max_res},
                     {"envelope", to_json(env)}};
  fs::create_directories(r.out);
  write_csv(r.out / "stein.csv", {"y", "f", "fprime", "residual", "envelope"}, rows);
  write_json(r.out / "stein.json", info);
  write_manifest(r, {"stein.csv", "stein.json"});
  std::cout << info.dump() << "\n";
  return 0;
}

int cmd_verify(const Job& r) {
  IdentitySuiteOptions o;
  o.seed = r.mc.seed;
  if (r.cfg.contains("tolerances")) {
    const auto& t = r.cfg.at("tolerances");
    reject_unknown_keys(t, {"identity", "recursion"}, "tolerances");
    if (t.contains("identity")) o.tol = get_as<double>(t.at("identity"), "tolerances.identity");
    if (t.contains("recursion")) o.recursion_tol = get_as<double>(t.at("recursion"), "tolerances.recursion");
  }
  auto res = operator_identities(o);
  for (auto& c : contraction_identities(o)) res.push_back(c);
  json j = json::array();
  bool ok = true;
  for (const auto& c : res) {
    j.push_back({{"name", c.name}, {"cases", c.cases}, {"max_error", c.max_error}, {"tolerance", c.tolerance},
                 {"pass", c.pass()}});
    ok = ok && c.pass();
  }
  const json out = {{"all_pass", ok}, {"checks", j}};
  fs::create_directories(r.out);
  write_json(r.out / "verify.json", out);
  write_manifest(r, {"verify.json"});
  for (const auto& c : res)
    std::printf("%s %-30s cases=%d max_error=%.3g tol=%.1g\n", c.pass() ? "PASS" : "FAIL", c.name.c_str(), c.cases,
                c.max_error, c.tolerance);
  return ok ? 0 : 2;
}

// moments + bound + density comparison in one document.
int cmd_report(const Job& r) {
  const auto F = spec_of(r);
  const double alpha = alpha_of(r, F);
  const auto xs = grid_of(r);
  json j;
  j["moments"] = moments_json(F, alpha);
  std::vector<std::vector<double>> rows;
  j["bound"] = bound_outputs(r, F, alpha, xs, rows);
  bool dominated = true;
  for (const auto& c : j["bound"]["comparison"]) dominated = dominated && c["dominated"].get<bool>();
  j["all_dominated"] = dominated;
  fs::create_directories(r.out);
  write_json(r.out / "report.json", j);
  write_csv(r.out / "bound.csv", {"x", "density_mc", "density_target", "abs_diff", "bound"}, rows);
  write_manifest(r, {"report.json", "bound.csv"});
  std::cout << json{{"all_dominated", dominated}}.dump() << "\n";
  return 0;
}

int fail(int code, const std::string& kind, const std::string& msg) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", msg}}}, {"exit_code", code}}.dump() << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gamma approximation of Wiener chaos variables"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Flags f;
  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"moments", "exact moments, fourth-moment combination, Var(Theta)"},
      {"bound", "pointwise density bound with Monte Carlo comparison"},
      {"density", "density (or derivative) estimate on a grid"},
      {"stein", "Stein equation solution, residuals and envelope on a grid"},
      {"verify", "exact-identity suite on randomized kernels"},
      {"report", "moments, bound and density comparison in one document"}};
  for (const auto& [name, help] : cmds) {
    auto* s = app.add_subcommand(name, help);
    s->add_option("-c,--config", f.config, "JSON configuration file");
    s->add_option("-o,--output-dir", f.output_dir, "output directory");
    s->add_option("--spec", f.spec, "chaos spec as inline JSON or a file path");
    s->add_option("--alpha", f.alpha, "Gamma shape (default E[F^2])");
    s->add_option("--grid", f.grid, "comma-separated evaluation points");
    s->add_option("--x", f.x, "Stein threshold");
    s->add_option("--k", f.k, "derivative order");
    s->add_option("--theorem", f.theorem, "bound: 1.1, 1.2 or 6.1");
    s->add_option("--s", f.s, "general bound: integrability exponent s (4, 8, 12)");
    s->add_option("--method", f.method, "density: malliavin, kde or cf");
    s->add_option("--bandwidth", f.bandwidth, "kde bandwidth / Fourier smoothing");
    s->add_option("--seed", f.seed, "Monte Carlo seed");
    s->add_option("--n", f.n, "Monte Carlo sample count");
    s->add_option("--chunk-size", f.chunk_size, "Monte Carlo chunk size");
    s->add_option("--workers", f.workers, "worker threads (results do not depend on it)");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(1, "usage", e.what());
  }
  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    const Job r = make_run(cmd, f);
    if (cmd == "moments") return cmd_moments(r);
    if (cmd == "bound") return cmd_bound(r);
    if (cmd == "density") return cmd_density(r);
    if (cmd == "stein") return cmd_stein(r);
    if (cmd == "verify") return cmd_verify(r);
    return cmd_report(r);
  } catch (const ValidationError& e) {
    return fail(1, "validation", e.what());
  } catch (const json::exception& e) {
    return fail(1, "validation", e.what());
  } catch (const BudgetError& e) {
    return fail(2, "budget", e.what());
  } catch (const NumericalError& e) {
    return fail(2, "numerical", e.what());
  } catch (const PreconditionError& e) {
    return fail(3, "precondition", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(1, "io", e.what());
  } catch (const std::exception& e) {
    return fail(2, "internal", e.what());
  }
}
