#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bounds.hpp"
#include "chaos.hpp"
#include "errors.hpp"
#include "monte_carlo.hpp"
#include "stein.hpp"

namespace gammachaos {

using json = nlohmann::json;

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ValidationError(where + ": unknown key '" + k + "'");
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("'" + path + "' is not valid JSON: " + e.what());
  }
}

template <class T>
T get_as(const json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError(what + ": wrong type");
  }
}

// Chaos specifications:
//   {"type": "second_chaos", "zeta": [...]}                  sum zeta_i (z_i^2 - 1)
//   {"type": "separable", "dim": d, "coefficients": {"n": c}}  sum_i sum_n c_n He_n(z_i)
//   {"type": "chaos", "dim": d, "constant": c,
//    "kernels": [{"order": n, "entries": [{"index": [...], "value": v}]}]}
// or a string naming a file holding one of these.
inline ChaosVector parse_chaos_spec(const json& spec) {
  if (spec.is_string()) return parse_chaos_spec(read_json_file(spec.get<std::string>()));
  if (!spec.is_object() || !spec.contains("type")) throw ValidationError("spec: expected an object with a 'type'");
  const auto type = get_as<std::string>(spec.at("type"), "spec.type");
  if (type == "second_chaos") {
    reject_unknown_keys(spec, {"type", "zeta"}, "spec");
    if (!spec.contains("zeta")) throw ValidationError("spec: 'zeta' is required");
    const auto zeta = get_as<std::vector<double>>(spec.at("zeta"), "spec.zeta");
    require(!zeta.empty(), "spec.zeta must be non-empty");
    for (double z : zeta) require(std::isfinite(z) && z != 0.0, "spec.zeta entries must be finite and non-zero");
    return ChaosVector::from_kernel(diagonal_tensor(zeta));
  }
  if (type == "separable") {
    reject_unknown_keys(spec, {"type", "dim", "coefficients"}, "spec");
    const int d = get_as<int>(spec.at("dim"), "spec.dim");
    require(d >= 1 && d <= 4096, "spec.dim must be in [1, 4096]");
    ChaosVector F(d, 0.0);
    const json coeffs = spec.at("coefficients");
    if (!coeffs.is_object()) throw ValidationError("spec.coefficients: expected an object");
    for (const auto& [key, val] : coeffs.items()) {
      int n = 0;
      try {
        n = std::stoi(key);
      } catch (const std::exception&) {
        throw ValidationError("spec.coefficients: key '" + key + "' is not an order");
      }
      require(n >= 1 && n <= kDefaultMaxOrder, "spec.coefficients: order out of range");
      const double c = get_as<double>(val, "spec.coefficients");
      require(std::isfinite(c), "spec.coefficients must be finite");
      SymTensor f(n, d);
      for (int i = 0; i < d; ++i) f.set(MultiIndex(n, static_cast<std::uint16_t>(i)), c);
      F.add_kernel(f);
    }
    require(F.top_order() >= 1, "spec.coefficients: no non-zero coefficient");
    return F;
  }
  if (type == "chaos") {
    reject_unknown_keys(spec, {"type", "dim", "constant", "kernels"}, "spec");
    const int d = get_as<int>(spec.at("dim"), "spec.dim");
    require(d >= 1 && d <= 4096, "spec.dim must be in [1, 4096]");
    ChaosVector F(d, spec.contains("constant") ? get_as<double>(spec.at("constant"), "spec.constant") : 0.0);
    for (const auto& k : get_as<json>(spec.at("kernels"), "spec.kernels")) {
      reject_unknown_keys(k, {"order", "entries"}, "spec.kernels[]");
      const int n = get_as<int>(k.at("order"), "kernel.order");
      require(n >= 1 && n <= kDefaultMaxOrder, "kernel.order out of range");
      SymTensor f(n, d);
      for (const auto& e : get_as<json>(k.at("entries"), "kernel.entries")) {
        reject_unknown_keys(e, {"index", "value"}, "kernel.entries[]");
        auto idx = get_as<std::vector<int>>(e.at("index"), "entry.index");
        require(static_cast<int>(idx.size()) == n, "entry.index length must equal the kernel order");
        MultiIndex m;
        for (int i : idx) {
          require(i >= 0 && i < d, "entry.index out of range");
          m.push_back(static_cast<std::uint16_t>(i));
        }
        const double v = get_as<double>(e.at("value"), "entry.value");
        require(std::isfinite(v), "entry.value must be finite");
        f.set(m, v);
      }
      F.add_kernel(f);
    }
    return F;
  }
  throw ValidationError("spec: unknown type '" + type + "'");
}

inline McConfig parse_mc(const json& j, McConfig cfg = {}) {
  reject_unknown_keys(j, {"n", "seed", "chunk_size", "workers"}, "mc");
  if (j.contains("n")) cfg.n = get_as<std::uint64_t>(j.at("n"), "mc.n");
  if (j.contains("seed")) cfg.seed = get_as<std::uint64_t>(j.at("seed"), "mc.seed");
  if (j.contains("chunk_size")) cfg.chunk_size = get_as<std::uint64_t>(j.at("chunk_size"), "mc.chunk_size");
  if (j.contains("workers")) cfg.workers = get_as<int>(j.at("workers"), "mc.workers");
  return cfg;
}

// [a, b, ...] or {"from": a, "to": b, "n": k} (inclusive, uniform).
inline std::vector<double> parse_grid(const json& j) {
  if (j.is_array()) {
    auto g = get_as<std::vector<double>>(j, "grid");
    require(!g.empty(), "grid must be non-empty");
    for (double x : g) require(std::isfinite(x), "grid entries must be finite");
    return g;
  }
  reject_unknown_keys(j, {"from", "to", "n"}, "grid");
  const double a = get_as<double>(j.at("from"), "grid.from"), b = get_as<double>(j.at("to"), "grid.to");
  const int n = get_as<int>(j.at("n"), "grid.n");
  require(std::isfinite(a) && std::isfinite(b) && n >= 1 && n <= 100000, "grid: invalid range");
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return g;
}

inline json to_json(const McEstimate& e) {
  return {{"value", e.value},         {"stderr", e.stderr_},       {"n", e.n},
          {"seed", e.seed},           {"chunk_size", e.chunk_size}, {"nonfinite", e.nonfinite},
          {"rejected", e.rejected},   {"max_share", e.max_share},   {"unstable", e.unstable}};
}

inline json to_json(const SteinEnvelope& env) {
  switch (env.branch) {
    case SteinEnvelope::Branch::Positive:
      return {{"branch", "positive"}, {"d1", env.d1}, {"d2", env.d2}, {"d3", env.d3}};
    case SteinEnvelope::Branch::Negative:
      return {{"branch", "negative"}, {"e1", env.e1}, {"e2", env.e2}};
    case SteinEnvelope::Branch::Origin:
      return {{"branch", "origin"}, {"g", env.g}};
  }
  return {};
}

inline json to_json(const BoundReport& r) {
  json j;
  j["theorem"] = r.theorem;
  j["alpha"] = r.alpha;
  j["q"] = r.q;
  j["k"] = r.k;
  if (r.theorem == "6.1") {
    j["s"] = r.s;
    j["p"] = r.p_exp;
    j["r"] = r.r_exp;
    j["R_s"] = r.R_s;
    j["R_cubic"] = r.R_3;
  } else {
    j["fourth_moment_combo"] = r.fourth_moment_combo;
    j["theta_var"] = r.theta_var;
    j["C1"] = r.C1;
  }
  j["radical"] = r.radical;
  j["negative_moments"] = json::object();
  for (const auto& [k, v] : r.negative_moments) j["negative_moments"][k] = to_json(v);
  j["exact_moments"] = r.exact_moments;
  j["points"] = json::array();
  for (const auto& p : r.points)
    j["points"].push_back(
        {{"x", p.x}, {"stein_envelope", to_json(p.env)}, {"stein_factor", p.stein_factor}, {"P", p.P}, {"bound", p.bound}});
  j["warnings"] = r.warnings;
  return j;
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace gammachaos
