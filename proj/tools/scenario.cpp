#include "scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace extps::cli {

namespace {

using nlohmann::json;

struct Document {
  std::string path;
  std::string text;
  json root;

  // Line of the first occurrence of "key" in the source; 1 when absent.
  std::size_t line_of(const std::string& key) const {
    const auto pos = text.find('"' + key + '"');
    if (pos == std::string::npos) return 1;
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(path + ":" + std::to_string(line_of(key)) + ": " + what);
  }
};

Document read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ":0: cannot open file");
  std::stringstream ss;
  ss << in.rdbuf();
  Document d{path, ss.str(), {}};
  try {
    d.root = json::parse(d.text);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, d.text.size());
    const auto line = 1 + std::count(d.text.begin(), d.text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError(path + ":" + std::to_string(line) + ": JSON parse error: " + e.what());
  }
  if (!d.root.is_object()) throw ConfigError(path + ":1: top level must be an object");
  return d;
}

void only_keys(const Document& d, const json& obj, const std::string& section, std::set<std::string> allowed) {
  if (!obj.is_object()) d.fail(section, "'" + section + "' must be an object");
  for (const auto& [k, v] : obj.items()) {
    if (!allowed.count(k)) d.fail(k, "unknown key '" + k + "' in " + section);
  }
}

double number(const Document& d, const json& obj, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) d.fail(key, "'" + key + "' must be a number");
  return obj[key].get<double>();
}

std::string text(const Document& d, const json& obj, const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) d.fail(key, "'" + key + "' must be a string");
  return obj[key].get<std::string>();
}

ProfilePtr profile(const Document& d, const json& v, const std::string& key) {
  try {
    if (v.is_number()) return constant_profile(v.get<double>());
    if (v.is_string()) return expression_profile(v.get<std::string>(), "t");
    if (v.is_object() && v.contains("times") && v.contains("values")) {
      return tabulated_profile(v["times"].get<std::vector<double>>(), v["values"].get<std::vector<double>>());
    }
  } catch (const std::exception& e) {
    d.fail(key, "profile '" + key + "': " + e.what());
  }
  d.fail(key, "profile '" + key + "' must be a number, an expression in t, or {\"times\", \"values\"}");
}

std::string stem(const std::string& path) { return std::filesystem::path(path).stem().string(); }

}  // namespace

Scenario load_scenario(const std::string& path) {
  const Document d = read(path);
  const json& r = d.root;
  only_keys(d, r, "scenario",
            {"model", "lagrangian", "parameters", "profiles", "gauge", "initial", "integrator", "grid", "ermakov",
             "checks"});
  Scenario s;
  s.path = path;
  s.name = stem(path);
  s.model = text(d, r, "model", s.model);
  if (s.model != "original" && s.model != "extended") d.fail("model", "model must be 'original' or 'extended'");
  if (r.contains("lagrangian")) s.lagrangian = text(d, r, "lagrangian", "");

  if (r.contains("parameters")) {
    const json& p = r["parameters"];
    only_keys(d, p, "parameters", {"m", "nu"});
    s.m = number(d, p, "m", s.m);
    if (!(s.m > 0.0)) d.fail("m", "m must be positive");
    if (p.contains("nu")) {
      s.nu = number(d, p, "nu", 0.0);
      if (!(*s.nu >= 0.0)) d.fail("nu", "nu must be >= 0");
    }
  }

  s.omega = constant_profile(1.0);
  s.eta_fric = constant_profile(0.0);
  if (r.contains("profiles")) {
    const json& p = r["profiles"];
    only_keys(d, p, "profiles", {"omega", "eta_fric", "f"});
    if (p.contains("omega")) s.omega = profile(d, p["omega"], "omega");
    if (p.contains("eta_fric")) s.eta_fric = profile(d, p["eta_fric"], "eta_fric");
    if (p.contains("f")) s.f = profile(d, p["f"], "f");
  }

  if (r.contains("gauge")) {
    const json& g = r["gauge"];
    only_keys(d, g, "gauge", {"tau1", "tau2", "t1", "t2"});
    s.gauge.tau1 = number(d, g, "tau1", s.gauge.tau1);
    s.gauge.tau2 = number(d, g, "tau2", s.gauge.tau2);
    s.gauge.t1 = number(d, g, "t1", s.gauge.t1);
    s.gauge.t2 = number(d, g, "t2", s.gauge.t2);
    try {
      s.gauge.validate();
    } catch (const std::exception& e) {
      d.fail("gauge", e.what());
    }
  }

  if (r.contains("initial")) {
    const json& i = r["initial"];
    only_keys(d, i, "initial", {"x1", "x2", "p1", "p2"});
    for (const char* k : {"x1", "x2", "p1", "p2"}) s.initial[k] = number(d, i, k, s.initial[k]);
  }

  if (r.contains("integrator")) {
    const json& i = r["integrator"];
    only_keys(d, i, "integrator", {"method", "abs_tol", "rel_tol", "max_step"});
    const std::string method = text(d, i, "method", "rk45");
    if (method == "rk4") {
      s.policy.method = Method::RK4;
    } else if (method == "rk45") {
      s.policy.method = Method::RK45;
    } else {
      d.fail("method", "method must be 'rk4' or 'rk45'");
    }
    s.policy.abs_tol = number(d, i, "abs_tol", s.policy.abs_tol);
    s.policy.rel_tol = number(d, i, "rel_tol", s.policy.rel_tol);
    s.policy.max_step = number(d, i, "max_step", s.policy.max_step);
    try {
      s.policy.validate();
    } catch (const std::exception& e) {
      d.fail("integrator", e.what());
    }
  }

  if (r.contains("grid")) {
    const json& g = r["grid"];
    only_keys(d, g, "grid", {"intervals"});
    if (g.contains("intervals")) {
      if (!g["intervals"].is_number_integer() || g["intervals"].get<long>() < 1) {
        d.fail("intervals", "intervals must be a positive integer");
      }
      s.intervals = g["intervals"].get<std::size_t>();
    }
  }

  if (r.contains("ermakov")) {
    const json& e = r["ermakov"];
    only_keys(d, e, "ermakov", {"rho0", "rhodot0"});
    s.rho0 = number(d, e, "rho0", s.rho0);
    s.rhodot0 = number(d, e, "rhodot0", s.rhodot0);
    if (!(s.rho0 > 0.0)) d.fail("rho0", "rho0 must be positive");
  }

  if (r.contains("checks")) {
    const json& c = r["checks"];
    only_keys(d, c, "checks", {"equivalence", "constraint_drift", "hamiltonian", "invariant_drift"});
    s.checks.equivalence = number(d, c, "equivalence", s.checks.equivalence);
    s.checks.constraint_drift = number(d, c, "constraint_drift", s.checks.constraint_drift);
    s.checks.hamiltonian = number(d, c, "hamiltonian", s.checks.hamiltonian);
    s.checks.invariant_drift = number(d, c, "invariant_drift", s.checks.invariant_drift);
  }
  return s;
}

TransformDocument load_transform(const std::string& path, const Context& ctx) {
  const Document d = read(path);
  const json& r = d.root;
  only_keys(d, r, "transform", {"A1", "A2", "B", "D1", "D2", "G", "C1", "domain"});
  for (const char* k : {"A1", "A2", "B"}) {
    if (!r.contains(k)) d.fail(k, std::string("missing generator '") + k + "'");
  }
  TransformDocument t;
  t.path = path;
  t.name = stem(path);
  try {
    std::optional<std::string> g;
    if (r.contains("G")) g = text(d, r, "G", "0");
    t.spec = TransformSpec::parse(text(d, r, "A1", ""), text(d, r, "A2", ""), text(d, r, "B", ""),
                                  text(d, r, "D1", "0"), text(d, r, "D2", "0"), ctx, g);
    if (r.contains("C1")) t.c1 = parse(text(d, r, "C1", ""), ctx);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    d.fail("A1", e.what());
  }
  if (r.contains("domain")) {
    const json& dom = r["domain"];
    only_keys(d, dom, "domain", {"lo", "hi"});
    t.lo = number(d, dom, "lo", t.lo);
    t.hi = number(d, dom, "hi", t.hi);
    if (!(t.hi > t.lo)) d.fail("domain", "domain needs hi > lo");
  }
  return t;
}

}  // namespace extps::cli
