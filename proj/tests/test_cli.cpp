#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::path(EXTPS_WORK_DIR);
const fs::path kScenarios = fs::path(EXTPS_SCENARIO_DIR);

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Run extps(const std::string& args) {
  fs::create_directories(kWork);
  const fs::path out = kWork / "stdout.txt", err = kWork / "stderr.txt";
  const std::string cmd = std::string(EXTPS_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

std::string scenario(const std::string& name) { return (kScenarios / name).string(); }

std::string out_dir(const std::string& name) {
  const fs::path d = kWork / name;
  fs::remove_all(d);
  return d.string();
}

json summary(const std::string& dir) { return json::parse(slurp(fs::path(dir) / "summary.json")); }

fs::path write_temp(const std::string& name, const std::string& body) {
  fs::create_directories(kWork);
  const fs::path p = kWork / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("analyze: reference scenario golden values") {
  const auto dir = out_dir("analyze_reference");
  const Run r = extps("analyze " + scenario("reference.json") + " --out " + dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("det = m^2*f(t)^-2\n") != std::string::npos);
  CHECK(r.out.find("det_tau = 0\n") != std::string::npos);
  CHECK(r.out.find("H_tau = t_tau_dot*phi\n") != std::string::npos);
  CHECK(r.out.find("Delta = [[0, -1], [1, 0]]") != std::string::npos);
  CHECK(r.out.find("C = [[0, 1], [-1, 0]]") != std::string::npos);
  for (const char* line : {"{x1_tau, p1_tau}_DB = 1", "{x2_tau, p2_tau}_DB = 1",
                           "{x1_tau, p_tau}_DB = -m^-1*p1_tau*f(t_tau)", "{x2_tau, p_tau}_DB = -m^-1*p2_tau*f(t_tau)",
                           "{p1_tau, p_tau}_DB = m*x1_tau*f(t_tau)^-1*w(t_tau)^2",
                           "{p2_tau, p_tau}_DB = m*x2_tau*f(t_tau)^-1*w(t_tau)^2"}) {
    CHECK_MESSAGE(r.out.find(line) != std::string::npos, line);
  }
  const json s = summary(dir);
  CHECK(s["dirac_brackets"].size() == 6);
  CHECK(s["det"] == "m^2*f(t)^-2");
  CHECK(s["h_tau_is_t_tau_dot_phi"] == true);
}

TEST_CASE("analyze: free particle has no constraints") {
  const Run r = extps("analyze " + scenario("free_particle.json") + " --out " + out_dir("free"));
  CHECK(r.code == 0);
  CHECK(r.out.find("no constraints") != std::string::npos);
}

TEST_CASE("exit code 2 for usage and config errors") {
  CHECK(extps("analyze " + (kWork / "missing.json").string()).code == 2);
  CHECK(extps("").code == 2);
  CHECK(extps("frobnicate x").code == 2);

  const auto bad = write_temp("bad.json", "{\n  \"model\": \"extended\",\n  \"parameters\": {\"m\": }\n}\n");
  Run r = extps("analyze " + bad.string() + " --out " + out_dir("bad"));
  CHECK(r.code == 2);
  CHECK(r.err.find(bad.string() + ":3:") != std::string::npos);

  const auto unknown = write_temp("unknown.json", "{\n  \"model\": \"extended\",\n  \"integrater\": {}\n}\n");
  r = extps("simulate " + unknown.string() + " --out " + out_dir("unknown"));
  CHECK(r.code == 2);
  CHECK(r.err.find(unknown.string() + ":3: unknown key 'integrater'") != std::string::npos);

  r = extps("simulate " + scenario("empty_span.json") + " --out " + out_dir("empty"));
  CHECK(r.code == 2);
  CHECK(r.err.find("empty span") != std::string::npos);
}

TEST_CASE("simulate: Caldirola-Kanai scenario") {
  const auto dir = out_dir("ck");
  const Run r = extps("simulate " + scenario("caldirola_kanai.json") + " --out " + dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("max gauge-equivalence error:") != std::string::npos);
  const json s = summary(dir);
  CHECK(s["equivalence"]["max_abs"].get<double>() < 1e-6);
  CHECK(s["max_constraint_drift"].get<double>() < 1e-8);
  CHECK(s["max_p_tau_plus_h"].get<double>() < 1e-7);
  for (const char* f : {"original.csv", "extended.csv", "drift.csv", "summary.json"}) CHECK(fs::exists(fs::path(dir) / f));
  CHECK(slurp(fs::path(dir) / "original.csv").rfind("t,x1,x2,p1,p2\n0,1,0,0,0\n", 0) == 0);
  CHECK(slurp(fs::path(dir) / "drift.csv").rfind("tau,phi,eta_gauge,p_tau_plus_H\n", 0) == 0);
}

TEST_CASE("simulate: tight tolerance reports the achieved local error") {
  const auto dir = out_dir("tight");
  const Run r = extps("simulate " + scenario("caldirola_kanai.json") + " --tol 1e-12 --out " + dir);
  CHECK(r.code == 0);
  CHECK(r.out.find("abs_tol=1e-12") != std::string::npos);
  const json s = summary(dir);
  CHECK(s["extended"]["abs_tol"].get<double>() == 1e-12);
  CHECK(s["extended"]["max_local_error"].get<double>() > 0.0);
}

TEST_CASE("simulate: fixed-step runs are byte-identical") {
  const auto a = out_dir("det_a"), b = out_dir("det_b");
  REQUIRE(extps("simulate " + scenario("fixed_step.json") + " --out " + a).code == 0);
  REQUIRE(extps("simulate " + scenario("fixed_step.json") + " --out " + b).code == 0);
  for (const char* f : {"original.csv", "extended.csv", "drift.csv"}) {
    const std::string x = slurp(fs::path(a) / f), y = slurp(fs::path(b) / f);
    CHECK(!x.empty());
    CHECK_MESSAGE(x == y, f);
  }
}

TEST_CASE("invariant: damped, equilibrium and blow-up scenarios") {
  auto dir = out_dir("inv_damped");
  Run r = extps("invariant " + scenario("damped_invariant.json") + " --out " + dir);
  CHECK(r.code == 0);
  CHECK(summary(dir)["drift"]["max"].get<double>() < 1e-7);
  CHECK(slurp(fs::path(dir) / "invariant.csv").rfind("t,rho,rhodot,I\n", 0) == 0);

  dir = out_dir("inv_eq");
  r = extps("invariant " + scenario("equilibrium_invariant.json") + " --out " + dir);
  CHECK(r.code == 0);
  CHECK(summary(dir)["drift"]["max"].get<double>() < 1e-12);

  dir = out_dir("inv_blowup");
  r = extps("invariant " + scenario("blowup_invariant.json") + " --out " + dir);
  CHECK(r.code == 1);
  CHECK(r.out.find("last valid t = ") != std::string::npos);
  CHECK(summary(dir)["aborted"] == true);
}

TEST_CASE("transform-check: identity, polynomial, rational and corrupted specs") {
  auto dir = out_dir("tr_id");
  Run r = extps("transform-check " + scenario("identity_transform.json") + " --out " + dir);
  CHECK(r.code == 0);
  CHECK(summary(dir)["defect"].get<double>() == 0.0);

  dir = out_dir("tr_poly");
  r = extps("transform-check " + scenario("polynomial_transform.json") + " --points 64 --out " + dir);
  CHECK(r.code == 0);
  CHECK(summary(dir)["defect"].get<double>() < 1e-9);
  CHECK(summary(dir)["points"] == 64);

  dir = out_dir("tr_rational");
  r = extps("transform-check " + scenario("rational_transform.json") + " --out " + dir);
  CHECK(r.code == 0);
  CHECK(summary(dir)["defect"].get<double>() < 1e-9);

  dir = out_dir("tr_bad");
  r = extps("transform-check " + scenario("corrupted_transform.json") + " --out " + dir);
  CHECK(r.code == 1);
  CHECK(summary(dir)["defect"].get<double>() >= 0.5);
  CHECK(r.out.find("NOT symplectic") != std::string::npos);
}

TEST_CASE("--jobs fans out scenarios into per-scenario directories") {
  const auto dir = out_dir("jobs");
  const Run r = extps("analyze " + scenario("reference.json") + " " + scenario("free_particle.json") + " --jobs 2 --out " +
                      dir);
  CHECK(r.code == 0);
  CHECK(fs::exists(fs::path(dir) / "reference" / "summary.json"));
  CHECK(fs::exists(fs::path(dir) / "free_particle" / "summary.json"));
  CHECK(r.out.find("scenario: reference") < r.out.find("scenario: free_particle"));
}
