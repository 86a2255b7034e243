#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <functional>
#include <iostream>
#include <thread>
#include <vector>

#include "commands.hpp"

using namespace extps::cli;

namespace {

using Command = std::function<Outcome(const std::string&, const Options&)>;

// Runs every input through `cmd` on up to `jobs` threads; reports are printed
// in input order. The exit code is the worst over all inputs.
int run_all(const Command& cmd, const std::vector<std::string>& inputs, const Options& base, std::size_t jobs) {
  std::vector<Outcome> results(inputs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < inputs.size(); i = next++) {
      Options o = base;
      if (inputs.size() > 1) {
        o.out_dir = (std::filesystem::path(base.out_dir) / std::filesystem::path(inputs[i]).stem()).string();
      }
      results[i] = cmd(inputs[i], o);
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::max<std::size_t>(1, std::min(jobs, inputs.size()));
  for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int code = kOk;
  for (const auto& r : results) {
    std::cout << r.report;
    if (!r.error.empty()) std::cerr << r.error << "\n";
    code = std::max(code, r.code);
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"extps: constraint analysis, gauge-fixed dynamics, invariants and canonical-transform checks"};
  app.require_subcommand(1);

  Options opts;
  std::size_t jobs = 1;
  std::vector<std::string> inputs;
  double tol = 0.0;

  auto add_common = [&](CLI::App* sub, const std::string& what) {
    sub->add_option("inputs", inputs, what)->required()->check(CLI::ExistingFile);
    sub->add_option("--out", opts.out_dir, "Output directory")->capture_default_str();
    sub->add_option("--jobs", jobs, "Inputs processed in parallel")->check(CLI::PositiveNumber);
    sub->add_option("--seed", opts.seed, "Seed for sampled points");
  };

  opts.out_dir = "extps_out";
  auto* analyze = app.add_subcommand("analyze", "Hessians, constraints, Delta, C and Dirac brackets");
  add_common(analyze, "Scenario files (JSON)");
  auto* simulate = app.add_subcommand("simulate", "Original and gauge-fixed extended trajectories");
  add_common(simulate, "Scenario files (JSON)");
  auto* invariant = app.add_subcommand("invariant", "Ermakov-Pinney solution and Lewis-Riesenfeld invariant");
  add_common(invariant, "Scenario files (JSON)");
  auto* transform = app.add_subcommand("transform-check", "Symplectic check of a completed transformation");
  add_common(transform, "Transform spec files (JSON)");
  transform->add_option("--points", opts.points, "Sample points")->check(CLI::PositiveNumber);
  for (auto* sub : {simulate, invariant}) {
    sub->add_option("--tol", tol, "Absolute and relative tolerance")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  if (tol > 0.0) opts.tol = tol;

  if (*analyze) return run_all(cmd_analyze, inputs, opts, jobs);
  if (*simulate) return run_all(cmd_simulate, inputs, opts, jobs);
  if (*invariant) return run_all(cmd_invariant, inputs, opts, jobs);
  return run_all(cmd_transform_check, inputs, opts, jobs);
}
