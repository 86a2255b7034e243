#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace extps::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

struct Options {
  std::string out_dir = ".";
  std::size_t points = 64;
  std::optional<double> tol;  // overrides abs_tol and rel_tol
  std::uint64_t seed = 1;
};

struct Outcome {
  int code = kOk;
  std::string report;  // human-readable text for stdout
  std::string error;   // for stderr
  nlohmann::json summary;
};

Outcome cmd_analyze(const std::string& config, const Options& opts);
Outcome cmd_simulate(const std::string& config, const Options& opts);
Outcome cmd_invariant(const std::string& config, const Options& opts);
Outcome cmd_transform_check(const std::string& spec, const Options& opts);

}  // namespace extps::cli
