#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "wyflow/config.hpp"

namespace wyflow {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitTimeOut = 2, kExitNoSignal = 3 };

struct CommandOptions {
  std::filesystem::path out_dir = ".";
  bool quiet = false;
};

/// Flow from w0 to convergence or t_end.  Writes the diagnostics CSV, the final-state
/// snapshot and the trajectory file under out_dir.  Returns 0 (converged) or 2 (time-out).
int cmd_run(const RunConfig& config, const CommandOptions& options, std::ostream& log);

/// Limit profile and spectral basis at a snapshot; writes the spectral report.
/// The snapshot's own config is used when `config` is empty.
int cmd_spectrum(const std::optional<RunConfig>& config, const std::filesystem::path& snapshot,
                 const CommandOptions& options, std::ostream& log);

/// Fits the gradient inequality and the decay rate on a trajectory file and adds
/// the results to the spectral report in place.  Throws InsufficientSignal (exit 3)
/// when the trajectory is already at the limit.
int cmd_lojasiewicz(const std::filesystem::path& trajectory, const std::filesystem::path& report,
                    const CommandOptions& options, std::ostream& log);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  bool break_stencil = false;  ///< negative control: asymmetric stencil for the operator checks
  int threads = 0;             ///< 0: WYFLOW_THREADS or the hardware concurrency
};

/// The property suite on the configured scenario, in a fixed order.
std::vector<CheckResult> run_verification(const RunConfig& config, const VerifyOptions& options);

/// Prints the pass/fail table; returns 0 iff every check passed.
int cmd_verify(const RunConfig& config, const VerifyOptions& verify, const CommandOptions& options, std::ostream& log);

/// Command-line front end: `run`, `spectrum`, `verify`, `lojasiewicz`.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wyflow
