#pragma once

#include <functional>
#include <string>

#include "transience/config.hpp"

namespace transience {

/// Exit codes shared by the CLI and the command functions.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;

/// Runs `body`, mapping std::invalid_argument to exit code 1 and
/// NumericalError to exit code 2 (with a message on stderr).
int run_guarded(const std::function<int()>& body);

/// Writes the synthetic benchmark pairs (train_<i>_*, test_<i>_*) to out_dir.
int cmd_gen(const RunConfig& cfg);

/// Trains the configured variant on pairs read from data_dir and writes the
/// checkpoint, per-pair path CSVs and the history CSV to out_dir.
int cmd_train(const RunConfig& cfg);

/// Runs the variant x seed benchmark and writes report.csv to out_dir.
int cmd_eval(const RunConfig& cfg);

/// Gradient checks for every loss; nonzero exit when a tolerance is breached.
/// `only` filters by name prefix; `corrupt` injects a deliberate error into
/// one loss (harness test hook).
int cmd_gradcheck(const RunConfig& cfg, const std::string& only = "",
                  const std::string& corrupt = "");

/// Compares dtw() against the brute-force oracle on random matrices of every
/// shape up to 6x6.
int cmd_dtw_test(const RunConfig& cfg);

}  // namespace transience
