#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace transience {

struct GradSuiteEntry {
    std::string name;
    double max_rel_error = 0.0;
    bool pass = false;
};

struct GradSuiteOptions {
    std::string only;       // run only losses whose name starts with this
    std::string corrupt;    // test hook: perturb the analytic gradient of this loss
    double tolerance = 1e-4;
    int configs_per_loss = 5;
    std::uint64_t seed = 20240501;
};

/// Finite-difference checks for every loss and for the total objective across
/// all variant/flag combinations, on small random configs (N = 32, d_z = 4,
/// d_z_tilde = 3).
std::vector<GradSuiteEntry> run_gradcheck_suite(const GradSuiteOptions& options);

}  // namespace transience
