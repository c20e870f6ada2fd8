#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sre {

struct CheckResult {
  std::string name;
  bool pass = false;
  double measure = 0.0;  // worst observed error / difference
  double limit = 0.0;
};

// Kernel symmetry, expand/fold adjointness, layer and model quarter-turn
// commutation (32- and 64-bit), and finite-difference gradient checks.
std::vector<CheckResult> run_equivariance_suite(std::uint64_t seed);

}  // namespace sre
