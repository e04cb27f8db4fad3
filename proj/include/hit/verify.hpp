#pragma once

// Self-checks behind `hit verify`: finite-difference gradients, structural
// invariants of the decoder and containment, and analytic geometry fixtures.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hit/tensor.hpp"

namespace hit {

struct CheckResult {
  std::string name;
  bool pass = false;
  double worst = 0.0;      // worst error seen (or the measured value)
  double tolerance = 0.0;  // bound `worst` was compared against
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;
  double seconds = 0.0;

  bool passed() const;
  std::string format() const;
};

struct GradCheckStats {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // entries skipped because a max/argmax tie lies within the step
};

// Central differences of the scalar `f` against its reverse-mode gradient for
// every entry of `leaves`. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckStats check_gradients(const std::function<Tensor()>& f, const std::vector<Tensor>& leaves,
                               double h = 1e-5, double floor = 1e-6);

inline constexpr double kGradTolerance = 1e-4;

SuiteReport verify_gradcheck(std::uint64_t seed = 0);
SuiteReport verify_invariants(std::uint64_t seed = 0, std::size_t forwards = 100, std::size_t queries = 10000);
SuiteReport verify_oracle(std::uint64_t seed = 0);
// "gradcheck", "invariants", "oracle"; throws ConfigError otherwise.
SuiteReport run_verify_suite(const std::string& name, std::uint64_t seed = 0);

}  // namespace hit
