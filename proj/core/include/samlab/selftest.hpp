#pragma once

// The property suite behind `samlab selftest` and the acceptance binary: one
// result per numbered criterion, every tolerance fixed here.

#include <functional>
#include <string>
#include <vector>

#include "samlab/losses.hpp"

namespace samlab {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  /// Measured values against their thresholds.
  std::string detail;
  double seconds = 0.0;
};

/// Three polynomial data in D = 5 with labels chosen so that
/// (1, -1, 0.5, 2, 1) interpolates them.
LossPtr factored_example_loss();
Vector factored_example_point();

/// Runs criteria 1..11 (or the listed subset) in order; `progress` sees each
/// result as it completes.
std::vector<CriterionResult> run_selftest(const std::vector<int>& only = {},
                                          const std::function<void(const CriterionResult&)>& progress = {});

std::string format_result(const CriterionResult& r);

}  // namespace samlab
