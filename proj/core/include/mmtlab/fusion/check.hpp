#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mmtlab/fusion/fusion.hpp"

namespace mmtlab::fusion {

struct CheckConfig {
  std::uint64_t seed = 1;
  Dims dims;
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Entries probed per leaf by finite differences; 0 probes every entry.
  std::size_t max_entries = 48;
  std::size_t convexity_draws = 1000;
};

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// ||a - n|| / max(||a||, ||n||, 1e-7) over the given entries.
double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric);

struct LeafGradientError {
  std::string leaf;
  std::size_t probed = 0;
  double error = 0.0;
};

/// Central differences of sum(upstream .* op(leaves)) against op.backward().
std::vector<LeafGradientError> gradient_errors(RecordedOp& op, const Tensor2& upstream, double step,
                                               std::size_t max_entries, std::uint64_t seed);

/// Throws Error(Errc::invalid_argument) for unusable dimensions.
void validate_dims(const Dims& dims);
/// "d,heads,dimg,m,n"
Dims parse_dims(const std::string& spec);

std::vector<CheckResult> run_fusion_checks(const CheckConfig& config);
std::string format_check_table(const std::vector<CheckResult>& results);

}  // namespace mmtlab::fusion
