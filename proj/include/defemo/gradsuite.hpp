#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace defemo {

// Finite-difference suite over every autodiff primitive and every task loss
// of a tiny encoder, all at 64-bit precision.

struct SuiteEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t elements_checked = 0;
  // Entries for gradients that are zero by construction compare absolute
  // magnitudes instead of relative error.
  bool structural_zero = false;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

struct SuiteOptions {
  std::uint64_t seed = 2024;
  std::size_t primitive_trials = 12;
  double eps = 1e-4;
  double tolerance = 1e-4;
  // Bounds for structural-zero entries.
  double zero_analytic_bound = 1e-12;
  double zero_numeric_bound = 1e-9;
};

std::vector<SuiteEntry> primitive_gradcheck_suite(const SuiteOptions& options = {});

// 1 layer, 2 heads, hidden 8, vocab 20. Losses: emotion, cdp, mlm and
// cdp+mlm, with dropout active under a fixed seed.
std::vector<SuiteEntry> encoder_gradcheck_suite(const SuiteOptions& options = {});

bool entry_passes(const SuiteEntry& e, const SuiteOptions& options);

nlohmann::json suite_to_json(const std::vector<SuiteEntry>& entries, const SuiteOptions& options);

}  // namespace defemo
