#pragma once

#include <cstddef>
#include <string>

// Runs every finite-difference case on `instances` seeds in the 64-bit autodiff
// build. Kept free of autodiff types so it links next to the 32-bit library.
struct GradientSuiteOutcome {
  bool pass = false;
  std::size_t cases = 0;
  std::size_t instances = 0;
  double worst_op = 0.0;        // largest per-op relative error
  double worst_composed = 0.0;  // largest composed-model relative error
  std::string worst_case;
};

GradientSuiteOutcome run_gradient_suite(std::size_t instances);
