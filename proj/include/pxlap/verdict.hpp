#pragma once

#include <limits>
#include <string>

namespace pxl {

/// Outcome of a pass/fail numerical test. margin is the signed worst-case
/// slack; the test passes when margin >= -tolerance.
struct Verdict {
  bool passed = true;
  double margin = std::numeric_limits<double>::infinity();
  double tolerance = 0.0;
  std::string witness;
  int n_tests = 0;

  /// Folds one test instance into the verdict; ties keep the first witness.
  void record(double instance_margin, const std::string& instance_witness) {
    ++n_tests;
    if (instance_margin < margin) {
      margin = instance_margin;
      witness = instance_witness;
    }
  }

  Verdict& finalize() {
    passed = n_tests == 0 || margin >= -tolerance;
    return *this;
  }
};

}  // namespace pxl
