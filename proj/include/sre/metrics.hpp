#pragma once

#include <vector>

#include "sre/imaging.hpp"

namespace sre {

// n targets x r raters of numeric ratings, row-major.
struct RatingsMatrix {
  int n = 0, r = 0;
  std::vector<double> v;

  RatingsMatrix() = default;
  RatingsMatrix(int n_, int r_) : n(n_), r(r_), v(static_cast<std::size_t>(n_) * r_, 0.0) {}
  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * r + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * r + j]; }
};

// ICC(3,1), two-way mixed, consistency, single measurement. An all-equal
// matrix has no target variance, which is reported explicitly rather than
// collapsed to 0 or 1.
struct IccResult {
  bool has_value = false;  // false => no-variance guard fired
  double value = 0.0;
};
IccResult icc(const RatingsMatrix& m);

// Chance-corrected categorical agreement. Positions where either sequence
// holds ignore_label are dropped pairwise.
double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b,
                   int ignore_label = kIgnoreLabel);

// Macro-averaged Dice over the classes present in either map; IGNORE pixels
// are dropped pairwise.
double dice(const LabelMap& a, const LabelMap& b);
double dice(const std::vector<int>& a, const std::vector<int>& b,
            int ignore_label = kIgnoreLabel);

struct RankSumResult {
  double u = 0.0;  // Mann-Whitney U for the first sample
  double p = 0.0;  // two-sided, normal approximation
};
// Mann-Whitney U with mid-ranks for ties; p from the normal approximation
// with tie-corrected variance and continuity correction.
RankSumResult rank_sum_test(const std::vector<double>& x, const std::vector<double>& y);

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

}  // namespace sre
