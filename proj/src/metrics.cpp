#include "sre/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace sre {

IccResult icc(const RatingsMatrix& m) {
  if (m.n < 2 || m.r < 2) throw std::invalid_argument("icc: need n >= 2 targets and r >= 2 raters");
  const double n = m.n, r = m.r;

  double grand = 0.0;
  for (double v : m.v) grand += v;
  grand /= (n * r);

  double ss_total = 0.0;
  for (double v : m.v) {
    const double d = v - grand;
    ss_total += d * d;
  }

  double ss_rows = 0.0;
  for (int i = 0; i < m.n; ++i) {
    double mean = 0.0;
    for (int j = 0; j < m.r; ++j) mean += m.at(i, j);
    mean /= r;
    ss_rows += (mean - grand) * (mean - grand);
  }
  ss_rows *= r;

  double ss_cols = 0.0;
  for (int j = 0; j < m.r; ++j) {
    double mean = 0.0;
    for (int i = 0; i < m.n; ++i) mean += m.at(i, j);
    mean /= n;
    ss_cols += (mean - grand) * (mean - grand);
  }
  ss_cols *= n;

  const double ss_err = std::max(0.0, ss_total - ss_rows - ss_cols);
  const double ms_rows = ss_rows / (n - 1);
  const double ms_err = ss_err / ((n - 1) * (r - 1));

  if (ss_total <= 0.0) return {false, 0.0};  // all entries equal: undefined
  const double denom = ms_rows + (r - 1) * ms_err;
  if (denom <= 0.0) return {false, 0.0};  // no target variance at all
  if (ms_err == 0.0) return {true, 1.0};
  return {true, (ms_rows - ms_err) / denom};
}

double cohen_kappa(const std::vector<int>& a, const std::vector<int>& b, int ignore_label) {
  if (a.size() != b.size()) throw std::invalid_argument("cohen_kappa: length mismatch");
  std::map<int, double> freq_a, freq_b;
  std::size_t valid = 0, agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == ignore_label || b[i] == ignore_label) continue;
    ++valid;
    if (a[i] == b[i]) ++agree;
    freq_a[a[i]] += 1.0;
    freq_b[b[i]] += 1.0;
  }
  if (valid == 0) throw std::invalid_argument("cohen_kappa: no valid positions");
  const double po = static_cast<double>(agree) / valid;
  double pe = 0.0;
  for (const auto& [label, ca] : freq_a) {
    auto it = freq_b.find(label);
    if (it != freq_b.end()) pe += (ca / valid) * (it->second / valid);
  }
  if (pe >= 1.0) return 1.0;  // both sequences constant and equal
  return (po - pe) / (1.0 - pe);
}

double dice(const std::vector<int>& a, const std::vector<int>& b, int ignore_label) {
  if (a.size() != b.size()) throw std::invalid_argument("dice: length mismatch");
  std::set<int> classes;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == ignore_label || b[i] == ignore_label) continue;
    ++valid;
    classes.insert(a[i]);
    classes.insert(b[i]);
  }
  if (valid == 0) throw std::invalid_argument("dice: empty valid region");
  double sum = 0.0;
  int used = 0;
  for (int cls : classes) {
    std::size_t na = 0, nb = 0, nab = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i] == ignore_label || b[i] == ignore_label) continue;
      const bool ia = a[i] == cls, ib = b[i] == cls;
      na += ia;
      nb += ib;
      nab += ia && ib;
    }
    if (na + nb == 0) continue;  // class absent from both: skipped
    sum += 2.0 * static_cast<double>(nab) / static_cast<double>(na + nb);
    ++used;
  }
  return used > 0 ? sum / used : 1.0;
}

double dice(const LabelMap& a, const LabelMap& b) {
  if (a.h != b.h || a.w != b.w) throw std::invalid_argument("dice: shape mismatch");
  return dice(a.v, b.v, kIgnoreLabel);
}

RankSumResult rank_sum_test(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 3 || y.size() < 3)
    throw std::invalid_argument("rank_sum_test: need at least 3 samples per group");
  const std::size_t n1 = x.size(), n2 = y.size(), n = n1 + n2;

  std::vector<std::pair<double, int>> all;  // (value, group)
  all.reserve(n);
  for (double v : x) all.push_back({v, 0});
  for (double v : y) all.push_back({v, 1});
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  // mid-ranks and tie correction
  std::vector<double> rank(n);
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && all[j + 1].first == all[i].first) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[t] = mid;
    const double tcount = static_cast<double>(j - i + 1);
    tie_term += tcount * tcount * tcount - tcount;
    i = j + 1;
  }

  double r1 = 0.0;
  for (std::size_t t = 0; t < n; ++t)
    if (all[t].second == 0) r1 += rank[t];
  const double u1 = r1 - static_cast<double>(n1) * (n1 + 1) / 2.0;

  const double mu = static_cast<double>(n1) * n2 / 2.0;
  const double var = (static_cast<double>(n1) * n2 / 12.0) *
                     (static_cast<double>(n + 1) -
                      tie_term / (static_cast<double>(n) * (static_cast<double>(n) - 1.0)));
  if (var <= 0.0) return {u1, 1.0};  // every value identical across both samples

  double z = u1 - mu;
  if (z > 0.5)
    z -= 0.5;
  else if (z < -0.5)
    z += 0.5;
  else
    z = 0.0;
  z /= std::sqrt(var);
  const double p = std::erfc(std::abs(z) / std::sqrt(2.0));
  return {u1, std::min(1.0, p)};
}

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size() || pred.empty())
    throw std::invalid_argument("accuracy: need equal non-empty sequences");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
  return static_cast<double>(hit) / pred.size();
}

}  // namespace sre
