#include "sre/clustering.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "sre/imaging.hpp"

namespace sre {

namespace {

double sq_dist(const float* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) {
    const double diff = static_cast<double>(a[i]) - b[i];
    s += diff * diff;
  }
  return s;
}

// Assignment with the lowest-index tie rule; returns total inertia.
double assign_points(const FeatureMatrix& x, const Centroids& c, std::vector<int>& labels) {
  double inertia = 0.0;
  for (int i = 0; i < x.n; ++i) {
    int best = 0;
    double best_d = sq_dist(x.row(i), c.center(0), x.d);
    for (int j = 1; j < c.k; ++j) {
      const double dj = sq_dist(x.row(i), c.center(j), x.d);
      if (dj < best_d) {
        best_d = dj;
        best = j;
      }
    }
    labels[i] = best;
    inertia += best_d;
  }
  return inertia;
}

}  // namespace

Centroids kmeans_fit(const FeatureMatrix& x, int k, std::uint64_t seed,
                     std::vector<double>* inertia_trace) {
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be positive");
  if (x.n < k) throw std::invalid_argument("kmeans_fit: need at least k points");

  Rng rng(seed);
  Centroids c;
  c.k = k;
  c.d = x.d;
  c.seed = seed;
  c.centers.assign(static_cast<std::size_t>(k) * x.d, 0.0);

  // k-means++ seeding
  {
    const int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.n)));
    for (int j = 0; j < x.d; ++j) c.center(0)[j] = x.row(first)[j];
    std::vector<double> dist2(x.n);
    for (int chosen = 1; chosen < k; ++chosen) {
      double total = 0.0;
      for (int i = 0; i < x.n; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < chosen; ++j) best = std::min(best, sq_dist(x.row(i), c.center(j), x.d));
        dist2[i] = best;
        total += best;
      }
      int pick;
      if (total <= 0.0) {
        pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(x.n)));
      } else {
        const double target = rng.uniform() * total;
        double cum = 0.0;
        pick = x.n - 1;
        for (int i = 0; i < x.n; ++i) {
          cum += dist2[i];
          if (cum >= target) {
            pick = i;
            break;
          }
        }
      }
      for (int j = 0; j < x.d; ++j) c.center(chosen)[j] = x.row(pick)[j];
    }
  }

  std::vector<int> labels(x.n, 0);
  std::vector<double> new_centers(c.centers.size());
  std::vector<int> counts(k);
  const int max_iters = 300;
  const double shift_tol = 1e-4;

  double inertia = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    inertia = assign_points(x, c, labels);
    if (inertia_trace) inertia_trace->push_back(inertia);
    c.iterations = it + 1;

    std::fill(new_centers.begin(), new_centers.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < x.n; ++i) {
      double* dst = new_centers.data() + static_cast<std::size_t>(labels[i]) * x.d;
      const float* row = x.row(i);
      for (int j = 0; j < x.d; ++j) dst[j] += static_cast<double>(row[j]);
      ++counts[labels[i]];
    }
    for (int j = 0; j < k; ++j)
      if (counts[j] > 0)
        for (int e = 0; e < x.d; ++e)
          new_centers[static_cast<std::size_t>(j) * x.d + e] /= counts[j];

    // Re-seed empty clusters to the point farthest from its assigned centroid.
    for (int j = 0; j < k; ++j) {
      if (counts[j] > 0) continue;
      int far_i = 0;
      double far_d = -1.0;
      for (int i = 0; i < x.n; ++i) {
        const double* ctr = new_centers.data() + static_cast<std::size_t>(labels[i]) * x.d;
        const double di = sq_dist(x.row(i), ctr, x.d);
        if (di > far_d) {
          far_d = di;
          far_i = i;
        }
      }
      double* dst = new_centers.data() + static_cast<std::size_t>(j) * x.d;
      for (int e = 0; e < x.d; ++e) dst[e] = static_cast<double>(x.row(far_i)[e]);
    }

    double shift = 0.0;
    for (int j = 0; j < k; ++j) {
      double s = 0.0;
      for (int e = 0; e < x.d; ++e) {
        const double dd = new_centers[static_cast<std::size_t>(j) * x.d + e] -
                          c.centers[static_cast<std::size_t>(j) * x.d + e];
        s += dd * dd;
      }
      shift = std::max(shift, std::sqrt(s));
    }
    c.centers = new_centers;
    if (shift < shift_tol) break;
  }
  // Final inertia under the converged centers.
  c.inertia = assign_points(x, c, labels);
  if (inertia_trace) inertia_trace->push_back(c.inertia);
  return c;
}

std::vector<int> kmeans_predict(const Centroids& c, const FeatureMatrix& x) {
  if (x.d != c.d) throw std::invalid_argument("kmeans_predict: dimension mismatch");
  std::vector<int> labels(x.n, 0);
  assign_points(x, c, labels);
  return labels;
}

// ---------------------------------------------------------------------------
// Gaussian mixture, diagonal covariance
// ---------------------------------------------------------------------------

namespace {

constexpr double kVarFloor = 1e-6;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Per-row log joint densities log(w_k) + log N(x | mu_k, diag v_k).
void log_joint(const GmmParams& g, const float* row, std::vector<double>& out) {
  for (int j = 0; j < g.k; ++j) {
    const double* mu = g.means.data() + static_cast<std::size_t>(j) * g.d;
    const double* var = g.vars.data() + static_cast<std::size_t>(j) * g.d;
    double acc = std::log(std::max(g.weights[j], 1e-300));
    for (int e = 0; e < g.d; ++e) {
      const double diff = static_cast<double>(row[e]) - mu[e];
      acc -= 0.5 * (kLog2Pi + std::log(var[e]) + diff * diff / var[e]);
    }
    out[j] = acc;
  }
}

double log_sum_exp(const std::vector<double>& v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

}  // namespace

GmmParams gmm_fit(const FeatureMatrix& x, int k, std::uint64_t seed,
                  std::vector<double>* loglik_trace) {
  if (x.n < k) throw std::invalid_argument("gmm_fit: need at least k points");

  Centroids km = kmeans_fit(x, k, seed);
  std::vector<int> labels = kmeans_predict(km, x);

  GmmParams g;
  g.k = k;
  g.d = x.d;
  g.seed = seed;
  g.weights.assign(k, 0.0);
  g.means.assign(static_cast<std::size_t>(k) * x.d, 0.0);
  g.vars.assign(static_cast<std::size_t>(k) * x.d, 0.0);

  std::vector<int> counts(k, 0);
  for (int i = 0; i < x.n; ++i) ++counts[labels[i]];
  for (int j = 0; j < k; ++j) {
    g.weights[j] = static_cast<double>(counts[j]) / x.n;
    for (int e = 0; e < x.d; ++e)
      g.means[static_cast<std::size_t>(j) * x.d + e] = km.center(j)[e];
  }
  for (int i = 0; i < x.n; ++i) {
    const int j = labels[i];
    const double* mu = g.means.data() + static_cast<std::size_t>(j) * x.d;
    double* var = g.vars.data() + static_cast<std::size_t>(j) * x.d;
    for (int e = 0; e < x.d; ++e) {
      const double diff = static_cast<double>(x.row(i)[e]) - mu[e];
      var[e] += diff * diff;
    }
  }
  for (int j = 0; j < k; ++j)
    for (int e = 0; e < x.d; ++e) {
      double& var = g.vars[static_cast<std::size_t>(j) * x.d + e];
      var = std::max(counts[j] > 0 ? var / counts[j] : kVarFloor, kVarFloor);
    }

  const int max_iters = 100;
  const double gain_tol = 1e-6;
  std::vector<double> resp(static_cast<std::size_t>(x.n) * k);
  std::vector<double> lj(k);
  double prev_ll = -std::numeric_limits<double>::infinity();

  for (int it = 0; it < max_iters; ++it) {
    // E step
    double ll = 0.0;
    for (int i = 0; i < x.n; ++i) {
      log_joint(g, x.row(i), lj);
      const double lse = log_sum_exp(lj);
      ll += lse;
      for (int j = 0; j < k; ++j)
        resp[static_cast<std::size_t>(i) * k + j] = std::exp(lj[j] - lse);
    }
    ll /= x.n;
    if (loglik_trace) loglik_trace->push_back(ll);
    g.iterations = it + 1;
    if (it > 0 && ll - prev_ll < gain_tol) break;
    prev_ll = ll;

    // M step
    for (int j = 0; j < k; ++j) {
      double nk = 0.0;
      for (int i = 0; i < x.n; ++i) nk += resp[static_cast<std::size_t>(i) * k + j];
      if (nk < 1e-12) continue;  // degenerate component keeps its parameters
      g.weights[j] = nk / x.n;
      double* mu = g.means.data() + static_cast<std::size_t>(j) * x.d;
      double* var = g.vars.data() + static_cast<std::size_t>(j) * x.d;
      std::fill(mu, mu + x.d, 0.0);
      for (int i = 0; i < x.n; ++i) {
        const double r = resp[static_cast<std::size_t>(i) * k + j];
        const float* row = x.row(i);
        for (int e = 0; e < x.d; ++e) mu[e] += r * static_cast<double>(row[e]);
      }
      for (int e = 0; e < x.d; ++e) mu[e] /= nk;
      std::fill(var, var + x.d, 0.0);
      for (int i = 0; i < x.n; ++i) {
        const double r = resp[static_cast<std::size_t>(i) * k + j];
        const float* row = x.row(i);
        for (int e = 0; e < x.d; ++e) {
          const double diff = static_cast<double>(row[e]) - mu[e];
          var[e] += r * diff * diff;
        }
      }
      for (int e = 0; e < x.d; ++e) var[e] = std::max(var[e] / nk, kVarFloor);
    }
    // renormalize weights against accumulated round-off
    double wsum = 0.0;
    for (double w : g.weights) wsum += w;
    for (double& w : g.weights) w /= wsum;
  }
  return g;
}

std::vector<double> gmm_responsibilities(const GmmParams& g, const FeatureMatrix& x) {
  if (x.d != g.d) throw std::invalid_argument("gmm_responsibilities: dimension mismatch");
  std::vector<double> resp(static_cast<std::size_t>(x.n) * g.k);
  std::vector<double> lj(g.k);
  for (int i = 0; i < x.n; ++i) {
    log_joint(g, x.row(i), lj);
    const double lse = log_sum_exp(lj);
    for (int j = 0; j < g.k; ++j)
      resp[static_cast<std::size_t>(i) * g.k + j] = std::exp(lj[j] - lse);
  }
  return resp;
}

std::vector<int> gmm_predict(const GmmParams& g, const FeatureMatrix& x) {
  if (x.d != g.d) throw std::invalid_argument("gmm_predict: dimension mismatch");
  std::vector<int> labels(x.n, 0);
  std::vector<double> lj(g.k);
  for (int i = 0; i < x.n; ++i) {
    log_joint(g, x.row(i), lj);
    int best = 0;
    for (int j = 1; j < g.k; ++j)
      if (lj[j] > lj[best]) best = j;
    labels[i] = best;
  }
  return labels;
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

PcaBasis pca_fit(const FeatureMatrix& x, double cumulative_variance) {
  if (x.n < 2) throw std::invalid_argument("pca_fit: need at least two rows");
  PcaBasis basis;
  basis.d = x.d;
  basis.mean.assign(x.d, 0.0);
  for (int i = 0; i < x.n; ++i)
    for (int e = 0; e < x.d; ++e) basis.mean[e] += static_cast<double>(x.row(i)[e]);
  for (int e = 0; e < x.d; ++e) basis.mean[e] /= x.n;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(x.d, x.d);
  Eigen::VectorXd centered(x.d);
  for (int i = 0; i < x.n; ++i) {
    for (int e = 0; e < x.d; ++e) centered[e] = static_cast<double>(x.row(i)[e]) - basis.mean[e];
    cov.noalias() += centered * centered.transpose();
  }
  cov /= static_cast<double>(x.n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw std::runtime_error("pca_fit: eigensolver failed");
  const Eigen::VectorXd evals = solver.eigenvalues();
  const Eigen::MatrixXd evecs = solver.eigenvectors();  // ascending order

  double total = 0.0;
  for (int e = 0; e < x.d; ++e) total += std::max(evals[e], 0.0);

  basis.ratios.assign(x.d, 0.0);
  if (total > 0.0)
    for (int e = 0; e < x.d; ++e)
      basis.ratios[e] = std::max(evals[x.d - 1 - e], 0.0) / total;

  int retained;
  if (total <= 0.0) {
    retained = 1;  // degenerate input: keep a single (arbitrary) direction
  } else {
    retained = x.d;
    double cum = 0.0;
    for (int e = 0; e < x.d; ++e) {
      cum += basis.ratios[e];
      if (cum >= cumulative_variance) {
        retained = e + 1;
        break;
      }
    }
  }
  basis.retained = retained;
  basis.components.assign(static_cast<std::size_t>(retained) * x.d, 0.0);
  for (int r = 0; r < retained; ++r)
    for (int e = 0; e < x.d; ++e)
      basis.components[static_cast<std::size_t>(r) * x.d + e] = evecs(e, x.d - 1 - r);
  return basis;
}

FeatureMatrix pca_project(const PcaBasis& basis, const FeatureMatrix& x) {
  if (x.d != basis.d) throw std::invalid_argument("pca_project: dimension mismatch");
  FeatureMatrix out(x.n, basis.retained);
  for (int i = 0; i < x.n; ++i)
    for (int r = 0; r < basis.retained; ++r) {
      const double* comp = basis.components.data() + static_cast<std::size_t>(r) * basis.d;
      double acc = 0.0;
      for (int e = 0; e < basis.d; ++e)
        acc += (static_cast<double>(x.row(i)[e]) - basis.mean[e]) * comp[e];
      out.row(i)[r] = static_cast<float>(acc);
    }
  return out;
}

// ---------------------------------------------------------------------------
// kNN
// ---------------------------------------------------------------------------

std::vector<int> knn_classify(const FeatureMatrix& train_x, const std::vector<int>& train_y,
                              int k, const FeatureMatrix& query) {
  if (train_x.n == 0) throw std::invalid_argument("knn_classify: empty training set");
  if (static_cast<int>(train_y.size()) != train_x.n)
    throw std::invalid_argument("knn_classify: label count mismatch");
  if (k < 1 || k > train_x.n) throw std::invalid_argument("knn_classify: bad k");
  if (query.d != train_x.d) throw std::invalid_argument("knn_classify: dimension mismatch");

  std::vector<int> out(query.n, 0);
  std::vector<std::pair<double, int>> dist(train_x.n);
  for (int q = 0; q < query.n; ++q) {
    for (int i = 0; i < train_x.n; ++i) {
      double s = 0.0;
      const float* a = query.row(q);
      const float* b = train_x.row(i);
      for (int e = 0; e < train_x.d; ++e) {
        const double diff = static_cast<double>(a[e]) - static_cast<double>(b[e]);
        s += diff * diff;
      }
      dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    // majority vote, vote ties to the smallest label
    std::vector<std::pair<int, int>> votes;  // (label, count)
    for (int j = 0; j < k; ++j) {
      const int label = train_y[dist[j].second];
      bool found = false;
      for (auto& vc : votes)
        if (vc.first == label) {
          ++vc.second;
          found = true;
        }
      if (!found) votes.push_back({label, 1});
    }
    int best_label = votes[0].first, best_count = votes[0].second;
    for (auto& vc : votes)
      if (vc.second > best_count || (vc.second == best_count && vc.first < best_label)) {
        best_label = vc.first;
        best_count = vc.second;
      }
    out[q] = best_label;
  }
  return out;
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

void save_centroids(const std::string& path_prefix, const Centroids& c) {
  std::vector<float> flat(c.centers.begin(), c.centers.end());
  write_tensor_file(path_prefix + ".srt",
                    {static_cast<std::uint64_t>(c.k), static_cast<std::uint64_t>(c.d)},
                    flat.data());
  std::ofstream f(path_prefix + ".manifest.txt", std::ios::trunc);
  if (!f) throw IoError("cannot write centroid manifest: " + path_prefix);
  f << "kind = kmeans\n"
    << "K = " << c.k << "\n"
    << "d = " << c.d << "\n"
    << "seed = " << c.seed << "\n"
    << "iterations = " << c.iterations << "\n"
    << "inertia = " << c.inertia << "\n";
}

Centroids load_centroids(const std::string& path_prefix) {
  TensorFileData data = read_tensor_file(path_prefix + ".srt");
  if (data.dims.size() != 2)
    throw FormatError(path_prefix + ".srt: expected rank-2 centroid tensor", 6);
  Centroids c;
  c.k = static_cast<int>(data.dims[0]);
  c.d = static_cast<int>(data.dims[1]);
  c.centers.assign(data.data.begin(), data.data.end());
  return c;
}

}  // namespace sre
