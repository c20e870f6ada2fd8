#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sre/rng.hpp"

namespace sre {

// n x d row-major feature rows, optionally carrying per-row grid coordinates.
struct FeatureMatrix {
  int n = 0, d = 0;
  std::vector<float> v;

  FeatureMatrix() = default;
  FeatureMatrix(int n_, int d_) : n(n_), d(d_), v(static_cast<std::size_t>(n_) * d_, 0.0f) {}
  float* row(int i) { return v.data() + static_cast<std::size_t>(i) * d; }
  const float* row(int i) const { return v.data() + static_cast<std::size_t>(i) * d; }
};

struct Centroids {
  int k = 0, d = 0;
  std::vector<double> centers;  // k x d row-major
  int iterations = 0;
  double inertia = 0.0;
  std::uint64_t seed = 0;

  double* center(int i) { return centers.data() + static_cast<std::size_t>(i) * d; }
  const double* center(int i) const { return centers.data() + static_cast<std::size_t>(i) * d; }
};

// k-means++ seeding, Lloyd iterations until the max centroid shift drops
// below 1e-4 or 300 iterations. Empty clusters are re-seeded to the point
// farthest from its assigned centroid. Ties in assignment go to the lowest
// center index.
Centroids kmeans_fit(const FeatureMatrix& x, int k, std::uint64_t seed,
                     std::vector<double>* inertia_trace = nullptr);
std::vector<int> kmeans_predict(const Centroids& c, const FeatureMatrix& x);

struct GmmParams {
  int k = 0, d = 0;
  std::vector<double> weights;  // k, sums to 1
  std::vector<double> means;    // k x d
  std::vector<double> vars;     // k x d diagonal, floored at 1e-6
  int iterations = 0;
  std::uint64_t seed = 0;
};

// Diagonal-covariance EM initialized from kmeans_fit; stops when the
// per-point log-likelihood gain falls below 1e-6 or after 100 iterations.
GmmParams gmm_fit(const FeatureMatrix& x, int k, std::uint64_t seed,
                  std::vector<double>* loglik_trace = nullptr);
std::vector<int> gmm_predict(const GmmParams& g, const FeatureMatrix& x);
// Per-row responsibilities (n x k row-major), for the normalization tests.
std::vector<double> gmm_responsibilities(const GmmParams& g, const FeatureMatrix& x);

struct PcaBasis {
  int d = 0;
  int retained = 0;
  std::vector<double> mean;        // d
  std::vector<double> components;  // retained x d row-major, orthonormal rows
  std::vector<double> ratios;      // all d explained-variance ratios, non-increasing
};

PcaBasis pca_fit(const FeatureMatrix& x, double cumulative_variance = 0.99);
FeatureMatrix pca_project(const PcaBasis& basis, const FeatureMatrix& x);

// Majority vote over the k Euclidean nearest training rows. Distance ties
// break by training-row order, vote ties by smallest label.
std::vector<int> knn_classify(const FeatureMatrix& train_x, const std::vector<int>& train_y,
                              int k, const FeatureMatrix& query);

// TensorFile + small text manifest serialization.
void save_centroids(const std::string& path_prefix, const Centroids& c);
Centroids load_centroids(const std::string& path_prefix);

}  // namespace sre
