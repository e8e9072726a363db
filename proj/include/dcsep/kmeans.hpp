#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace dcsep::sep {

struct KMeansOptions {
  int restarts = 10;    // independent k-means++ seedings, best inertia kept
  int max_iters = 300;  // Lloyd iteration cap per restart
  double tol = 1e-6;    // stop when relative inertia change drops below this
};

struct KMeansResult {
  Eigen::MatrixXd centroids;     // k x D
  std::vector<int> assignments;  // one cluster id per point
  double inertia = 0.0;          // sum of squared distances to assigned centroids
};

// Lloyd's algorithm with k-means++ seeding. Deterministic for a given seed.
// Distance ties assign to the lowest cluster index; a cluster that loses all
// its points keeps its previous centroid.
KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const KMeansOptions& opt = {});

}  // namespace dcsep::sep
