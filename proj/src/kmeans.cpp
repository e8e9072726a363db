#include "dcsep/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "dcsep/error.hpp"

namespace dcsep::sep {

namespace {

// Index sampled proportionally to `weights` via the cumulative sum; the
// caller guarantees total > 0. Written out manually so results are stable
// across standard-library implementations.
Eigen::Index sample_weighted(const Eigen::VectorXd& weights, double total, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, total);
  const double r = u(rng);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (r < acc) return i;
  }
  return weights.size() - 1;  // r landed on the rounding tail
}

Eigen::MatrixXd plus_plus_init(const Eigen::MatrixXd& pts, int k, std::mt19937_64& rng) {
  const Eigen::Index m = pts.rows();
  Eigen::MatrixXd centroids(k, pts.cols());
  std::uniform_int_distribution<Eigen::Index> uniform_pick(0, m - 1);
  centroids.row(0) = pts.row(uniform_pick(rng));
  Eigen::VectorXd d2 = (pts.rowwise() - centroids.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = d2.sum();
    const Eigen::Index pick =
        total > 0.0 ? sample_weighted(d2, total, rng) : uniform_pick(rng);
    centroids.row(c) = pts.row(pick);
    d2 = d2.cwiseMin((pts.rowwise() - centroids.row(c)).rowwise().squaredNorm());
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed,
                    const KMeansOptions& opt) {
  const Eigen::Index m = points.rows();
  if (k < 1 || m < k)
    throw TooFewPoints("kmeans: need at least k=" + std::to_string(k) + " points, got " +
                       std::to_string(m));

  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < opt.restarts; ++restart) {
    Eigen::MatrixXd centroids = plus_plus_init(points, k, rng);
    std::vector<int> assign(static_cast<size_t>(m), 0);
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < opt.max_iters; ++iter) {
      double inertia = 0.0;
      for (Eigen::Index i = 0; i < m; ++i) {
        double best_d = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (int c = 0; c < k; ++c) {
          const double d = (points.row(i) - centroids.row(c)).squaredNorm();
          if (d < best_d) {  // strict: ties keep the lowest cluster index
            best_d = d;
            best_c = c;
          }
        }
        assign[static_cast<size_t>(i)] = best_c;
        inertia += best_d;
      }

      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
      Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
      for (Eigen::Index i = 0; i < m; ++i) {
        sums.row(assign[static_cast<size_t>(i)]) += points.row(i);
        counts[assign[static_cast<size_t>(i)]] += 1.0;
      }
      for (int c = 0; c < k; ++c)
        if (counts[c] > 0.0) centroids.row(c) = sums.row(c) / counts[c];

      const bool converged =
          prev_inertia - inertia <= opt.tol * std::max(prev_inertia, 1e-30) &&
          std::isfinite(prev_inertia);
      prev_inertia = inertia;
      if (converged) break;
    }

    // Final assignment against the last centroid update, so the reported
    // triple (centroids, assignments, inertia) is self-consistent.
    double inertia = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      double best_d = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        const double d = (points.row(i) - centroids.row(c)).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best_c = c;
        }
      }
      assign[static_cast<size_t>(i)] = best_c;
      inertia += best_d;
    }

    if (inertia < best.inertia) {
      best.inertia = inertia;
      best.centroids = centroids;
      best.assignments = assign;
    }
  }
  return best;
}

}  // namespace dcsep::sep
