#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "dcsep/dc_loss.hpp"
#include "dcsep/error.hpp"

using namespace dcsep;
using nn::Tensor;

namespace {

dsp::Spectrogram random_spec(Eigen::Index T, Eigen::Index F, std::mt19937_64& rng) {
  dsp::Spectrogram s;
  s.bins.resize(T, F);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index f = 0; f < F; ++f) s.bins(t, f) = {d(rng), d(rng)};
  return s;
}

Tensor random_unit_embeddings(Eigen::Index T, Eigen::Index F, Eigen::Index D,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  Tensor v({T, F, D});
  for (Eigen::Index r = 0; r < T * F; ++r) {
    double n2 = 0;
    for (Eigen::Index k = 0; k < D; ++k) {
      v[r * D + k] = d(rng);
      n2 += v[r * D + k] * v[r * D + k];
    }
    for (Eigen::Index k = 0; k < D; ++k) v[r * D + k] /= std::sqrt(n2);
  }
  return v;
}

Tensor random_targets(Eigen::Index T, Eigen::Index F, std::mt19937_64& rng) {
  Tensor u({T, F, 2});
  std::bernoulli_distribution pick(0.5);
  for (Eigen::Index r = 0; r < T * F; ++r) u[r * 2 + (pick(rng) ? 1 : 0)] = 1.0;
  return u;
}

// Direct evaluation of the affinity difference: builds the full TF x TF
// matrices the factorized form avoids.
double naive_loss(const Tensor& V, const Tensor& U) {
  nn::ConstMatMap Vm = V.as_matrix();
  nn::ConstMatMap Um = U.as_matrix();
  const Eigen::MatrixXd A = Vm * Vm.transpose() - Um * Um.transpose();
  const double n = static_cast<double>(Vm.rows());
  return A.squaredNorm() / (n * n);
}

}  // namespace

TEST_CASE("make_targets picks the dominant source with first-source ties") {
  std::mt19937_64 rng(31);
  dsp::Spectrogram s0 = random_spec(3, 4, rng);
  dsp::Spectrogram s1 = s0;
  s1.bins *= 0.5;  // source 0 strictly louder everywhere
  Tensor u = make_targets({s0, s1});
  for (Eigen::Index t = 0; t < 3; ++t)
    for (Eigen::Index f = 0; f < 4; ++f) {
      CHECK(u(t, f, 0) == 1.0);
      CHECK(u(t, f, 1) == 0.0);
    }

  // Exact magnitude tie: assigned to the first source.
  dsp::Spectrogram tie0, tie1;
  tie0.bins.resize(1, 2);
  tie1.bins.resize(1, 2);
  tie0.bins << std::complex<double>(3, 4), std::complex<double>(0, 1);
  tie1.bins << std::complex<double>(-4, 3), std::complex<double>(2, 0);
  Tensor ut = make_targets({tie0, tie1});
  CHECK(ut(0, 0, 0) == 1.0);  // |3+4i| == |-4+3i|
  CHECK(ut(0, 1, 1) == 1.0);  // second source clearly louder

  CHECK_THROWS_AS(make_targets({s0}), ConfigError);
  CHECK_THROWS_AS(make_targets({s0, s1, s0}), ConfigError);
  dsp::Spectrogram small = random_spec(2, 4, rng);
  CHECK_THROWS_AS(make_targets({s0, small}), ShapeError);
}

TEST_CASE("make_targets agrees with a per-bin comparison oracle") {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 10; ++rep) {
    dsp::Spectrogram s0 = random_spec(4, 5, rng);
    dsp::Spectrogram s1 = random_spec(4, 5, rng);
    Tensor u = make_targets({s0, s1});
    for (Eigen::Index t = 0; t < 4; ++t)
      for (Eigen::Index f = 0; f < 5; ++f) {
        const int want = std::abs(s1.bins(t, f)) > std::abs(s0.bins(t, f)) ? 1 : 0;
        CHECK(u(t, f, want) == 1.0);
        CHECK(u(t, f, 1 - want) == 0.0);
      }
  }
}

TEST_CASE("dc_loss is zero when embeddings reproduce the assignments") {
  std::mt19937_64 rng(33);
  const Eigen::Index T = 3, F = 4, D = 5;
  Tensor u = random_targets(T, F, rng);
  Tensor v({T, F, D});
  for (Eigen::Index r = 0; r < T * F; ++r)
    for (Eigen::Index s = 0; s < 2; ++s) v[r * D + s] = u[r * 2 + s];
  DcLossResult res = dc_loss(v, u);
  CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(res.grad.array().abs().maxCoeff() < 1e-12);
}

TEST_CASE("dc_loss matches the worked two-bin example") {
  // T=1, F=2, D=1, v=(1,1), U=I: unnormalized loss 2, normalized 1/2.
  Tensor v({1, 2, 1});
  v[0] = 1.0;
  v[1] = 1.0;
  Tensor u({1, 2, 2});
  u(0, 0, 0) = 1.0;
  u(0, 1, 1) = 1.0;
  DcLossResult res = dc_loss(v, u);
  CHECK(res.loss == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("dc_loss is invariant to speaker permutation and row permutation") {
  std::mt19937_64 rng(34);
  const Eigen::Index T = 4, F = 5, D = 3;
  Tensor v = random_unit_embeddings(T, F, D, rng);
  Tensor u = random_targets(T, F, rng);
  const double base = dc_loss(v, u).loss;

  Tensor u_swapped({T, F, 2});
  for (Eigen::Index r = 0; r < T * F; ++r) {
    u_swapped[r * 2] = u[r * 2 + 1];
    u_swapped[r * 2 + 1] = u[r * 2];
  }
  CHECK(dc_loss(v, u_swapped).loss == doctest::Approx(base).epsilon(1e-12));

  // Same permutation applied to the rows of both V and U.
  std::vector<Eigen::Index> perm(static_cast<size_t>(T * F));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor v_p({T, F, D}), u_p({T, F, 2});
  for (Eigen::Index r = 0; r < T * F; ++r) {
    for (Eigen::Index k = 0; k < D; ++k) v_p[r * D + k] = v[perm[static_cast<size_t>(r)] * D + k];
    for (Eigen::Index s = 0; s < 2; ++s) u_p[r * 2 + s] = u[perm[static_cast<size_t>(r)] * 2 + s];
  }
  CHECK(dc_loss(v_p, u_p).loss == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("factorized loss agrees with the direct affinity computation") {
  std::mt19937_64 rng(35);
  {
    Tensor v = random_unit_embeddings(5, 6, 3, rng);
    Tensor u = random_targets(5, 6, rng);
    const double fact = dc_loss(v, u).loss;
    const double naive = naive_loss(v, u);
    CHECK(fact == doctest::Approx(naive).epsilon(1e-10));
  }
  for (int rep = 0; rep < 10; ++rep) {
    std::uniform_int_distribution<Eigen::Index> dim(1, 6);
    Tensor v = random_unit_embeddings(dim(rng), dim(rng), dim(rng), rng);
    Tensor u = random_targets(v.dim(0), v.dim(1), rng);
    CHECK(dc_loss(v, u).loss == doctest::Approx(naive_loss(v, u)).epsilon(1e-10));
    CHECK(dc_loss(v, u).loss >= -1e-15);
  }
}

TEST_CASE("dc_loss gradient matches central finite differences") {
  std::mt19937_64 rng(36);
  for (int rep = 0; rep < 5; ++rep) {
    std::uniform_int_distribution<Eigen::Index> dim(2, 5);
    const Eigen::Index T = dim(rng), F = dim(rng), D = dim(rng);
    Tensor v = random_unit_embeddings(T, F, D, rng);
    Tensor u = random_targets(T, F, rng);
    DcLossResult res = dc_loss(v, u);
    const double h = 1e-5;
    double worst = 0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double lp = dc_loss(v, u).loss;
      v[i] = orig - h;
      const double lm = dc_loss(v, u).loss;
      v[i] = orig;
      const double numeric = (lp - lm) / (2 * h);
      const double denom = std::max({std::abs(res.grad[i]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(res.grad[i] - numeric) / denom);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("dc_loss rejects mismatched grids") {
  std::mt19937_64 rng(37);
  Tensor v = random_unit_embeddings(3, 4, 2, rng);
  Tensor u = random_targets(3, 5, rng);
  CHECK_THROWS_AS(dc_loss(v, u), ShapeError);
}
