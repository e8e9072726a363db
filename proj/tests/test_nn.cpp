#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>

#include "dcsep/adam.hpp"
#include "dcsep/checkpoint.hpp"
#include "dcsep/error.hpp"
#include "dcsep/graph.hpp"
#include "grad_check.hpp"

using namespace dcsep;
using nn::Graph;
using nn::NodeId;
using nn::Tensor;
using testing::distinct_tensor;
using testing::fd_max_rel_error;
using testing::random_tensor;

namespace {

// Direct five-loop cross-correlation with zero padding, begin-heavy on even
// kernels, written independently of the graph implementation.
Tensor conv2d_oracle(const Tensor& x, const Tensor& w, const Tensor& b) {
  const Eigen::Index T = x.dim(0), F = x.dim(1), Ci = x.dim(2);
  const Eigen::Index wt = w.dim(0), wf = w.dim(1), Co = w.dim(3);
  const Eigen::Index pad_t = (wt - 1) / 2, pad_f = (wf - 1) / 2;
  Tensor out({T, F, Co});
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index f = 0; f < F; ++f)
      for (Eigen::Index co = 0; co < Co; ++co) {
        double acc = b[co];
        for (Eigen::Index dt = 0; dt < wt; ++dt)
          for (Eigen::Index df = 0; df < wf; ++df)
            for (Eigen::Index ci = 0; ci < Ci; ++ci) {
              const Eigen::Index ti = t + dt - pad_t, fi = f + df - pad_f;
              if (ti < 0 || ti >= T || fi < 0 || fi >= F) continue;
              acc += w[((dt * wf + df) * Ci + ci) * Co + co] * x(ti, fi, ci);
            }
        out(t, f, co) = acc;
      }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches hand-worked 1x3 and even-kernel padding") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId w = g.parameter("w", Tensor::full({1, 3, 1, 1}, 1.0));
  NodeId b = g.parameter("b", Tensor::zeros({1}));
  NodeId y = g.conv2d(x, w, b);
  Tensor xv({1, 3, 1});
  xv[0] = 1;
  xv[1] = 2;
  xv[2] = 3;
  g.set_value(x, xv);
  g.forward();
  CHECK(g.value(y)[0] == doctest::Approx(3.0));  // 0+1+2 with leading zero pad
  CHECK(g.value(y)[1] == doctest::Approx(6.0));
  CHECK(g.value(y)[2] == doctest::Approx(5.0));

  // Even kernels pad only at the trailing edge: out[f] = x[f] + x[f+1].
  Graph g2;
  NodeId x2 = g2.placeholder();
  NodeId w2 = g2.parameter("w", Tensor::full({1, 2, 1, 1}, 1.0));
  NodeId b2 = g2.parameter("b", Tensor::zeros({1}));
  NodeId y2 = g2.conv2d(x2, w2, b2);
  g2.set_value(x2, xv);
  g2.forward();
  CHECK(g2.value(y2)[0] == doctest::Approx(3.0));
  CHECK(g2.value(y2)[1] == doctest::Approx(5.0));
  CHECK(g2.value(y2)[2] == doctest::Approx(3.0));
}

TEST_CASE("conv2d forward agrees with the direct five-loop computation") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> dim(1, 5), ker(1, 4), ch(1, 3);
  for (int rep = 0; rep < 25; ++rep) {
    const Eigen::Index T = dim(rng), F = dim(rng), Ci = ch(rng), Co = ch(rng);
    const Eigen::Index wt = ker(rng), wf = ker(rng);
    Graph g;
    NodeId x = g.placeholder();
    NodeId w = g.parameter("w", random_tensor({wt, wf, Ci, Co}, rng));
    NodeId b = g.parameter("b", random_tensor({Co}, rng));
    NodeId y = g.conv2d(x, w, b);
    g.set_value(x, random_tensor({T, F, Ci}, rng));
    g.forward();
    const Tensor want = conv2d_oracle(g.value(x), g.value(w), g.value(b));
    REQUIRE(g.value(y).same_shape(want));
    for (Eigen::Index i = 0; i < want.size(); ++i)
      CHECK(g.value(y)[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d gradients pass central finite differences") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> dim(1, 5), ker(1, 4), ch(1, 3);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index T = dim(rng), F = dim(rng), Ci = ch(rng), Co = ch(rng);
    Graph g;
    NodeId x = g.placeholder();
    NodeId w = g.parameter("w", random_tensor({ker(rng), ker(rng), Ci, Co}, rng));
    NodeId b = g.parameter("b", random_tensor({Co}, rng));
    NodeId y = g.conv2d(x, w, b);
    g.set_value(x, random_tensor({T, F, Ci}, rng));
    CHECK(fd_max_rel_error(g, y, {x, w, b}, rng) < 1e-4);
  }
}

TEST_CASE("relu forward and gradients") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId y = g.relu(x);
  Tensor xv({4});
  xv[0] = -2;
  xv[1] = -1e-9;
  xv[2] = 0;
  xv[3] = 2.5;
  g.set_value(x, xv);
  g.forward();
  CHECK(g.value(y)[0] == 0.0);
  CHECK(g.value(y)[1] == 0.0);
  CHECK(g.value(y)[2] == 0.0);
  CHECK(g.value(y)[3] == 2.5);

  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> dim(1, 6);
  for (int rep = 0; rep < 20; ++rep) {
    Graph h;
    NodeId a = h.placeholder();
    NodeId r = h.relu(a);
    h.set_value(a, distinct_tensor({dim(rng), dim(rng)}, rng));
    CHECK(fd_max_rel_error(h, r, {a}, rng) < 1e-4);
  }
}

TEST_CASE("maxpool takes window maxima with ceil-mode edges") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId y = g.maxpool(x, 2, 2);
  // 3x3x1: odd extents exercise the partial trailing windows.
  Tensor xv({3, 3, 1});
  for (Eigen::Index i = 0; i < 9; ++i) xv[i] = static_cast<double>(i);
  g.set_value(x, xv);
  g.forward();
  REQUIRE(g.value(y).shape() == std::vector<Eigen::Index>{2, 2, 1});
  CHECK(g.value(y)(0, 0, 0) == 4.0);  // max of {0,1,3,4}
  CHECK(g.value(y)(0, 1, 0) == 5.0);  // max of {2,5}
  CHECK(g.value(y)(1, 0, 0) == 7.0);  // max of {6,7}
  CHECK(g.value(y)(1, 1, 0) == 8.0);  // max of {8}

  // Equal values: the earliest flat index wins.
  Graph g2;
  NodeId x2 = g2.placeholder();
  NodeId y2 = g2.maxpool(x2, 2, 1);
  g2.set_value(x2, Tensor::full({2, 1, 1}, 7.0));
  g2.forward();
  CHECK(g2.value(y2)[0] == 7.0);
  CHECK(g2.node(y2).pool.argmax[0] == 0);

  CHECK_THROWS_AS(g2.maxpool(x2, 3, 1), ShapeError);
}

TEST_CASE("maxpool gradients route to the argmax positions") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> dim(1, 6), ext(1, 2), ch(1, 3);
  for (int rep = 0; rep < 20; ++rep) {
    Graph g;
    NodeId x = g.placeholder();
    NodeId y = g.maxpool(x, ext(rng), ext(rng));
    g.set_value(x, distinct_tensor({dim(rng), dim(rng), ch(rng)}, rng));
    CHECK(fd_max_rel_error(g, y, {x}, rng) < 1e-4);
  }
}

TEST_CASE("unpool scatters into recorded argmax positions") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId pooled = g.maxpool(x, 2, 2);
  NodeId dec = g.placeholder("dec");
  NodeId y = g.unpool(dec, pooled);
  Tensor xv({2, 2, 1});
  xv[0] = 1;
  xv[1] = 9;
  xv[2] = 3;
  xv[3] = 2;  // argmax at flat index 1
  g.set_value(x, xv);
  Tensor dv({1, 1, 1});
  dv[0] = 5.0;
  g.set_value(dec, dv);
  g.forward();
  CHECK(g.value(y)[0] == 0.0);
  CHECK(g.value(y)[1] == 5.0);
  CHECK(g.value(y)[2] == 0.0);
  CHECK(g.value(y)[3] == 0.0);

  CHECK_THROWS_AS(g.unpool(dec, dec), ShapeError);

  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> dim(1, 6), ext(1, 2), ch(1, 3);
  for (int rep = 0; rep < 20; ++rep) {
    Graph h;
    const Eigen::Index T = dim(rng), F = dim(rng), C = ch(rng);
    const int pt = ext(rng), pf = ext(rng);
    NodeId a = h.placeholder();
    NodeId p = h.maxpool(a, pt, pf);
    NodeId d = h.placeholder("dec");
    NodeId u = h.unpool(d, p);
    h.set_value(a, distinct_tensor({T, F, C}, rng));
    h.set_value(d, random_tensor({(T + pt - 1) / pt, (F + pf - 1) / pf, C}, rng));
    CHECK(fd_max_rel_error(h, u, {d}, rng) < 1e-4);
  }
}

TEST_CASE("upsample_nn repeats values over each pooling window") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId pooled = g.maxpool(x, 2, 2);
  NodeId dec = g.placeholder("dec");
  NodeId y = g.upsample_nn(dec, pooled);
  std::mt19937_64 seed_rng(1);
  g.set_value(x, distinct_tensor({3, 3, 1}, seed_rng));
  Tensor dv({2, 2, 1});
  dv[0] = 1;
  dv[1] = 2;
  dv[2] = 3;
  dv[3] = 4;
  g.set_value(dec, dv);
  g.forward();
  const Tensor& out = g.value(y);
  REQUIRE(out.shape() == std::vector<Eigen::Index>{3, 3, 1});
  CHECK(out(0, 0, 0) == 1.0);
  CHECK(out(0, 1, 0) == 1.0);
  CHECK(out(1, 0, 0) == 1.0);
  CHECK(out(1, 1, 0) == 1.0);
  CHECK(out(0, 2, 0) == 2.0);
  CHECK(out(2, 0, 0) == 3.0);
  CHECK(out(2, 2, 0) == 4.0);

  std::mt19937_64 rng(16);
  std::uniform_int_distribution<int> dim(1, 6), ext(1, 2), ch(1, 3);
  for (int rep = 0; rep < 20; ++rep) {
    Graph h;
    const Eigen::Index T = dim(rng), F = dim(rng), C = ch(rng);
    const int pt = ext(rng), pf = ext(rng);
    NodeId a = h.placeholder();
    NodeId p = h.maxpool(a, pt, pf);
    NodeId d = h.placeholder("dec");
    NodeId u = h.upsample_nn(d, p);
    h.set_value(a, distinct_tensor({T, F, C}, rng));
    h.set_value(d, random_tensor({(T + pt - 1) / pt, (F + pf - 1) / pf, C}, rng));
    CHECK(fd_max_rel_error(h, u, {d}, rng) < 1e-4);
  }
}

TEST_CASE("concatenations lay elements out as documented") {
  Graph g;
  NodeId a = g.placeholder("a");
  NodeId b = g.placeholder("b");
  NodeId y = g.concat_broadcast(a, b);
  Tensor av({1, 2, 2});
  for (Eigen::Index i = 0; i < 4; ++i) av[i] = static_cast<double>(i + 1);
  Tensor bv({1, 3});
  bv[0] = 10;
  bv[1] = 20;
  bv[2] = 30;
  g.set_value(a, av);
  g.set_value(b, bv);
  g.forward();
  const Tensor& out = g.value(y);
  REQUIRE(out.shape() == std::vector<Eigen::Index>{1, 2, 5});
  CHECK(out(0, 0, 0) == 1.0);
  CHECK(out(0, 0, 1) == 2.0);
  CHECK(out(0, 0, 2) == 10.0);
  CHECK(out(0, 0, 4) == 30.0);
  CHECK(out(0, 1, 0) == 3.0);
  CHECK(out(0, 1, 2) == 10.0);  // frame vector repeats across frequencies

  // Zero-channel map input: output is just the broadcast frame vector.
  Graph g0;
  NodeId a0 = g0.placeholder("a");
  NodeId b0 = g0.placeholder("b");
  NodeId y0 = g0.concat_broadcast(a0, b0);
  g0.set_value(a0, Tensor({2, 3, 0}));
  g0.set_value(b0, bv.reshaped({1, 3}));
  CHECK_THROWS_AS(g0.forward(), ShapeError);  // frame counts differ
  Tensor b2({2, 3});
  for (Eigen::Index i = 0; i < 6; ++i) b2[i] = static_cast<double>(i);
  g0.set_value(b0, b2);
  g0.forward();
  REQUIRE(g0.value(y0).shape() == std::vector<Eigen::Index>{2, 3, 3});
  CHECK(g0.value(y0)(0, 2, 1) == 1.0);
  CHECK(g0.value(y0)(1, 0, 2) == 5.0);

  Graph gf;
  NodeId af = gf.placeholder("a");
  NodeId bf = gf.placeholder("b");
  NodeId yf = gf.concat_flatten(af, bf);
  gf.set_value(af, av);
  gf.set_value(bf, bv);
  gf.forward();
  REQUIRE(gf.value(yf).shape() == std::vector<Eigen::Index>{1, 7});
  CHECK(gf.value(yf)[0] == 1.0);
  CHECK(gf.value(yf)[3] == 4.0);
  CHECK(gf.value(yf)[4] == 10.0);
  CHECK(gf.value(yf)[6] == 30.0);

  Graph gl;
  NodeId al = gl.placeholder("a");
  NodeId bl = gl.placeholder("b");
  NodeId yl = gl.concat_last(al, bl);
  Tensor l1({2, 2});
  l1[0] = 1;
  l1[1] = 2;
  l1[2] = 3;
  l1[3] = 4;
  Tensor l2({2, 1});
  l2[0] = 9;
  l2[1] = 8;
  gl.set_value(al, l1);
  gl.set_value(bl, l2);
  gl.forward();
  REQUIRE(gl.value(yl).shape() == std::vector<Eigen::Index>{2, 3});
  CHECK(gl.value(yl)(0, 2) == 9.0);
  CHECK(gl.value(yl)(1, 2) == 8.0);
}

TEST_CASE("concatenation gradients pass central finite differences") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> dim(1, 5), ch(1, 4);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index T = dim(rng), F = dim(rng);
    Graph g;
    NodeId a = g.placeholder("a");
    NodeId b = g.placeholder("b");
    NodeId y = g.concat_broadcast(a, b);
    g.set_value(a, random_tensor({T, F, ch(rng)}, rng));
    g.set_value(b, random_tensor({T, ch(rng)}, rng));
    CHECK(fd_max_rel_error(g, y, {a, b}, rng) < 1e-4);

    Graph gf;
    NodeId af = gf.placeholder("a");
    NodeId bf = gf.placeholder("b");
    NodeId yf = gf.concat_flatten(af, bf);
    gf.set_value(af, random_tensor({T, F, ch(rng)}, rng));
    gf.set_value(bf, random_tensor({T, ch(rng)}, rng));
    CHECK(fd_max_rel_error(gf, yf, {af, bf}, rng) < 1e-4);

    Graph gl;
    NodeId al = gl.placeholder("a");
    NodeId bl = gl.placeholder("b");
    NodeId yl = gl.concat_last(al, bl);
    gl.set_value(al, random_tensor({T, ch(rng)}, rng));
    gl.set_value(bl, random_tensor({T, ch(rng)}, rng));
    CHECK(fd_max_rel_error(gl, yl, {al, bl}, rng) < 1e-4);
  }
}

TEST_CASE("linear applies xW + b over leading batch axes") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId w = g.parameter("w", Tensor::from({2, 2}, (Eigen::ArrayXd(4) << 1, 2, 3, 4).finished()));
  NodeId b = g.parameter("b", Tensor::from({2}, (Eigen::ArrayXd(2) << 10, 20).finished()));
  NodeId y = g.linear(x, w, b);
  Tensor xv({1, 2, 2});  // leading axes {1,2} are batch
  xv[0] = 1;
  xv[1] = 0;
  xv[2] = 0;
  xv[3] = 1;
  g.set_value(x, xv);
  g.forward();
  REQUIRE(g.value(y).shape() == std::vector<Eigen::Index>{1, 2, 2});
  CHECK(g.value(y)(0, 0, 0) == 11.0);
  CHECK(g.value(y)(0, 0, 1) == 22.0);
  CHECK(g.value(y)(0, 1, 0) == 13.0);
  CHECK(g.value(y)(0, 1, 1) == 24.0);

  std::mt19937_64 rng(18);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int rep = 0; rep < 20; ++rep) {
    Graph h;
    const Eigen::Index in = dim(rng), out = dim(rng);
    NodeId a = h.placeholder();
    NodeId ww = h.parameter("w", random_tensor({in, out}, rng));
    NodeId bb = h.parameter("b", random_tensor({out}, rng));
    NodeId r = h.linear(a, ww, bb);
    h.set_value(a, random_tensor({dim(rng), dim(rng), in}, rng));
    CHECK(fd_max_rel_error(h, r, {a, ww, bb}, rng) < 1e-4);
  }
}

TEST_CASE("lstm reproduces the closed-form zero-weight recurrence") {
  // With all weights zero and only the candidate-gate bias set, gates sit at
  // sigmoid(0)=0.5 and the cell integrates 0.5*tanh(beta) per step.
  const double beta = 0.7;
  const Eigen::Index N = 3;
  Graph g;
  NodeId x = g.placeholder();
  NodeId w = g.parameter("w", Tensor::zeros({2, 4 * N}));
  NodeId r = g.parameter("r", Tensor::zeros({N, 4 * N}));
  Tensor bias = Tensor::zeros({4 * N});
  for (Eigen::Index j = 0; j < N; ++j) bias[2 * N + j] = beta;
  NodeId b = g.parameter("b", std::move(bias));
  NodeId y = g.lstm(x, w, r, b, false);
  g.set_value(x, Tensor::zeros({2, 2}));
  g.forward();
  const double c1 = 0.5 * std::tanh(beta);
  const double c2 = 0.5 * c1 + 0.5 * std::tanh(beta);
  for (Eigen::Index j = 0; j < N; ++j) {
    CHECK(g.value(y)(0, j) == doctest::Approx(0.5 * std::tanh(c1)).epsilon(1e-12));
    CHECK(g.value(y)(1, j) == doctest::Approx(0.5 * std::tanh(c2)).epsilon(1e-12));
  }
}

TEST_CASE("reversed lstm equals forward lstm on the reversed sequence") {
  std::mt19937_64 rng(19);
  const Eigen::Index T = 5, Din = 3, N = 4;
  Tensor wv = random_tensor({Din, 4 * N}, rng);
  Tensor rv = random_tensor({N, 4 * N}, rng);
  Tensor bv = random_tensor({4 * N}, rng);
  Tensor xv = random_tensor({T, Din}, rng);
  Tensor x_flip({T, Din});
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < Din; ++j) x_flip(t, j) = xv(T - 1 - t, j);

  Graph ga;
  NodeId xa = ga.placeholder();
  NodeId ya = ga.lstm(xa, ga.parameter("w", wv), ga.parameter("r", rv), ga.parameter("b", bv), true);
  ga.set_value(xa, xv);
  ga.forward();

  Graph gb;
  NodeId xb = gb.placeholder();
  NodeId yb = gb.lstm(xb, gb.parameter("w", wv), gb.parameter("r", rv), gb.parameter("b", bv), false);
  gb.set_value(xb, x_flip);
  gb.forward();

  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index j = 0; j < N; ++j)
      CHECK(ga.value(ya)(t, j) == doctest::Approx(gb.value(yb)(T - 1 - t, j)).epsilon(1e-12));
}

TEST_CASE("lstm gradients pass central finite differences") {
  std::mt19937_64 rng(20);
  std::uniform_int_distribution<int> dim(1, 4);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::Index T = dim(rng), Din = dim(rng), N = dim(rng);
    const bool reverse = rep % 2 == 1;
    Graph g;
    NodeId x = g.placeholder();
    NodeId w = g.parameter("w", random_tensor({Din, 4 * N}, rng));
    NodeId r = g.parameter("r", random_tensor({N, 4 * N}, rng));
    NodeId b = g.parameter("b", random_tensor({4 * N}, rng));
    NodeId y = g.lstm(x, w, r, b, reverse);
    g.set_value(x, random_tensor({T, Din}, rng));
    CHECK(fd_max_rel_error(g, y, {x, w, r, b}, rng) < 1e-4);
  }
}

TEST_CASE("bidirectional layer concatenates directions and stays differentiable") {
  std::mt19937_64 rng(21);
  Graph g;
  NodeId x = g.placeholder();
  NodeId y = nn::lstm_layer(g, x, 3, 2, nn::Direction::Bi, "l0", rng);
  g.set_value(x, random_tensor({4, 3}, rng));
  g.forward();
  REQUIRE(g.value(y).shape() == std::vector<Eigen::Index>{4, 4});
  CHECK(g.parameters().size() == 6);  // w, r, b per direction

  std::vector<NodeId> wrt = {x};
  for (NodeId p : g.parameters()) wrt.push_back(p);
  CHECK(fd_max_rel_error(g, y, wrt, rng) < 1e-4);

  // Forget-gate bias block starts at one, everything else at zero.
  const Tensor& bias = g.value(g.parameters()[2]);
  CHECK(bias[0] == 0.0);
  CHECK(bias[2] == 1.0);
  CHECK(bias[3] == 1.0);
  CHECK(bias[4] == 0.0);
}

TEST_CASE("unit_normalize scales rows onto the unit sphere") {
  Graph g;
  NodeId x = g.placeholder();
  NodeId y = g.unit_normalize(x);
  Tensor xv({2, 2});
  xv[0] = 3;
  xv[1] = 4;
  xv[2] = 0;
  xv[3] = 0;  // all-zero row must stay zero
  g.set_value(x, xv);
  g.forward();
  CHECK(g.value(y)(0, 0) == doctest::Approx(0.6));
  CHECK(g.value(y)(0, 1) == doctest::Approx(0.8));
  CHECK(g.value(y)(1, 0) == 0.0);
  CHECK(g.value(y)(1, 1) == 0.0);

  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> dim(1, 5);
  for (int rep = 0; rep < 20; ++rep) {
    Graph h;
    NodeId a = h.placeholder();
    NodeId r = h.unit_normalize(a);
    Tensor av = random_tensor({dim(rng), dim(rng), dim(rng)}, rng);
    av.array() += av.array().sign() * 0.25;  // keep row norms well away from zero
    h.set_value(a, av);
    CHECK(fd_max_rel_error(h, r, {a}, rng) < 1e-4);
  }
}

TEST_CASE("shape adapters reshape without copying semantics") {
  std::mt19937_64 rng(23);
  Graph g;
  NodeId x = g.placeholder();
  NodeId y = g.expand_dims_last(x);
  g.set_value(x, random_tensor({3, 4}, rng));
  g.forward();
  REQUIRE(g.value(y).shape() == std::vector<Eigen::Index>{3, 4, 1});
  CHECK(fd_max_rel_error(g, y, {x}, rng) < 1e-4);

  Graph h;
  NodeId a = h.placeholder();
  NodeId s = h.split_last(a, 2, 3);
  h.set_value(a, random_tensor({4, 6}, rng));
  h.forward();
  REQUIRE(h.value(s).shape() == std::vector<Eigen::Index>{4, 2, 3});
  CHECK(h.value(s)(1, 1, 2) == h.value(a)(1, 5));
  CHECK(fd_max_rel_error(h, s, {a}, rng) < 1e-4);

  h.set_value(a, random_tensor({4, 5}, rng));
  CHECK_THROWS_AS(h.forward(), ShapeError);
}

TEST_CASE("a full encoder-decoder-style chain is end-to-end differentiable") {
  std::mt19937_64 rng(24);
  Graph g;
  NodeId x = g.placeholder();
  NodeId in3 = g.expand_dims_last(x);
  NodeId c1 = nn::conv_layer(g, in3, 2, 3, 1, 2, "enc1", rng);
  NodeId a1 = g.relu(c1);
  NodeId p1 = g.maxpool(a1, 2, 2);
  NodeId c2 = nn::conv_layer(g, p1, 2, 2, 2, 2, "enc2", rng);
  NodeId a2 = g.relu(c2);
  NodeId up = g.unpool(a2, p1);  // decoder jumps back to the pre-pool grid

  NodeId skip = g.concat_last(up, a1);
  NodeId d1 = nn::conv_layer(g, skip, 2, 3, 4, 2, "dec1", rng);
  NodeId ad = g.relu(d1);

  NodeId lstm = nn::lstm_layer(g, x, 6, 3, nn::Direction::Bi, "rnn", rng);
  NodeId joined = g.concat_broadcast(ad, lstm);
  NodeId emb = nn::dense_layer(g, joined, 8, 3, "head", rng);
  NodeId out = g.unit_normalize(emb);

  g.set_value(x, distinct_tensor({5, 6}, rng));
  g.forward();
  REQUIRE(g.value(out).shape() == std::vector<Eigen::Index>{5, 6, 3});
  for (Eigen::Index t = 0; t < 5; ++t)
    for (Eigen::Index f = 0; f < 6; ++f) {
      double n2 = 0;
      for (Eigen::Index d = 0; d < 3; ++d) n2 += g.value(out)(t, f, d) * g.value(out)(t, f, d);
      CHECK(n2 == doctest::Approx(1.0).epsilon(1e-9));
    }

  std::vector<NodeId> wrt = {x};
  for (NodeId p : g.parameters()) wrt.push_back(p);
  CHECK(fd_max_rel_error(g, out, wrt, rng) < 1e-4);
}

TEST_CASE("parameter gradients accumulate across items until cleared") {
  std::mt19937_64 rng(25);
  Graph g;
  NodeId x = g.placeholder();
  NodeId y = nn::dense_layer(g, x, 3, 2, "fc", rng);
  Tensor x1 = random_tensor({4, 3}, rng);
  Tensor seed = random_tensor({4, 2}, rng);

  g.set_value(x, x1);
  g.forward();
  g.zero_param_grads();
  g.backward(y, seed);
  Eigen::ArrayXd once = g.grad(g.parameters()[0]).array();
  g.backward(y, seed);
  CHECK(((g.grad(g.parameters()[0]).array() - 2.0 * once).abs().maxCoeff()) < 1e-14);
  g.zero_param_grads();
  CHECK(g.grad(g.parameters()[0]).array().abs().maxCoeff() == 0.0);
}

TEST_CASE("adam takes the documented bias-corrected first step") {
  Graph g;
  NodeId p = g.parameter("p", Tensor::full({2}, 1.0));
  nn::AdamConfig cfg;
  cfg.lr = 0.5;
  nn::Adam opt(cfg);
  g.grad(p).array() = 0.2;  // constant gradient: m-hat = g, v-hat = g^2
  opt.step(g);
  const double want = 1.0 - 0.5 * 0.2 / (0.2 + 1e-8);
  CHECK(g.value(p)[0] == doctest::Approx(want).epsilon(1e-10));
  CHECK(g.value(p)[1] == doctest::Approx(want).epsilon(1e-10));

  // Driving d/dx of (x-3)^2 by hand: Adam should settle near the minimum.
  Graph h;
  NodeId q = h.parameter("q", Tensor::zeros({1}));
  nn::Adam opt2(nn::AdamConfig{0.05, 0.9, 0.999, 1e-8});
  for (int it = 0; it < 2000; ++it) {
    h.grad(q)[0] = 2.0 * (h.value(q)[0] - 3.0);
    opt2.step(h);
  }
  CHECK(h.value(q)[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("checkpoints round-trip weights and metadata") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "dcsep_ckpt_test";
  fs::create_directories(dir);
  const std::string stem = (dir / "model").string();

  std::mt19937_64 rng(26);
  Graph g;
  NodeId x = g.placeholder();
  NodeId h1 = nn::dense_layer(g, x, 4, 3, "fc1", rng);
  NodeId y = nn::lstm_layer(g, h1, 3, 2, nn::Direction::Uni, "rnn", rng);
  (void)y;

  nlohmann::json meta;
  meta["epoch"] = 7;
  meta["note"] = "round trip";
  nn::save_checkpoint(stem, g, meta);

  std::vector<Eigen::ArrayXd> before;
  for (NodeId p : g.parameters()) before.push_back(g.value(p).array());
  for (NodeId p : g.parameters()) g.node(p).value.array() += 1.0;

  const nlohmann::json got = nn::load_checkpoint(stem, g);
  CHECK(got.at("epoch").get<int>() == 7);
  CHECK(got.at("note").get<std::string>() == "round trip");
  for (size_t i = 0; i < before.size(); ++i)
    CHECK((g.value(g.parameters()[i]).array() - before[i]).abs().maxCoeff() == 0.0);

  CHECK(nn::read_checkpoint_meta(stem).at("epoch").get<int>() == 7);

  // A graph with different parameters must be rejected.
  Graph g2;
  NodeId x2 = g2.placeholder();
  (void)nn::dense_layer(g2, x2, 4, 3, "fc1", rng);
  CHECK_THROWS_AS(nn::load_checkpoint(stem, g2), IoError);
  CHECK_THROWS_AS(nn::load_checkpoint((dir / "missing").string(), g), IoError);

  fs::remove_all(dir);
}
