#include "dcsep/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <utility>

#include "dcsep/error.hpp"

namespace dcsep::nn {

namespace {

constexpr double kNormEps = 1e-12;

void check_rank(const Tensor& t, int rank, const char* what) {
  if (t.rank() != rank)
    throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + ", got " +
                     std::to_string(t.rank()));
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

NodeId Graph::add_node(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::placeholder(std::string name) {
  Node n;
  n.name = std::move(name);
  return add_node(std::move(n));
}

NodeId Graph::parameter(std::string name, Tensor init) {
  Node n;
  n.name = std::move(name);
  n.is_param = true;
  n.grad = Tensor(init.shape());
  n.value = std::move(init);
  NodeId id = add_node(std::move(n));
  params_.push_back(id);
  return id;
}

void Graph::set_value(NodeId id, Tensor v) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.fwd) throw ShapeError("set_value: node " + n.name + " is computed, not settable");
  n.value = std::move(v);
}

void Graph::forward() {
  for (NodeId id = 0; id < static_cast<NodeId>(nodes_.size()); ++id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.fwd) n.fwd(*this, id);
  }
}

void Graph::backward(NodeId output, const Tensor& seed) {
  Node& out = nodes_[static_cast<size_t>(output)];
  if (!out.value.same_shape(seed))
    throw ShapeError("backward: seed shape does not match output value");
  for (Node& n : nodes_) {
    if (n.is_param) continue;  // parameter grads accumulate across items
    n.grad = Tensor(n.value.shape());
  }
  out.grad = seed;
  for (NodeId id = output; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.bwd) n.bwd(*this, id);
  }
}

void Graph::zero_param_grads() {
  for (NodeId id : params_) nodes_[static_cast<size_t>(id)].grad.set_zero();
}

// ---------------------------------------------------------------------------
// conv2d

NodeId Graph::conv2d(NodeId x, NodeId kernel, NodeId bias) {
  Node n;
  n.name = "conv2d";
  n.inputs = {x, kernel, bias};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Tensor& wv = g.value(self.inputs[1]);
    const Tensor& bv = g.value(self.inputs[2]);
    check_rank(xv, 3, "conv2d input");
    check_rank(wv, 4, "conv2d kernel");
    const Eigen::Index T = xv.dim(0), F = xv.dim(1), Ci = xv.dim(2);
    const Eigen::Index wt = wv.dim(0), wf = wv.dim(1), Co = wv.dim(3);
    if (wv.dim(2) != Ci) throw ShapeError("conv2d: kernel input channels != tensor channels");
    if (bv.size() != Co) throw ShapeError("conv2d: bias length != output channels");
    const Eigen::Index pad_t = (wt - 1) / 2, pad_f = (wf - 1) / 2;
    const Eigen::Index K = wt * wf * Ci;

    self.value = Tensor({T, F, Co});
    ConstMatMap W(wv.data(), K, Co);
    ConstVecMap b(bv.data(), Co);
    RowMat col(F, K);
    for (Eigen::Index t = 0; t < T; ++t) {
      col.setZero();
      for (Eigen::Index dt = 0; dt < wt; ++dt) {
        const Eigen::Index ti = t + dt - pad_t;
        if (ti < 0 || ti >= T) continue;
        for (Eigen::Index df = 0; df < wf; ++df) {
          const Eigen::Index base = (dt * wf + df) * Ci;
          for (Eigen::Index f = 0; f < F; ++f) {
            const Eigen::Index fi = f + df - pad_f;
            if (fi < 0 || fi >= F) continue;
            std::memcpy(col.data() + f * K + base, xv.data() + (ti * F + fi) * Ci,
                        sizeof(double) * static_cast<size_t>(Ci));
          }
        }
      }
      MatMap out_t(self.value.data() + t * F * Co, F, Co);
      out_t.noalias() = col * W;
      out_t.rowwise() += b.transpose();
    }
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Tensor& wv = g.value(self.inputs[1]);
    const Eigen::Index T = xv.dim(0), F = xv.dim(1), Ci = xv.dim(2);
    const Eigen::Index wt = wv.dim(0), wf = wv.dim(1), Co = wv.dim(3);
    const Eigen::Index pad_t = (wt - 1) / 2, pad_f = (wf - 1) / 2;
    const Eigen::Index K = wt * wf * Ci;

    Tensor& gx = g.grad(self.inputs[0]);
    Tensor& gw = g.grad(self.inputs[1]);
    Tensor& gb = g.grad(self.inputs[2]);
    ConstMatMap W(wv.data(), K, Co);
    MatMap GW(gw.data(), K, Co);
    VecMap GB(gb.data(), Co);

    RowMat col(F, K);
    RowMat scatter(F, K);
    for (Eigen::Index t = 0; t < T; ++t) {
      col.setZero();
      for (Eigen::Index dt = 0; dt < wt; ++dt) {
        const Eigen::Index ti = t + dt - pad_t;
        if (ti < 0 || ti >= T) continue;
        for (Eigen::Index df = 0; df < wf; ++df) {
          const Eigen::Index base = (dt * wf + df) * Ci;
          for (Eigen::Index f = 0; f < F; ++f) {
            const Eigen::Index fi = f + df - pad_f;
            if (fi < 0 || fi >= F) continue;
            std::memcpy(col.data() + f * K + base, xv.data() + (ti * F + fi) * Ci,
                        sizeof(double) * static_cast<size_t>(Ci));
          }
        }
      }
      ConstMatMap go_t(self.grad.data() + t * F * Co, F, Co);
      GW.noalias() += col.transpose() * go_t;
      GB.noalias() += go_t.colwise().sum().transpose();
      scatter.noalias() = go_t * W.transpose();
      for (Eigen::Index dt = 0; dt < wt; ++dt) {
        const Eigen::Index ti = t + dt - pad_t;
        if (ti < 0 || ti >= T) continue;
        for (Eigen::Index df = 0; df < wf; ++df) {
          const Eigen::Index base = (dt * wf + df) * Ci;
          for (Eigen::Index f = 0; f < F; ++f) {
            const Eigen::Index fi = f + df - pad_f;
            if (fi < 0 || fi >= F) continue;
            VecMap(gx.data() + (ti * F + fi) * Ci, Ci) +=
                ConstVecMap(scatter.data() + f * K + base, Ci);
          }
        }
      }
    }
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// relu

NodeId Graph::relu(NodeId x) {
  Node n;
  n.name = "relu";
  n.inputs = {x};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    self.value = Tensor(xv.shape());
    self.value.array() = xv.array().max(0.0);
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    g.grad(self.inputs[0]).array() += (xv.array() > 0.0).cast<double>() * self.grad.array();
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// maxpool / unpool / upsample

NodeId Graph::maxpool(NodeId x, int pool_t, int pool_f) {
  if ((pool_t != 1 && pool_t != 2) || (pool_f != 1 && pool_f != 2))
    throw ShapeError("maxpool: extents must be 1 or 2");
  Node n;
  n.name = "maxpool";
  n.inputs = {x};
  n.pool.pool_t = pool_t;
  n.pool.pool_f = pool_f;
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    check_rank(xv, 3, "maxpool input");
    const Eigen::Index T = xv.dim(0), F = xv.dim(1), C = xv.dim(2);
    const int pt = self.pool.pool_t, pf = self.pool.pool_f;
    const Eigen::Index To = (T + pt - 1) / pt, Fo = (F + pf - 1) / pf;
    self.pool.pre_shape = {T, F, C};
    self.pool.argmax.assign(static_cast<size_t>(To * Fo * C), 0);
    self.value = Tensor({To, Fo, C});
    for (Eigen::Index to = 0; to < To; ++to) {
      for (Eigen::Index fo = 0; fo < Fo; ++fo) {
        for (Eigen::Index c = 0; c < C; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          Eigen::Index best_idx = -1;
          const Eigen::Index t_end = std::min<Eigen::Index>(to * pt + pt, T);
          const Eigen::Index f_end = std::min<Eigen::Index>(fo * pf + pf, F);
          for (Eigen::Index ti = to * pt; ti < t_end; ++ti) {
            for (Eigen::Index fi = fo * pf; fi < f_end; ++fi) {
              const Eigen::Index flat = (ti * F + fi) * C + c;
              const double v = xv[flat];
              if (v > best) {  // strict: ties keep the earliest (lowest) index
                best = v;
                best_idx = flat;
              }
            }
          }
          const Eigen::Index o = (to * Fo + fo) * C + c;
          self.value[o] = best;
          self.pool.argmax[static_cast<size_t>(o)] = best_idx;
        }
      }
    }
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& gx = g.grad(self.inputs[0]);
    for (Eigen::Index o = 0; o < self.value.size(); ++o)
      gx[self.pool.argmax[static_cast<size_t>(o)]] += self.grad[o];
  };
  return add_node(std::move(n));
}

NodeId Graph::unpool(NodeId x, NodeId pool_node) {
  if (!node(pool_node).fwd || node(pool_node).name != "maxpool")
    throw ShapeError("unpool: second argument must be a maxpool node");
  Node n;
  n.name = "unpool";
  n.inputs = {x, pool_node};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const PoolIndices& p = g.node(self.inputs[1]).pool;
    if (xv.size() != static_cast<Eigen::Index>(p.argmax.size()))
      throw ShapeError("unpool: input does not match recorded pool output size");
    self.value = Tensor(p.pre_shape);
    for (Eigen::Index o = 0; o < xv.size(); ++o)
      self.value[p.argmax[static_cast<size_t>(o)]] = xv[o];
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& gx = g.grad(self.inputs[0]);
    const PoolIndices& p = g.node(self.inputs[1]).pool;
    for (Eigen::Index o = 0; o < gx.size(); ++o)
      gx[o] += self.grad[p.argmax[static_cast<size_t>(o)]];
  };
  return add_node(std::move(n));
}

NodeId Graph::upsample_nn(NodeId x, NodeId pool_node) {
  if (!node(pool_node).fwd || node(pool_node).name != "maxpool")
    throw ShapeError("upsample_nn: second argument must be a maxpool node");
  Node n;
  n.name = "upsample_nn";
  n.inputs = {x, pool_node};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const PoolIndices& p = g.node(self.inputs[1]).pool;
    check_rank(xv, 3, "upsample_nn input");
    const Eigen::Index T = p.pre_shape[0], F = p.pre_shape[1], C = p.pre_shape[2];
    const int pt = p.pool_t, pf = p.pool_f;
    if (xv.dim(0) != (T + pt - 1) / pt || xv.dim(1) != (F + pf - 1) / pf || xv.dim(2) != C)
      throw ShapeError("upsample_nn: input does not match recorded pool output shape");
    self.value = Tensor({T, F, C});
    const Eigen::Index Fo = xv.dim(1);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index f = 0; f < F; ++f)
        std::memcpy(self.value.data() + (t * F + f) * C,
                    xv.data() + ((t / pt) * Fo + f / pf) * C,
                    sizeof(double) * static_cast<size_t>(C));
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& gx = g.grad(self.inputs[0]);
    const PoolIndices& p = g.node(self.inputs[1]).pool;
    const Eigen::Index T = p.pre_shape[0], F = p.pre_shape[1], C = p.pre_shape[2];
    const int pt = p.pool_t, pf = p.pool_f;
    const Eigen::Index Fo = gx.dim(1);
    for (Eigen::Index t = 0; t < T; ++t)
      for (Eigen::Index f = 0; f < F; ++f)
        VecMap(gx.data() + ((t / pt) * Fo + f / pf) * C, C) +=
            ConstVecMap(self.grad.data() + (t * F + f) * C, C);
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// concatenation

NodeId Graph::concat_last(NodeId a, NodeId b) {
  Node n;
  n.name = "concat_last";
  n.inputs = {a, b};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& av = g.value(self.inputs[0]);
    const Tensor& bv = g.value(self.inputs[1]);
    if (av.rank() != bv.rank() || av.rank() == 0)
      throw ShapeError("concat_last: rank mismatch");
    Eigen::Index lead = 1;
    for (int i = 0; i + 1 < av.rank(); ++i) {
      if (av.dim(i) != bv.dim(i)) throw ShapeError("concat_last: leading extents differ");
      lead *= av.dim(i);
    }
    const Eigen::Index ca = av.dim(av.rank() - 1), cb = bv.dim(bv.rank() - 1);
    std::vector<Eigen::Index> shape = av.shape();
    shape.back() = ca + cb;
    self.value = Tensor(shape);
    for (Eigen::Index r = 0; r < lead; ++r) {
      std::memcpy(self.value.data() + r * (ca + cb), av.data() + r * ca,
                  sizeof(double) * static_cast<size_t>(ca));
      std::memcpy(self.value.data() + r * (ca + cb) + ca, bv.data() + r * cb,
                  sizeof(double) * static_cast<size_t>(cb));
    }
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& ga = g.grad(self.inputs[0]);
    Tensor& gb = g.grad(self.inputs[1]);
    const Eigen::Index ca = ga.dim(ga.rank() - 1), cb = gb.dim(gb.rank() - 1);
    const Eigen::Index lead = (ca + cb) == 0 ? 0 : self.grad.size() / (ca + cb);
    for (Eigen::Index r = 0; r < lead; ++r) {
      VecMap(ga.data() + r * ca, ca) += ConstVecMap(self.grad.data() + r * (ca + cb), ca);
      VecMap(gb.data() + r * cb, cb) += ConstVecMap(self.grad.data() + r * (ca + cb) + ca, cb);
    }
  };
  return add_node(std::move(n));
}

NodeId Graph::concat_broadcast(NodeId cnn, NodeId lstm) {
  Node n;
  n.name = "concat_broadcast";
  n.inputs = {cnn, lstm};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& av = g.value(self.inputs[0]);
    const Tensor& bv = g.value(self.inputs[1]);
    check_rank(av, 3, "concat_broadcast map input");
    check_rank(bv, 2, "concat_broadcast frame input");
    if (av.dim(0) != bv.dim(0)) throw ShapeError("concat_broadcast: frame counts differ");
    const Eigen::Index T = av.dim(0), F = av.dim(1), C = av.dim(2), N = bv.dim(1);
    self.value = Tensor({T, F, C + N});
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index f = 0; f < F; ++f) {
        double* dst = self.value.data() + (t * F + f) * (C + N);
        std::memcpy(dst, av.data() + (t * F + f) * C, sizeof(double) * static_cast<size_t>(C));
        std::memcpy(dst + C, bv.data() + t * N, sizeof(double) * static_cast<size_t>(N));
      }
    }
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& ga = g.grad(self.inputs[0]);
    Tensor& gb = g.grad(self.inputs[1]);
    const Eigen::Index T = ga.dim(0), F = ga.dim(1), C = ga.dim(2), N = gb.dim(1);
    for (Eigen::Index t = 0; t < T; ++t) {
      for (Eigen::Index f = 0; f < F; ++f) {
        const double* src = self.grad.data() + (t * F + f) * (C + N);
        VecMap(ga.data() + (t * F + f) * C, C) += ConstVecMap(src, C);
        VecMap(gb.data() + t * N, N) += ConstVecMap(src + C, N);
      }
    }
  };
  return add_node(std::move(n));
}

NodeId Graph::concat_flatten(NodeId cnn, NodeId lstm) {
  Node n;
  n.name = "concat_flatten";
  n.inputs = {cnn, lstm};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& av = g.value(self.inputs[0]);
    const Tensor& bv = g.value(self.inputs[1]);
    check_rank(av, 3, "concat_flatten map input");
    check_rank(bv, 2, "concat_flatten frame input");
    if (av.dim(0) != bv.dim(0)) throw ShapeError("concat_flatten: frame counts differ");
    const Eigen::Index T = av.dim(0), FC = av.dim(1) * av.dim(2), N = bv.dim(1);
    self.value = Tensor({T, FC + N});
    for (Eigen::Index t = 0; t < T; ++t) {
      double* dst = self.value.data() + t * (FC + N);
      std::memcpy(dst, av.data() + t * FC, sizeof(double) * static_cast<size_t>(FC));
      std::memcpy(dst + FC, bv.data() + t * N, sizeof(double) * static_cast<size_t>(N));
    }
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& ga = g.grad(self.inputs[0]);
    Tensor& gb = g.grad(self.inputs[1]);
    const Eigen::Index T = ga.dim(0), FC = ga.dim(1) * ga.dim(2), N = gb.dim(1);
    for (Eigen::Index t = 0; t < T; ++t) {
      const double* src = self.grad.data() + t * (FC + N);
      VecMap(ga.data() + t * FC, FC) += ConstVecMap(src, FC);
      VecMap(gb.data() + t * N, N) += ConstVecMap(src + FC, N);
    }
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// linear

NodeId Graph::linear(NodeId x, NodeId weight, NodeId bias) {
  Node n;
  n.name = "linear";
  n.inputs = {x, weight, bias};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Tensor& wv = g.value(self.inputs[1]);
    const Tensor& bv = g.value(self.inputs[2]);
    check_rank(wv, 2, "linear weight");
    const Eigen::Index in = wv.dim(0), out = wv.dim(1);
    if (xv.rank() < 1 || xv.dim(xv.rank() - 1) != in)
      throw ShapeError("linear: trailing extent != weight rows");
    if (bv.size() != out) throw ShapeError("linear: bias length != weight cols");
    const Eigen::Index B = in == 0 ? 0 : xv.size() / in;
    std::vector<Eigen::Index> shape = xv.shape();
    shape.back() = out;
    self.value = Tensor(shape);
    if (B == 0) return;
    ConstMatMap X(xv.data(), B, in);
    ConstMatMap W(wv.data(), in, out);
    MatMap Y(self.value.data(), B, out);
    Y.noalias() = X * W;
    Y.rowwise() += ConstVecMap(bv.data(), out).transpose();
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Tensor& wv = g.value(self.inputs[1]);
    const Eigen::Index in = wv.dim(0), out = wv.dim(1);
    const Eigen::Index B = in == 0 ? 0 : xv.size() / in;
    Tensor& gb = g.grad(self.inputs[2]);
    if (B == 0) return;
    ConstMatMap X(xv.data(), B, in);
    ConstMatMap W(wv.data(), in, out);
    ConstMatMap GO(self.grad.data(), B, out);
    MatMap(g.grad(self.inputs[0]).data(), B, in).noalias() += GO * W.transpose();
    MatMap(g.grad(self.inputs[1]).data(), in, out).noalias() += X.transpose() * GO;
    VecMap(gb.data(), out).noalias() += GO.colwise().sum().transpose();
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// lstm

namespace {
// saved[] layout for an lstm node.
enum LstmSaved { kGateI = 0, kGateF, kGateG, kGateO, kCell, kCellPrev, kHiddenPrev, kSavedCount };
}  // namespace

NodeId Graph::lstm(NodeId x, NodeId w_in, NodeId w_rec, NodeId bias, bool reverse) {
  Node n;
  n.name = reverse ? "lstm_rev" : "lstm_fwd";
  n.inputs = {x, w_in, w_rec, bias};
  n.fwd = [reverse](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Tensor& wv = g.value(self.inputs[1]);
    const Tensor& rv = g.value(self.inputs[2]);
    const Tensor& bv = g.value(self.inputs[3]);
    check_rank(xv, 2, "lstm input");
    check_rank(wv, 2, "lstm input weights");
    check_rank(rv, 2, "lstm recurrent weights");
    const Eigen::Index T = xv.dim(0), Din = xv.dim(1), N = rv.dim(0);
    if (wv.dim(0) != Din || wv.dim(1) != 4 * N || rv.dim(1) != 4 * N || bv.size() != 4 * N)
      throw ShapeError("lstm: weight shapes disagree (want {Din,4N}, {N,4N}, {4N})");

    self.saved.assign(kSavedCount, Tensor({T, N}));
    self.value = Tensor({T, N});
    ConstMatMap X(xv.data(), T, Din);
    ConstMatMap W(wv.data(), Din, 4 * N);
    ConstMatMap R(rv.data(), N, 4 * N);
    ConstVecMap b(bv.data(), 4 * N);
    RowMat Zin(T, 4 * N);
    Zin.noalias() = X * W;
    Zin.rowwise() += b.transpose();

    Eigen::RowVectorXd h = Eigen::RowVectorXd::Zero(N);
    Eigen::RowVectorXd c = Eigen::RowVectorXd::Zero(N);
    Eigen::RowVectorXd z(4 * N);
    for (Eigen::Index s = 0; s < T; ++s) {
      const Eigen::Index t = reverse ? T - 1 - s : s;
      z = Zin.row(t);
      z.noalias() += h * R;
      MatMap(self.saved[kHiddenPrev].data(), T, N).row(t) = h;
      MatMap(self.saved[kCellPrev].data(), T, N).row(t) = c;
      for (Eigen::Index j = 0; j < N; ++j) {
        const double gi = sigmoid(z[j]);
        const double gf = sigmoid(z[N + j]);
        const double gg = std::tanh(z[2 * N + j]);
        const double go = sigmoid(z[3 * N + j]);
        const double cn = gf * c[j] + gi * gg;
        self.saved[kGateI].data()[t * N + j] = gi;
        self.saved[kGateF].data()[t * N + j] = gf;
        self.saved[kGateG].data()[t * N + j] = gg;
        self.saved[kGateO].data()[t * N + j] = go;
        self.saved[kCell].data()[t * N + j] = cn;
        c[j] = cn;
        h[j] = go * std::tanh(cn);
      }
      MatMap(self.value.data(), T, N).row(t) = h;
    }
  };
  n.bwd = [reverse](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Tensor& wv = g.value(self.inputs[1]);
    const Tensor& rv = g.value(self.inputs[2]);
    const Eigen::Index T = xv.dim(0), Din = xv.dim(1), N = rv.dim(0);
    ConstMatMap X(xv.data(), T, Din);
    ConstMatMap W(wv.data(), Din, 4 * N);
    ConstMatMap R(rv.data(), N, 4 * N);
    ConstMatMap GO_all(self.grad.data(), T, N);
    ConstMatMap I(self.saved[kGateI].data(), T, N);
    ConstMatMap Fg(self.saved[kGateF].data(), T, N);
    ConstMatMap Gg(self.saved[kGateG].data(), T, N);
    ConstMatMap Og(self.saved[kGateO].data(), T, N);
    ConstMatMap Cc(self.saved[kCell].data(), T, N);
    ConstMatMap Cp(self.saved[kCellPrev].data(), T, N);
    ConstMatMap Hp(self.saved[kHiddenPrev].data(), T, N);

    RowMat DZ = RowMat::Zero(T, 4 * N);
    Eigen::RowVectorXd dh = Eigen::RowVectorXd::Zero(N);
    Eigen::RowVectorXd dc = Eigen::RowVectorXd::Zero(N);
    for (Eigen::Index s = T - 1; s >= 0; --s) {
      const Eigen::Index t = reverse ? T - 1 - s : s;
      for (Eigen::Index j = 0; j < N; ++j) {
        const double dht = GO_all(t, j) + dh[j];
        const double tc = std::tanh(Cc(t, j));
        const double go = Og(t, j);
        const double d_out = dht * tc;
        const double d_cell = dc[j] + dht * go * (1.0 - tc * tc);
        const double gi = I(t, j), gf = Fg(t, j), gg = Gg(t, j);
        DZ(t, j) = d_cell * gg * gi * (1.0 - gi);
        DZ(t, N + j) = d_cell * Cp(t, j) * gf * (1.0 - gf);
        DZ(t, 2 * N + j) = d_cell * gi * (1.0 - gg * gg);
        DZ(t, 3 * N + j) = d_out * go * (1.0 - go);
        dc[j] = d_cell * gf;
      }
      dh.noalias() = DZ.row(t) * R.transpose();
    }
    MatMap(g.grad(self.inputs[0]).data(), T, Din).noalias() += DZ * W.transpose();
    MatMap(g.grad(self.inputs[1]).data(), Din, 4 * N).noalias() += X.transpose() * DZ;
    MatMap(g.grad(self.inputs[2]).data(), N, 4 * N).noalias() += Hp.transpose() * DZ;
    VecMap(g.grad(self.inputs[3]).data(), 4 * N).noalias() += DZ.colwise().sum().transpose();
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// unit_normalize

NodeId Graph::unit_normalize(NodeId x) {
  Node n;
  n.name = "unit_normalize";
  n.inputs = {x};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    if (xv.rank() < 1) throw ShapeError("unit_normalize: need at least rank 1");
    const Eigen::Index D = xv.dim(xv.rank() - 1);
    const Eigen::Index B = D == 0 ? 0 : xv.size() / D;
    self.value = Tensor(xv.shape());
    for (Eigen::Index r = 0; r < B; ++r) {
      ConstVecMap v(xv.data() + r * D, D);
      const double denom = std::max(v.norm(), kNormEps);
      VecMap(self.value.data() + r * D, D) = v / denom;
    }
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    const Eigen::Index D = xv.dim(xv.rank() - 1);
    const Eigen::Index B = D == 0 ? 0 : xv.size() / D;
    Tensor& gx = g.grad(self.inputs[0]);
    for (Eigen::Index r = 0; r < B; ++r) {
      ConstVecMap v(xv.data() + r * D, D);
      ConstVecMap y(self.value.data() + r * D, D);
      ConstVecMap go(self.grad.data() + r * D, D);
      const double norm = v.norm();
      VecMap dst(gx.data() + r * D, D);
      if (norm >= kNormEps) {
        dst += (go - y.dot(go) * y) / norm;
      } else {
        dst += go / kNormEps;  // below the floor the map is plain scaling
      }
    }
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// reshapes

NodeId Graph::expand_dims_last(NodeId x) {
  Node n;
  n.name = "expand_dims_last";
  n.inputs = {x};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    std::vector<Eigen::Index> shape = xv.shape();
    shape.push_back(1);
    self.value = xv.reshaped(shape);
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    Tensor& gx = g.grad(self.inputs[0]);
    gx.array() += self.grad.array();
  };
  return add_node(std::move(n));
}

NodeId Graph::split_last(NodeId x, Eigen::Index f, Eigen::Index d) {
  Node n;
  n.name = "split_last";
  n.inputs = {x};
  n.fwd = [f, d](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    check_rank(xv, 2, "split_last input");
    if (xv.dim(1) != f * d) throw ShapeError("split_last: trailing extent != f*d");
    self.value = xv.reshaped({xv.dim(0), f, d});
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    g.grad(self.inputs[0]).array() += self.grad.array();
  };
  return add_node(std::move(n));
}

NodeId Graph::flatten_frames(NodeId x) {
  Node n;
  n.name = "flatten_frames";
  n.inputs = {x};
  n.fwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    const Tensor& xv = g.value(self.inputs[0]);
    check_rank(xv, 3, "flatten_frames input");
    self.value = xv.reshaped({xv.dim(0), xv.dim(1) * xv.dim(2)});
  };
  n.bwd = [](Graph& g, NodeId id) {
    Node& self = g.node(id);
    g.grad(self.inputs[0]).array() += self.grad.array();
  };
  return add_node(std::move(n));
}

// ---------------------------------------------------------------------------
// layer helpers

Tensor uniform_init(std::vector<Eigen::Index> shape, Eigen::Index fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor t(shape);
  for (Eigen::Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

NodeId lstm_layer(Graph& g, NodeId x, Eigen::Index in_dim, Eigen::Index cells, Direction dir,
                  const std::string& prefix, std::mt19937_64& rng) {
  auto one_direction = [&](const std::string& tag, bool reverse) {
    NodeId w = g.parameter(prefix + tag + ".w", uniform_init({in_dim, 4 * cells}, in_dim, rng));
    NodeId r = g.parameter(prefix + tag + ".r", uniform_init({cells, 4 * cells}, cells, rng));
    Tensor b = Tensor::zeros({4 * cells});
    for (Eigen::Index j = 0; j < cells; ++j) b[cells + j] = 1.0;  // open forget gates at start
    NodeId bid = g.parameter(prefix + tag + ".b", std::move(b));
    return g.lstm(x, w, r, bid, reverse);
  };
  if (dir == Direction::Uni) return one_direction("", false);
  NodeId fwd = one_direction(".fwd", false);
  NodeId bwd = one_direction(".bwd", true);
  return g.concat_last(fwd, bwd);
}

NodeId dense_layer(Graph& g, NodeId x, Eigen::Index in, Eigen::Index out,
                   const std::string& prefix, std::mt19937_64& rng) {
  NodeId w = g.parameter(prefix + ".w", uniform_init({in, out}, in, rng));
  NodeId b = g.parameter(prefix + ".b", Tensor::zeros({out}));
  return g.linear(x, w, b);
}

NodeId conv_layer(Graph& g, NodeId x, Eigen::Index wt, Eigen::Index wf, Eigen::Index in_ch,
                  Eigen::Index out_ch, const std::string& prefix, std::mt19937_64& rng) {
  NodeId w = g.parameter(prefix + ".w",
                         uniform_init({wt, wf, in_ch, out_ch}, wt * wf * in_ch, rng));
  NodeId b = g.parameter(prefix + ".b", Tensor::zeros({out_ch}));
  return g.conv2d(x, w, b);
}

}  // namespace dcsep::nn
