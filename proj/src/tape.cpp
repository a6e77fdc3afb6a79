// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmdn {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> as_mat(const Tensor& t) {
  return Eigen::Map<const EMat>(t.v.data(), t.rows(), t.cols());
}
Eigen::Map<EMat> as_mat(Tensor& t) { return Eigen::Map<EMat>(t.v.data(), t.rows(), t.cols()); }

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                              " and " + b.shape_str());
}

// flat index with row/col broadcasting
inline std::size_t bidx(int i, int j, int r, int c) {
  return static_cast<std::size_t>(r == 1 ? 0 : i) * c + (c == 1 ? 0 : j);
}

}  // namespace

std::string Tensor::shape_str() const {
  if (is_scalar()) return "[]";
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

NodeId Tape::push(Tensor val, bool needs_grad, std::function<void(Tape&)> vjp) {
  recs_.push_back({std::move(val), Tensor{}, needs_grad, std::move(vjp)});
  return static_cast<NodeId>(recs_.size() - 1);
}

void Tape::check_finite(NodeId id, const char* op) const {
  for (double x : recs_[id].val.v)
    if (!std::isfinite(x))
      throw std::runtime_error(std::string("non-finite value produced by op '") + op + "'");
}

Tensor& Tape::grad_ref(NodeId id) {
  Rec& r = recs_[id];
  if (r.grad.v.empty()) {
    r.grad.shape = r.val.shape;
    r.grad.v.assign(r.val.v.size(), 0.0);
  }
  return r.grad;
}

void Tape::accumulate(NodeId input, const Tensor& g) {
  if (!recs_[input].needs_grad) return;
  Tensor& acc = grad_ref(input);
  if (acc.shape == g.shape) {
    for (std::size_t i = 0; i < g.v.size(); ++i) acc.v[i] += g.v[i];
    return;
  }
  const int r = g.rows(), c = g.cols();
  const int ar = acc.rows(), ac = acc.cols();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      acc.v[bidx(i, j, ar, ac)] += g.v[static_cast<std::size_t>(i) * c + j];
}

NodeId Tape::constant(Tensor t) { return push(std::move(t), false, {}); }
NodeId Tape::param(Tensor t) { return push(std::move(t), true, {}); }

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& ta = recs_[a].val;
  const Tensor& tb = recs_[b].val;
  if (ta.is_scalar() || tb.is_scalar() || ta.cols() != tb.rows()) shape_error("matmul", ta, tb);
  Tensor out = Tensor::zeros(ta.rows(), tb.cols());
  as_mat(out).noalias() = as_mat(ta) * as_mat(tb);
  const bool ng = recs_[a].needs_grad || recs_[b].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [a, b, id](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& va = t.recs_[a].val;
      const Tensor& vb = t.recs_[b].val;
      if (t.recs_[a].needs_grad) {
        Tensor ga = Tensor::zeros(va.rows(), va.cols());
        as_mat(ga).noalias() = as_mat(g) * as_mat(vb).transpose();
        t.accumulate(a, ga);
      }
      if (t.recs_[b].needs_grad) {
        Tensor gb = Tensor::zeros(vb.rows(), vb.cols());
        as_mat(gb).noalias() = as_mat(va).transpose() * as_mat(g);
        t.accumulate(b, gb);
      }
    };
  check_finite(id, "matmul");
  return id;
}

NodeId Tape::binary(NodeId a, NodeId b, const char* name, BinFn f, BinFn dfa, BinFn dfb) {
  const Tensor& ta = recs_[a].val;
  const Tensor& tb = recs_[b].val;
  const int ra = ta.rows(), ca = ta.cols(), rb = tb.rows(), cb = tb.cols();
  if ((ra != rb && ra != 1 && rb != 1) || (ca != cb && ca != 1 && cb != 1))
    shape_error(name, ta, tb);
  const int r = std::max(ra, rb), c = std::max(ca, cb);
  Tensor out = (ta.is_scalar() && tb.is_scalar()) ? Tensor::scalar(0.0) : Tensor::zeros(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.v[static_cast<std::size_t>(i) * c + j] =
          f(ta.v[bidx(i, j, ra, ca)], tb.v[bidx(i, j, rb, cb)]);
  const bool ng = recs_[a].needs_grad || recs_[b].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [a, b, id, dfa, dfb](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& ta = t.recs_[a].val;
      const Tensor& tb = t.recs_[b].val;
      const int r = g.rows(), c = g.cols();
      const int ra = ta.rows(), ca = ta.cols(), rb = tb.rows(), cb = tb.cols();
      Tensor partial = g;
      for (int side = 0; side < 2; ++side) {
        NodeId in = side == 0 ? a : b;
        BinFn df = side == 0 ? dfa : dfb;
        if (!t.recs_[in].needs_grad) continue;
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < c; ++j)
            partial.v[static_cast<std::size_t>(i) * c + j] =
                g.v[static_cast<std::size_t>(i) * c + j] *
                df(ta.v[bidx(i, j, ra, ca)], tb.v[bidx(i, j, rb, cb)]);
        t.accumulate(in, partial);
      }
    };
  check_finite(id, name);
  return id;
}

NodeId Tape::add(NodeId a, NodeId b) {
  return binary(a, b, "add", [](double x, double y) { return x + y; },
                [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}
NodeId Tape::sub(NodeId a, NodeId b) {
  return binary(a, b, "sub", [](double x, double y) { return x - y; },
                [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}
NodeId Tape::mul(NodeId a, NodeId b) {
  return binary(a, b, "mul", [](double x, double y) { return x * y; },
                [](double, double y) { return y; }, [](double x, double) { return x; });
}
NodeId Tape::div(NodeId a, NodeId b) {
  return binary(a, b, "div", [](double x, double y) { return x / y; },
                [](double, double y) { return 1.0 / y; },
                [](double x, double y) { return -x / (y * y); });
}

NodeId Tape::unary(NodeId x, const char* name, UnFn f, BinFn dfdx) {
  const Tensor& tx = recs_[x].val;
  Tensor out = tx;
  for (double& v : out.v) v = f(v);
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, dfdx](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      const Tensor& vy = t.recs_[id].val;
      Tensor gx = g;
      for (std::size_t i = 0; i < g.v.size(); ++i) gx.v[i] = g.v[i] * dfdx(vx.v[i], vy.v[i]);
      t.accumulate(x, gx);
    };
  check_finite(id, name);
  return id;
}

NodeId Tape::relu(NodeId x) {
  return unary(x, "relu", [](double v) { return v > 0.0 ? v : 0.0; },
               [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}
NodeId Tape::sigmoid(NodeId x) {
  return unary(x, "sigmoid",
               [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                              : std::exp(v) / (1.0 + std::exp(v)); },
               [](double, double y) { return y * (1.0 - y); });
}
NodeId Tape::tanh_(NodeId x) {
  return unary(x, "tanh", [](double v) { return std::tanh(v); },
               [](double, double y) { return 1.0 - y * y; });
}
NodeId Tape::exp_(NodeId x) {
  return unary(x, "exp", [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}
NodeId Tape::log_(NodeId x) {
  return unary(x, "log", [](double v) { return std::log(v); },
               [](double v, double) { return 1.0 / v; });
}
NodeId Tape::sqrt_(NodeId x) {
  return unary(x, "sqrt", [](double v) { return std::sqrt(v); },
               [](double, double y) { return 0.5 / y; });
}
NodeId Tape::softplus(NodeId x) {
  return unary(x, "softplus",
               [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v))
                                             : std::log1p(std::exp(v)); },
               [](double v, double) {
                 return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v))
                                 : std::exp(v) / (1.0 + std::exp(v));
               });
}
NodeId Tape::abs_(NodeId x) {
  return unary(x, "abs", [](double v) { return std::abs(v); },
               [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

NodeId Tape::affine(NodeId x, double scale, double shift) {
  const Tensor& tx = recs_[x].val;
  Tensor out = tx;
  for (double& v : out.v) v = scale * v + shift;
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, scale](Tape& t) {
      Tensor gx = t.recs_[id].grad;
      for (double& v : gx.v) v *= scale;
      t.accumulate(x, gx);
    };
  check_finite(id, "affine");
  return id;
}

NodeId Tape::softmax_rows(NodeId x) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  Tensor out = tx;
  for (int i = 0; i < r; ++i) {
    double mx = out.v[static_cast<std::size_t>(i) * c];
    for (int j = 1; j < c; ++j) mx = std::max(mx, out.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      sum += out.at(i, j);
    }
    for (int j = 0; j < c; ++j) out.at(i, j) /= sum;
  }
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& y = t.recs_[id].val;
      const int r = y.rows(), c = y.cols();
      Tensor gx = g;
      for (int i = 0; i < r; ++i) {
        double dot = 0.0;
        for (int j = 0; j < c; ++j) dot += g.at(i, j) * y.at(i, j);
        for (int j = 0; j < c; ++j) gx.at(i, j) = y.at(i, j) * (g.at(i, j) - dot);
      }
      t.accumulate(x, gx);
    };
  check_finite(id, "softmax");
  return id;
}

NodeId Tape::logsumexp_rows(NodeId x) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  Tensor out = Tensor::zeros(r, 1);
  for (int i = 0; i < r; ++i) {
    double mx = tx.at(i, 0);
    for (int j = 1; j < c; ++j) mx = std::max(mx, tx.at(i, j));
    double sum = 0.0;
    for (int j = 0; j < c; ++j) sum += std::exp(tx.at(i, j) - mx);
    out.v[i] = mx + std::log(sum);
  }
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& lse = t.recs_[id].val;
      const Tensor& vx = t.recs_[x].val;
      const int r = vx.rows(), c = vx.cols();
      Tensor gx = vx;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          gx.at(i, j) = g.v[i] * std::exp(vx.at(i, j) - lse.v[i]);
      t.accumulate(x, gx);
    };
  check_finite(id, "logsumexp");
  return id;
}

NodeId Tape::log_softmax_rows(NodeId x) {
  NodeId lse = logsumexp_rows(x);
  return sub(x, lse);
}

NodeId Tape::sum_all(NodeId x) {
  const Tensor& tx = recs_[x].val;
  double total = 0.0;
  for (double v : tx.v) total += v;
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(Tensor::scalar(total), ng, {});
  if (ng)
    recs_[id].vjp = [x, id](Tape& t) {
      const double g = t.recs_[id].grad.v[0];
      Tensor gx = t.recs_[x].val;
      for (double& v : gx.v) v = g;
      t.accumulate(x, gx);
    };
  check_finite(id, "sum_all");
  return id;
}

NodeId Tape::sum_rows(NodeId x) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  Tensor out = Tensor::zeros(r, 1);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.v[i] += tx.at(i, j);
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      Tensor gx = vx;
      const int r = vx.rows(), c = vx.cols();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx.at(i, j) = g.v[i];
      t.accumulate(x, gx);
    };
  check_finite(id, "sum_rows");
  return id;
}

NodeId Tape::segment_sum(NodeId x, std::vector<int> index, int num_segments) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  if (static_cast<int>(index.size()) != r)
    throw std::invalid_argument("segment_sum: index length != row count");
  Tensor out = Tensor::zeros(num_segments, c);
  for (int i = 0; i < r; ++i) {
    const int s = index[i];
    if (s < 0 || s >= num_segments) throw std::invalid_argument("segment_sum: index out of range");
    for (int j = 0; j < c; ++j) out.at(s, j) += tx.at(i, j);
  }
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, index = std::move(index)](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      const int r = vx.rows(), c = vx.cols();
      Tensor gx = vx;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx.at(i, j) = g.at(index[i], j);
      t.accumulate(x, gx);
    };
  check_finite(id, "segment_sum");
  return id;
}

NodeId Tape::edge_weighted_sum(NodeId x, std::vector<int> src, std::vector<int> dst,
                               std::vector<double> coef, int num_out_rows) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  if (src.size() != dst.size() || (!coef.empty() && coef.size() != src.size()))
    throw std::invalid_argument("edge_weighted_sum: index/coef length mismatch");
  Tensor out = Tensor::zeros(num_out_rows, c);
  for (std::size_t e = 0; e < src.size(); ++e) {
    const int s = src[e], d = dst[e];
    if (s < 0 || s >= r || d < 0 || d >= num_out_rows)
      throw std::invalid_argument("edge_weighted_sum: index out of range");
    const double w = coef.empty() ? 1.0 : coef[e];
    const double* xs = &tx.v[static_cast<std::size_t>(s) * c];
    double* od = &out.v[static_cast<std::size_t>(d) * c];
    for (int j = 0; j < c; ++j) od[j] += w * xs[j];
  }
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, src = std::move(src), dst = std::move(dst),
                     coef = std::move(coef)](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      const int c = vx.cols();
      Tensor gx = Tensor::zeros(vx.rows(), c);
      for (std::size_t e = 0; e < src.size(); ++e) {
        const double w = coef.empty() ? 1.0 : coef[e];
        const double* gd = &g.v[static_cast<std::size_t>(dst[e]) * c];
        double* gs = &gx.v[static_cast<std::size_t>(src[e]) * c];
        for (int j = 0; j < c; ++j) gs[j] += w * gd[j];
      }
      t.accumulate(x, gx);
    };
  check_finite(id, "edge_weighted_sum");
  return id;
}

NodeId Tape::segment_mean(NodeId x, std::vector<int> index, int num_segments) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  if (static_cast<int>(index.size()) != r)
    throw std::invalid_argument("segment_mean: index length != row count");
  std::vector<int> count(num_segments, 0);
  for (int i = 0; i < r; ++i) {
    if (index[i] < 0 || index[i] >= num_segments)
      throw std::invalid_argument("segment_mean: index out of range");
    ++count[index[i]];
  }
  Tensor out = Tensor::zeros(num_segments, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.at(index[i], j) += tx.at(i, j);
  for (int s = 0; s < num_segments; ++s)
    if (count[s] > 0)
      for (int j = 0; j < c; ++j) out.at(s, j) /= count[s];
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, index = std::move(index), count = std::move(count)](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      const int r = vx.rows(), c = vx.cols();
      Tensor gx = vx;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) gx.at(i, j) = g.at(index[i], j) / count[index[i]];
      t.accumulate(x, gx);
    };
  check_finite(id, "segment_mean");
  return id;
}

NodeId Tape::gather_rows(NodeId x, std::vector<int> index) {
  const Tensor& tx = recs_[x].val;
  const int r = tx.rows(), c = tx.cols();
  Tensor out = Tensor::zeros(static_cast<int>(index.size()), c);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= r) throw std::invalid_argument("gather_rows: index out of range");
    for (int j = 0; j < c; ++j) out.at(static_cast<int>(i), j) = tx.at(index[i], j);
  }
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, index = std::move(index)](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      const int c = vx.cols();
      Tensor gx = Tensor::zeros(vx.rows(), c);
      for (std::size_t i = 0; i < index.size(); ++i)
        for (int j = 0; j < c; ++j) gx.at(index[i], j) += g.at(static_cast<int>(i), j);
      t.accumulate(x, gx);
    };
  check_finite(id, "gather_rows");
  return id;
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& ta = recs_[a].val;
  const Tensor& tb = recs_[b].val;
  if (ta.rows() != tb.rows()) shape_error("concat", ta, tb);
  const int r = ta.rows(), ca = ta.cols(), cb = tb.cols();
  Tensor out = Tensor::zeros(r, ca + cb);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < ca; ++j) out.at(i, j) = ta.at(i, j);
    for (int j = 0; j < cb; ++j) out.at(i, ca + j) = tb.at(i, j);
  }
  const bool ng = recs_[a].needs_grad || recs_[b].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [a, b, id](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& ta = t.recs_[a].val;
      const Tensor& tb = t.recs_[b].val;
      const int r = ta.rows(), ca = ta.cols(), cb = tb.cols();
      if (t.recs_[a].needs_grad) {
        Tensor ga = Tensor::zeros(r, ca);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < ca; ++j) ga.at(i, j) = g.at(i, j);
        t.accumulate(a, ga);
      }
      if (t.recs_[b].needs_grad) {
        Tensor gb = Tensor::zeros(r, cb);
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < cb; ++j) gb.at(i, j) = g.at(i, ca + j);
        t.accumulate(b, gb);
      }
    };
  check_finite(id, "concat");
  return id;
}

NodeId Tape::slice_col(NodeId x, int col) {
  const Tensor& tx = recs_[x].val;
  if (col < 0 || col >= tx.cols()) throw std::invalid_argument("slice_col: column out of range");
  const int r = tx.rows();
  Tensor out = Tensor::zeros(r, 1);
  for (int i = 0; i < r; ++i) out.v[i] = tx.at(i, col);
  const bool ng = recs_[x].needs_grad;
  NodeId id = push(std::move(out), ng, {});
  if (ng)
    recs_[id].vjp = [x, id, col](Tape& t) {
      const Tensor& g = t.recs_[id].grad;
      const Tensor& vx = t.recs_[x].val;
      Tensor gx = Tensor::zeros(vx.rows(), vx.cols());
      for (int i = 0; i < vx.rows(); ++i) gx.at(i, col) = g.v[i];
      t.accumulate(x, gx);
    };
  check_finite(id, "slice_col");
  return id;
}

void Tape::backward(NodeId root) {
  if (!recs_[root].val.is_scalar())
    throw std::invalid_argument("backward: root must be a scalar");
  for (Rec& r : recs_) {
    r.grad.shape.clear();
    r.grad.v.clear();
  }
  grad_ref(root).v[0] = 1.0;
  for (NodeId id = root; id >= 0; --id) {
    Rec& r = recs_[id];
    if (r.needs_grad && r.vjp && !r.grad.v.empty()) r.vjp(*this);
  }
}

}  // namespace gmdn
