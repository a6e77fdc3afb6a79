// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gmdn/tensor.hpp"

namespace gmdn {

using NodeId = int;

// Reverse-mode tape. Records are appended in topological order; backward()
// walks them once in reverse, applying each op's vector-Jacobian product.
//
// add/sub/mul/div broadcast over scalars, row vectors (1 x c) and column
// vectors (r x 1) on either side.
class Tape {
 public:
  NodeId constant(Tensor t);
  NodeId param(Tensor t);  // leaf that receives a gradient

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);

  NodeId relu(NodeId x);
  NodeId sigmoid(NodeId x);
  NodeId tanh_(NodeId x);
  NodeId exp_(NodeId x);
  NodeId log_(NodeId x);
  NodeId sqrt_(NodeId x);
  NodeId softplus(NodeId x);
  NodeId abs_(NodeId x);
  NodeId affine(NodeId x, double scale, double shift);  // scale*x + shift

  NodeId softmax_rows(NodeId x);
  NodeId log_softmax_rows(NodeId x);
  NodeId logsumexp_rows(NodeId x);  // (r x c) -> (r x 1)

  NodeId sum_all(NodeId x);   // -> scalar
  NodeId sum_rows(NodeId x);  // (r x c) -> (r x 1)

  NodeId segment_sum(NodeId x, std::vector<int> index, int num_segments);
  // fused gather_rows + segment_sum with optional per-edge coefficients:
  // out[dst[e]] += coef[e] * x[src[e]]
  NodeId edge_weighted_sum(NodeId x, std::vector<int> src, std::vector<int> dst,
                           std::vector<double> coef, int num_out_rows);
  NodeId segment_mean(NodeId x, std::vector<int> index, int num_segments);
  NodeId gather_rows(NodeId x, std::vector<int> index);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId slice_col(NodeId x, int col);

  // Zeroes gradients, seeds d(root)/d(root) = 1 and runs all VJPs.
  // root must be a scalar.
  void backward(NodeId root);

  const Tensor& val(NodeId id) const { return recs_[id].val; }
  const Tensor& grad(NodeId id) const { return recs_[id].grad; }
  std::size_t num_records() const { return recs_.size(); }

 private:
  struct Rec {
    Tensor val;
    Tensor grad;  // allocated during backward
    bool needs_grad = false;
    std::function<void(Tape&)> vjp;  // empty for leaves
  };

  using BinFn = double (*)(double, double);
  using UnFn = double (*)(double);

  NodeId push(Tensor val, bool needs_grad, std::function<void(Tape&)> vjp);
  NodeId binary(NodeId a, NodeId b, const char* name, BinFn f, BinFn dfa, BinFn dfb);
  // dfdx receives (input, output) so e.g. sigmoid can reuse its forward value
  NodeId unary(NodeId x, const char* name, UnFn f, BinFn dfdx);
  void check_finite(NodeId id, const char* op) const;
  Tensor& grad_ref(NodeId id);
  void accumulate(NodeId input, const Tensor& g);  // reduces over broadcast dims

  std::vector<Rec> recs_;
};

}  // namespace gmdn
