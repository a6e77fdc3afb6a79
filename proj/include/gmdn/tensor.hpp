// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace gmdn {

// Dense row-major tensor of doubles. Rank 0 (scalar), 1 (column) and 2
// (matrix) are the shapes the op catalog produces.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;

  static Tensor scalar(double x) {
    Tensor t;
    t.v = {x};
    return t;
  }
  static Tensor zeros(int r, int c) {
    Tensor t;
    t.shape = {r, c};
    t.v.assign(static_cast<std::size_t>(r) * c, 0.0);
    return t;
  }
  static Tensor from_rows(int r, int c, std::vector<double> data) {
    Tensor t;
    t.shape = {r, c};
    if (data.size() != static_cast<std::size_t>(r) * c)
      throw std::invalid_argument("tensor data size does not match shape");
    t.v = std::move(data);
    return t;
  }
  static Tensor column(std::vector<double> data) {
    const int n = static_cast<int>(data.size());  // before the move
    return from_rows(n, 1, std::move(data));
  }
  static Tensor row(std::vector<double> data) {
    const int n = static_cast<int>(data.size());
    return from_rows(1, n, std::move(data));
  }

  bool is_scalar() const { return shape.empty(); }
  int rows() const { return is_scalar() ? 1 : shape[0]; }
  int cols() const { return is_scalar() ? 1 : (shape.size() > 1 ? shape[1] : 1); }
  std::size_t size() const { return v.size(); }

  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  std::string shape_str() const;
};

}  // namespace gmdn
