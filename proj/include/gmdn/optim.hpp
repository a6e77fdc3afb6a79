// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gmdn/rng.hpp"
#include "gmdn/tensor.hpp"

namespace gmdn {

// Named parameter tensors with per-parameter Adam moments. std::map keeps
// iteration order deterministic.
struct ParamStore {
  struct Entry {
    Tensor value;
    Tensor m;  // first moment
    Tensor v;  // second moment
  };

  std::map<std::string, Entry> entries;
  long step = 0;

  Tensor& add(const std::string& name, Tensor init);
  bool has(const std::string& name) const { return entries.count(name) > 0; }
  Tensor& value(const std::string& name) { return entries.at(name).value; }
  const Tensor& value(const std::string& name) const { return entries.at(name).value; }

  // uniform fan-in init: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  Tensor& add_linear(const std::string& name, int fan_in, int fan_out, Rng& rng);

  std::vector<double> flatten() const;
  void unflatten(const std::vector<double>& flat);
  std::uint64_t checksum() const;  // over parameter bytes, for snapshot tests
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam descent step with bias correction. Gradients map by name;
// missing names are treated as zero gradient. Throws on non-finite grads.
void adam_step(ParamStore& store, const std::map<std::string, Tensor>& grads,
               const AdamConfig& cfg);

// Central finite differences of f() w.r.t. every parameter in store,
// compared against the supplied analytic gradients. Returns the max relative
// error with denominator max(|a|,|b|,1e-8).
double finite_diff_check(ParamStore& store, const std::function<double()>& f,
                         const std::map<std::string, Tensor>& analytic, double eps);

}  // namespace gmdn
