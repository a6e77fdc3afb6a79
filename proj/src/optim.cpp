// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/optim.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace gmdn {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (has(name)) throw std::invalid_argument("duplicate parameter name: " + name);
  Entry e;
  e.m = init;
  e.v = init;
  for (double& x : e.m.v) x = 0.0;
  for (double& x : e.v.v) x = 0.0;
  e.value = std::move(init);
  return entries.emplace(name, std::move(e)).first->second.value;
}

Tensor& ParamStore::add_linear(const std::string& name, int fan_in, int fan_out, Rng& rng) {
  Tensor w = Tensor::zeros(fan_in, fan_out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : w.v) x = rng.uniform(-bound, bound);
  return add(name, std::move(w));
}

std::vector<double> ParamStore::flatten() const {
  std::vector<double> flat;
  for (const auto& [name, e] : entries) flat.insert(flat.end(), e.value.v.begin(), e.value.v.end());
  return flat;
}

void ParamStore::unflatten(const std::vector<double>& flat) {
  std::size_t pos = 0;
  for (auto& [name, e] : entries) {
    if (pos + e.value.v.size() > flat.size())
      throw std::invalid_argument("unflatten: size mismatch");
    std::copy(flat.begin() + pos, flat.begin() + pos + e.value.v.size(), e.value.v.begin());
    pos += e.value.v.size();
  }
  if (pos != flat.size()) throw std::invalid_argument("unflatten: size mismatch");
}

std::uint64_t ParamStore::checksum() const {
  // FNV-1a over the raw parameter bytes
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [name, e] : entries)
    for (double d : e.value.v) {
      std::uint64_t bits;
      std::memcpy(&bits, &d, sizeof bits);
      for (int k = 0; k < 8; ++k) {
        h ^= (bits >> (8 * k)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    }
  return h;
}

void adam_step(ParamStore& store, const std::map<std::string, Tensor>& grads,
               const AdamConfig& cfg) {
  ++store.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(store.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(store.step));
  for (auto& [name, e] : store.entries) {
    auto it = grads.find(name);
    const Tensor* g = it == grads.end() ? nullptr : &it->second;
    if (g && !g->v.empty() && g->shape != e.value.shape)
      throw std::invalid_argument("adam_step: gradient shape mismatch for " + name);
    for (std::size_t i = 0; i < e.value.v.size(); ++i) {
      const double gi = (g && !g->v.empty()) ? g->v[i] : 0.0;
      if (!std::isfinite(gi))
        throw std::runtime_error("adam_step: non-finite gradient for " + name);
      e.m.v[i] = cfg.beta1 * e.m.v[i] + (1.0 - cfg.beta1) * gi;
      e.v.v[i] = cfg.beta2 * e.v.v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = e.m.v[i] / bc1;
      const double vhat = e.v.v[i] / bc2;
      e.value.v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

double finite_diff_check(ParamStore& store, const std::function<double()>& f,
                         const std::map<std::string, Tensor>& analytic, double eps) {
  if (eps < 1e-7 || eps > 1e-3) throw std::invalid_argument("finite_diff_check: eps out of range");
  double max_rel = 0.0;
  for (auto& [name, e] : store.entries) {
    auto it = analytic.find(name);
    for (std::size_t i = 0; i < e.value.v.size(); ++i) {
      const double orig = e.value.v[i];
      e.value.v[i] = orig + eps;
      const double fp = f();
      e.value.v[i] = orig - eps;
      const double fm = f();
      e.value.v[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double exact =
          (it != analytic.end() && !it->second.v.empty()) ? it->second.v[i] : 0.0;
      const double denom = std::max({std::abs(numeric), std::abs(exact), 1e-8});
      max_rel = std::max(max_rel, std::abs(numeric - exact) / denom);
    }
  }
  return max_rel;
}

}  // namespace gmdn
