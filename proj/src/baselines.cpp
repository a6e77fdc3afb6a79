// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace gmdn {

double rand_loglik(int n) {
  if (n < 1) throw std::invalid_argument("rand_loglik: n must be >= 1");
  return -std::log(static_cast<double>(n));
}

double HistModel::loglik(int y) const {
  if (y < 0 || y >= static_cast<int>(probs.size()))
    throw std::invalid_argument("hist_loglik: target out of range");
  return std::log(probs[y]);
}

HistModel hist_fit(const std::vector<int>& targets, int n, double floor_mass) {
  if (n < 0) throw std::invalid_argument("hist_fit: n must be >= 0");
  HistModel m;
  m.probs.assign(n + 1, floor_mass);
  for (int y : targets) {
    if (y < 0 || y > n) throw std::invalid_argument("hist_fit: target out of range");
    m.probs[y] += 1.0;
  }
  const double z = targets.size() + (n + 1) * floor_mass;
  for (double& p : m.probs) p /= z;
  return m;
}

ModelConfig mdn_config(int components, int layers, int hidden, std::vector<double> alpha) {
  ModelConfig cfg;
  cfg.conv = ConvKind::dense;
  cfg.layers = layers;
  cfg.hidden = hidden;
  cfg.components = components;
  cfg.family = Family::binomial;
  cfg.alpha = std::move(alpha);
  cfg.input_dim = 5;
  return cfg;
}

ModelConfig unimodal_dgn_config(int layers, int hidden) {
  ModelConfig cfg;
  cfg.conv = ConvKind::gin;
  cfg.layers = layers;
  cfg.hidden = hidden;
  cfg.components = 1;
  cfg.family = Family::binomial;
  cfg.input_dim = 5;
  return cfg;
}

}  // namespace gmdn
