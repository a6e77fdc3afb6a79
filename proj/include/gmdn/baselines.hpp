// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <vector>

#include "gmdn/model.hpp"
#include "gmdn/sir.hpp"

namespace gmdn {

// Uniform predictor over 0..n-1 outcomes: per-sample log-lik = ln(1/n).
double rand_loglik(int n);

// Normalized frequency histogram over targets 0..n with add-floor smoothing
// so unseen targets stay finite.
struct HistModel {
  std::vector<double> probs;  // length n+1, sums to 1

  double loglik(int y) const;
};

HistModel hist_fit(const std::vector<int>& targets, int n, double floor_mass = 1e-9);

// Structure-blind MDN: mixture head on a dense encoding of the record
// summary [beta, gamma, R0, 1, fraction initially infected].
ModelConfig mdn_config(int components, int layers, int hidden, std::vector<double> alpha);

// Unimodal DGN: the full graph model with a single component.
ModelConfig unimodal_dgn_config(int layers, int hidden);

}  // namespace gmdn
