// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmdn {

double log_sum_exp(const std::vector<double>& xs) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double x : xs) mx = std::max(mx, x);
  if (!std::isfinite(mx)) return mx;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - mx);
  return mx + std::log(sum);
}

double log_binomial_pmf(int trials, int y, double p) {
  if (y < 0 || y > trials) throw std::invalid_argument("binomial target out of support");
  const double pc = std::clamp(p, kPFloor, 1.0 - kPFloor);
  const double log_comb = std::lgamma(trials + 1.0) - std::lgamma(y + 1.0) -
                          std::lgamma(trials - y + 1.0);
  return log_comb + y * std::log(pc) + (trials - y) * std::log1p(-pc);
}

double log_gaussian_pdf(double y, double mu, double sigma) {
  const double s = std::max(sigma, kSigmaFloor);
  const double z = (y - mu) / s;
  return -0.5 * z * z - std::log(s) - 0.5 * std::log(2.0 * M_PI);
}

double mixture_log_likelihood(const MixtureOutput& out, double y) {
  const std::size_t c = out.weights.size();
  std::vector<double> terms(c);
  for (std::size_t i = 0; i < c; ++i) {
    const double lw = std::log(std::max(out.weights[i], kWeightFloor));
    double lp;
    if (out.family == Family::binomial) {
      const double yi = y;
      if (yi != std::floor(yi)) throw std::invalid_argument("binomial target must be integral");
      lp = log_binomial_pmf(out.trials, static_cast<int>(yi), out.p[i]);
    } else {
      lp = log_gaussian_pdf(y, out.mu[i], out.sigma[i]);
    }
    terms[i] = lw + lp;
  }
  return log_sum_exp(terms);
}

double dirichlet_log_normalizer(const DirichletPrior& prior) {
  double sum_alpha = 0.0, sum_lg = 0.0;
  for (double a : prior.alpha) {
    if (a <= 0.0) throw std::invalid_argument("Dirichlet alpha must be positive");
    sum_alpha += a;
    sum_lg += std::lgamma(a);
  }
  return std::lgamma(sum_alpha) - sum_lg;
}

double dirichlet_log_density(const std::vector<double>& weights, const DirichletPrior& prior) {
  if (weights.size() != prior.alpha.size())
    throw std::invalid_argument("dirichlet_log_density: dimension mismatch");
  double acc = dirichlet_log_normalizer(prior);
  for (std::size_t i = 0; i < weights.size(); ++i)
    acc += (prior.alpha[i] - 1.0) * std::log(std::max(weights[i], kWeightFloor));
  return acc;
}

}  // namespace gmdn
