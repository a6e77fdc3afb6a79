// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <vector>

namespace gmdn {

// Numeric guards for emission parameters and mixing weights.
constexpr double kPFloor = 1e-6;
constexpr double kSigmaFloor = 1e-3;
constexpr double kWeightFloor = 1e-12;

enum class Family { binomial, gaussian };

// Mixture for one sample: weights on the simplex plus per-component
// parameters. Binomial components use (p, trials); Gaussian use (mu, sigma).
struct MixtureOutput {
  Family family = Family::binomial;
  std::vector<double> weights;
  std::vector<double> p;      // binomial success probabilities
  int trials = 0;             // binomial trial count (graph size)
  std::vector<double> mu;     // gaussian means
  std::vector<double> sigma;  // gaussian stddevs
};

struct DirichletPrior {
  std::vector<double> alpha;
};

double log_binomial_pmf(int trials, int y, double p);
double log_gaussian_pdf(double y, double mu, double sigma);

// log sum_i w_i pdf_i(y) via log-sum-exp. Throws if y is outside the
// binomial support.
double mixture_log_likelihood(const MixtureOutput& out, double y);

// log Dirichlet density including the log normalizer; weights are floored
// at kWeightFloor before the log.
double dirichlet_log_density(const std::vector<double>& weights, const DirichletPrior& prior);
double dirichlet_log_normalizer(const DirichletPrior& prior);

double log_sum_exp(const std::vector<double>& xs);

}  // namespace gmdn
