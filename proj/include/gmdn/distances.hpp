// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstdint>
#include <vector>

namespace gmdn {

struct GaussianMixture1D {
  std::vector<double> weights;  // simplex
  std::vector<double> mu;
  std::vector<double> sigma;  // > 0

  int components() const { return static_cast<int>(weights.size()); }
  void validate() const;
  double pdf(double x) const;
};

// Counts Gaussian-pair terms evaluated by the closed-form distances, so cost
// scaling (C^2 for L2, C for the component-paired divergences) is testable.
extern thread_local std::uint64_t g_pair_term_count;

// Closed-form squared L2 distance between the mixture pdfs, via pairwise
// Gaussian overlap integrals.
double l2_distance_sq(const GaussianMixture1D& p, const GaussianMixture1D& q);

// Component-paired Jeffrey divergence weighted by the mixing coefficients:
// 0.5 * sum_i w_i^P KL(P_i||Q_i) + w_i^Q KL(Q_i||P_i). Requires equal C.
double jeffrey_weighted(const GaussianMixture1D& p, const GaussianMixture1D& q);

// Component-paired Bhattacharyya divergence with averaged weights
// 0.5*(w_i^P + w_i^Q). Requires equal C.
double bhattacharyya_weighted(const GaussianMixture1D& p, const GaussianMixture1D& q);

double gaussian_kl(double mu1, double sigma1, double mu2, double sigma2);
double gaussian_bhattacharyya(double mu1, double sigma1, double mu2, double sigma2);

double distance_to_probability(double d);  // 1/(1+d), d >= 0

// Trapezoid-rule oracle for int (p(x)-q(x))^2 dx over
// [min mu - 12 max sigma, max mu + 12 max sigma].
double l2_distance_sq_quadrature(const GaussianMixture1D& p, const GaussianMixture1D& q,
                                 double step = 1e-3);
// Quadrature estimates for single-Gaussian KL and Bhattacharyya, used as
// independent checks of the closed forms.
double gaussian_kl_quadrature(double mu1, double sigma1, double mu2, double sigma2,
                              double step = 1e-4);
double gaussian_bhattacharyya_quadrature(double mu1, double sigma1, double mu2, double sigma2,
                                         double step = 1e-4);

// Mean L1 loss against target distance 0 (label 1) / 2 (label 0).
double reconstruction_loss(const std::vector<double>& distances, const std::vector<int>& labels);

}  // namespace gmdn
