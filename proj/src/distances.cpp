// Apache License, Version 2.0, refer to LICENSE.txt
#include "gmdn/distances.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gmdn {

thread_local std::uint64_t g_pair_term_count = 0;

namespace {

// N(x; mu, var) density
double normal_pdf(double x, double mu, double var) {
  const double d = x - mu;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * M_PI * var);
}

void check_same_c(const GaussianMixture1D& p, const GaussianMixture1D& q, const char* op) {
  if (p.components() != q.components())
    throw std::invalid_argument(std::string(op) + ": mixtures must have the same component count");
}

}  // namespace

void GaussianMixture1D::validate() const {
  if (weights.size() != mu.size() || weights.size() != sigma.size() || weights.empty())
    throw std::invalid_argument("GaussianMixture1D: inconsistent component arrays");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("GaussianMixture1D: negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("GaussianMixture1D: weights must sum to 1");
  for (double s : sigma)
    if (s <= 0.0) throw std::invalid_argument("GaussianMixture1D: sigma must be positive");
}

double GaussianMixture1D::pdf(double x) const {
  double acc = 0.0;
  for (int i = 0; i < components(); ++i)
    acc += weights[i] * normal_pdf(x, mu[i], sigma[i] * sigma[i]);
  return acc;
}

double l2_distance_sq(const GaussianMixture1D& p, const GaussianMixture1D& q) {
  // int N(x;a,va) N(x;b,vb) dx = N(a; b, va+vb); expand (p-q)^2 into the
  // three pairwise double sums
  auto cross = [](const GaussianMixture1D& a, const GaussianMixture1D& b) {
    double acc = 0.0;
    for (int i = 0; i < a.components(); ++i)
      for (int j = 0; j < b.components(); ++j) {
        ++g_pair_term_count;
        acc += a.weights[i] * b.weights[j] *
               normal_pdf(a.mu[i], b.mu[j], a.sigma[i] * a.sigma[i] + b.sigma[j] * b.sigma[j]);
      }
    return acc;
  };
  const double d = cross(p, p) - 2.0 * cross(p, q) + cross(q, q);
  return std::max(0.0, d);  // clamp tiny negative round-off
}

double gaussian_kl(double mu1, double sigma1, double mu2, double sigma2) {
  const double v1 = sigma1 * sigma1, v2 = sigma2 * sigma2;
  const double d = mu1 - mu2;
  return std::log(sigma2 / sigma1) + (v1 + d * d) / (2.0 * v2) - 0.5;
}

double gaussian_bhattacharyya(double mu1, double sigma1, double mu2, double sigma2) {
  const double v1 = sigma1 * sigma1, v2 = sigma2 * sigma2;
  const double d = mu1 - mu2;
  return 0.25 * d * d / (v1 + v2) + 0.5 * std::log((v1 + v2) / (2.0 * sigma1 * sigma2));
}

double jeffrey_weighted(const GaussianMixture1D& p, const GaussianMixture1D& q) {
  check_same_c(p, q, "jeffrey_weighted");
  double acc = 0.0;
  for (int i = 0; i < p.components(); ++i) {
    ++g_pair_term_count;
    acc += p.weights[i] * gaussian_kl(p.mu[i], p.sigma[i], q.mu[i], q.sigma[i]) +
           q.weights[i] * gaussian_kl(q.mu[i], q.sigma[i], p.mu[i], p.sigma[i]);
  }
  return 0.5 * acc;
}

double bhattacharyya_weighted(const GaussianMixture1D& p, const GaussianMixture1D& q) {
  check_same_c(p, q, "bhattacharyya_weighted");
  double acc = 0.0;
  for (int i = 0; i < p.components(); ++i) {
    ++g_pair_term_count;
    acc += 0.5 * (p.weights[i] + q.weights[i]) *
           gaussian_bhattacharyya(p.mu[i], p.sigma[i], q.mu[i], q.sigma[i]);
  }
  return acc;
}

double distance_to_probability(double d) {
  if (d < 0.0) throw std::invalid_argument("distance_to_probability: negative distance");
  return 1.0 / (1.0 + d);
}

namespace {

// trapezoid rule over [lo, hi]
template <typename F>
double trapezoid(F&& f, double lo, double hi, double step) {
  const long n = std::max(2L, static_cast<long>(std::ceil((hi - lo) / step)));
  const double h = (hi - lo) / static_cast<double>(n);
  double acc = 0.5 * (f(lo) + f(hi));
  for (long k = 1; k < n; ++k) acc += f(lo + h * static_cast<double>(k));
  return acc * h;
}

void support(const GaussianMixture1D& p, const GaussianMixture1D& q, double& lo, double& hi) {
  double min_mu = p.mu[0], max_mu = p.mu[0], max_sigma = p.sigma[0];
  for (int i = 0; i < p.components(); ++i) {
    min_mu = std::min(min_mu, p.mu[i]);
    max_mu = std::max(max_mu, p.mu[i]);
    max_sigma = std::max(max_sigma, p.sigma[i]);
  }
  for (int i = 0; i < q.components(); ++i) {
    min_mu = std::min(min_mu, q.mu[i]);
    max_mu = std::max(max_mu, q.mu[i]);
    max_sigma = std::max(max_sigma, q.sigma[i]);
  }
  lo = min_mu - 12.0 * max_sigma;
  hi = max_mu + 12.0 * max_sigma;
}

}  // namespace

double l2_distance_sq_quadrature(const GaussianMixture1D& p, const GaussianMixture1D& q,
                                 double step) {
  double lo, hi;
  support(p, q, lo, hi);
  return trapezoid(
      [&](double x) {
        const double d = p.pdf(x) - q.pdf(x);
        return d * d;
      },
      lo, hi, step);
}

double gaussian_kl_quadrature(double mu1, double sigma1, double mu2, double sigma2,
                              double step) {
  const double lo = mu1 - 14.0 * sigma1, hi = mu1 + 14.0 * sigma1;
  return trapezoid(
      [&](double x) {
        const double p = normal_pdf(x, mu1, sigma1 * sigma1);
        const double q = normal_pdf(x, mu2, sigma2 * sigma2);
        return p <= 0.0 ? 0.0 : p * std::log(p / q);
      },
      lo, hi, step);
}

double gaussian_bhattacharyya_quadrature(double mu1, double sigma1, double mu2, double sigma2,
                                         double step) {
  const double lo = std::min(mu1 - 14.0 * sigma1, mu2 - 14.0 * sigma2);
  const double hi = std::max(mu1 + 14.0 * sigma1, mu2 + 14.0 * sigma2);
  const double bc = trapezoid(
      [&](double x) {
        return std::sqrt(normal_pdf(x, mu1, sigma1 * sigma1) * normal_pdf(x, mu2, sigma2 * sigma2));
      },
      lo, hi, step);
  return -std::log(bc);
}

double reconstruction_loss(const std::vector<double>& distances, const std::vector<int>& labels) {
  if (distances.size() != labels.size() || distances.empty())
    throw std::invalid_argument("reconstruction_loss: misaligned inputs");
  double acc = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    const double target = labels[i] == 1 ? 0.0 : 2.0;
    acc += std::abs(distances[i] - target);
  }
  return acc / static_cast<double>(distances.size());
}

}  // namespace gmdn
