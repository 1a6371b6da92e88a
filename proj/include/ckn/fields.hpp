#pragma once

// Conformal-Killing analysis: deficit tensor, conformal factor, homothety
// classification, and pointwise verification of the divergence identity
// div(h/|h|^k) = ((n-k)/2) mu / |h|^k and the companion contraction identity
// h_j h^k nabla_k h^j = (mu/2) |h|^2.

#include "ckn/geometry.hpp"

#include <algorithm>

namespace ckn {

// Sampling points with |h| below this fraction of the chart diameter are
// excised: the k > 0 identity only holds away from zeros of h.
inline constexpr double kZeroExcisionFrac = 1e-8;
// Deficit normalization keeps the conformality verdict scale invariant in
// both the field and the metric.
inline constexpr double kDeficitNormEps = 1e-30;
// mu counts as constant (homothety) when its spread is below this band.
inline constexpr double kHomothetyBand = 1e-8;

struct ConformalReport {
  double max_deficit = 0.0;  // sup over grid of normalized deficit Frobenius norm
  double mu_min = 0.0;
  double mu_max = 0.0;
  double div_h_min = 0.0;
  bool is_conformal = false;
  bool is_homothety = false;
  double tol = 0.0;
  int grid_resolution = 0;
  std::size_t points_sampled = 0;
  std::size_t points_excised = 0;
};

inline double conformal_factor(const ManifoldChart& chart, const FieldSpec& field, const Vec& x) {
  return (2.0 / chart.n) * covariant_divergence(chart, field, x);
}

// K^{ij} = nabla^i h^j + nabla^j h^i - (2/n)(div h) g^{ij}; traceless by
// construction for any field, zero exactly for conformal Killing fields.
inline SymTensor2Up conformal_deficit(const ManifoldChart& chart, const FieldSpec& field,
                                      const Vec& x) {
  const int n = chart.n;
  const Mat dup = covariant_deriv_up(chart, field, x);
  double trace = 0.0;
  {
    const Mat g = chart.metric(x);
    trace = (g * dup).trace();  // g_ij nabla^i h^j = div h
  }
  const double mu = (2.0 / n) * trace;
  const Mat ginv = inverse_metric(chart, x);
  SymTensor2Up k;
  k.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) k.set(i, j, dup(i, j) + dup(j, i) - mu * ginv(i, j));
  return k;
}

// Normalized residual of the conformal Killing condition at one point.
inline double normalized_deficit(const ManifoldChart& chart, const FieldSpec& field, const Vec& x) {
  const SymTensor2Up k = conformal_deficit(chart, field, x);
  const Mat ginv = inverse_metric(chart, x);
  const double hn = field_norm(chart, field, x);
  return k.frobenius_norm() / ((hn + kDeficitNormEps) * ginv.norm());
}

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double abs_err = 0.0;
};

// Divergence identity for the rescaled field h/|h|^k, all derivatives taken
// analytically through the chain rule (density form, no Christoffel symbols):
//   div(w h) = w div h - (k/2) |h|^{-k-2} h^i d_i(|h|^2),   w = |h|^{-k}
//   d_i(|h|^2) = (d_i g_ab) h^a h^b + 2 g_ab h^b d_i h^a
inline IdentityCheck lemma_divergence_check(const ManifoldChart& chart, const FieldSpec& field,
                                            double k, const Vec& x) {
  const int n = chart.n;
  const double rho = field_norm(chart, field, x);
  const double threshold = kZeroExcisionFrac * chart.domain.diameter();
  if (k > 0.0 && rho < threshold)
    throw TooCloseToZeroSet("lemma_divergence_check: |h| below excision threshold with k > 0");

  const Vec h = field.components(x);
  const Mat jac = field.jacobian(x);
  const Mat g = chart.metric(x);
  const MetricDerivs dg = chart.metric_jacobian(x);
  const double div_h = covariant_divergence(chart, field, x);

  const Vec gh = g * h;
  Vec grad_rho2(n);
  for (int i = 0; i < n; ++i) {
    double v = h.dot(dg[i] * h);
    for (int a = 0; a < n; ++a) v += 2.0 * gh[a] * jac(a, i);
    grad_rho2[i] = v;
  }

  const double w = std::pow(rho, -k);
  double lhs = w * div_h;
  if (rho > 0.0) {
    lhs += -0.5 * k * std::pow(rho, -k - 2.0) * h.dot(grad_rho2);
  }
  const double mu = (2.0 / n) * div_h;
  const double rhs = 0.5 * (n - k) * mu * w;
  return {lhs, rhs, std::abs(lhs - rhs)};
}

// Contraction identity h_j h^k nabla_k h^j = (mu/2) |h|^2.
inline IdentityCheck radial_identity_check(const ManifoldChart& chart, const FieldSpec& field,
                                           const Vec& x) {
  const int n = chart.n;
  const Vec h = field.components(x);
  const Mat jac = field.jacobian(x);
  const Mat g = chart.metric(x);
  const ChristoffelSymbols c = christoffel(chart, x);
  const Vec gh = g * h;

  double lhs = 0.0;
  for (int j = 0; j < n; ++j) {
    double nab = 0.0;  // h^k nabla_k h^j
    for (int k = 0; k < n; ++k) {
      double v = jac(j, k);
      for (int l = 0; l < n; ++l) v += c[j](k, l) * h[l];
      nab += h[k] * v;
    }
    lhs += gh[j] * nab;
  }
  const double mu = conformal_factor(chart, field, x);
  const double rho = field_norm(chart, field, x);
  const double rhs = 0.5 * mu * rho * rho;
  return {lhs, rhs, std::abs(lhs - rhs)};
}

// Samples the deficit and the conformal factor on a tensor grid over the
// chart box minus the zero-set excision, and classifies the field.
inline ConformalReport classify(const ManifoldChart& chart, const FieldSpec& field,
                                int grid_resolution, double tol, int threads = 1) {
  if (grid_resolution < 3) throw ParameterOutOfRange("classify: grid_resolution must be >= 3");
  const int n = chart.n;
  const double threshold = kZeroExcisionFrac * chart.domain.diameter();

  std::size_t total = 1;
  for (int i = 0; i < n; ++i) total *= static_cast<std::size_t>(grid_resolution);

  struct Partial {
    double max_deficit = 0.0;
    double mu_min = std::numeric_limits<double>::infinity();
    double mu_max = -std::numeric_limits<double>::infinity();
    double div_min = std::numeric_limits<double>::infinity();
    std::size_t excised = 0;
  };
  const int workers = std::max(1, threads);
  std::vector<Partial> partials(static_cast<std::size_t>(workers));

  auto point_at = [&](std::size_t flat) {
    Vec x(n);
    for (int i = 0; i < n; ++i) {
      const auto idx = flat % static_cast<std::size_t>(grid_resolution);
      flat /= static_cast<std::size_t>(grid_resolution);
      x[i] = chart.domain.lo[i] +
             (chart.domain.hi[i] - chart.domain.lo[i]) * static_cast<double>(idx) /
                 static_cast<double>(grid_resolution - 1);
    }
    return x;
  };

  parallel_for_index(total, workers, [&](std::size_t flat) {
    const std::size_t w = flat % static_cast<std::size_t>(workers);
    Partial& p = partials[w];
    const Vec x = point_at(flat);
    const double hn = field_norm(chart, field, x);
    if (hn < threshold) {
      ++p.excised;
      return;
    }
    p.max_deficit = std::max(p.max_deficit, normalized_deficit(chart, field, x));
    const double mu = conformal_factor(chart, field, x);
    p.mu_min = std::min(p.mu_min, mu);
    p.mu_max = std::max(p.mu_max, mu);
    p.div_min = std::min(p.div_min, covariant_divergence(chart, field, x));
  });

  Partial all;
  for (const Partial& p : partials) {
    all.max_deficit = std::max(all.max_deficit, p.max_deficit);
    all.mu_min = std::min(all.mu_min, p.mu_min);
    all.mu_max = std::max(all.mu_max, p.mu_max);
    all.div_min = std::min(all.div_min, p.div_min);
    all.excised += p.excised;
  }

  ConformalReport rep;
  rep.max_deficit = all.max_deficit;
  rep.mu_min = all.mu_min;
  rep.mu_max = all.mu_max;
  rep.div_h_min = all.div_min;
  rep.tol = tol;
  rep.grid_resolution = grid_resolution;
  rep.points_sampled = total - all.excised;
  rep.points_excised = all.excised;
  rep.is_conformal = rep.max_deficit <= tol;
  rep.is_homothety =
      rep.is_conformal && (rep.mu_max - rep.mu_min) <= kHomothetyBand * std::max(1.0, std::abs(rep.mu_max));
  return rep;
}

}  // namespace ckn
