#pragma once

// Built-in (chart, field) pairs with closed-form metrics, hand-derived
// jacobians and known classification. These are the ground-truth fixtures for
// every other module.
//
//   euclidean       R^n with the dilation field h = x (homothety, mu = 2)
//   cone            2d cone metric diag(1, lambda^2 r^2), h = r d/dr
//                   (homothety, mu = 2, non-flat for lambda != 1)
//   conformal_flat  g = e^{2 phi(|x|^2)} delta with phi = kappa s e^{-s},
//                   h = x (conformal, mu varies, div h > 0 for small kappa)
//   hemisphere      round sphere in a stereographic polar-cap chart,
//                   g = (2/(1+|y|^2))^2 delta, h = y (conformal, mu varies)
//
// A planted non-conformal control, h = (x1^2, 0, ...), is available as
// "euclidean_nonconformal".

#include "ckn/fields.hpp"

#include <optional>

namespace ckn {

struct ExpectedFacts {
  bool is_conformal = false;
  bool is_homothety = false;
  double mu_min = 0.0;
  double mu_max = 0.0;
  bool div_h_positive = false;
};

// 1D reduction for homothety entries whose geometry is radial in |h| = r:
// integral of f(|h|) dV = angular_measure * integral of f(r) r^radial_exponent dr.
struct RadialReduction {
  double angular_measure = 0.0;
  double radial_exponent = 0.0;
  double div_h = 0.0;  // constant covariant divergence
  double r_min = 0.0;
  double r_max = 0.0;
};

struct CatalogEntry {
  std::string name;
  ManifoldChart chart;
  FieldSpec field;
  ExpectedFacts expected;
  std::string notes;
  std::optional<RadialReduction> radial;
};

inline CatalogEntry euclidean_dilation(int n, double box_half_width = 2.0) {
  if (n < kMinDim || n > kMaxDim)
    throw ParameterOutOfRange("euclidean_dilation: n must be in [2, 4]");
  if (!(box_half_width > 0.0))
    throw ParameterOutOfRange("euclidean_dilation: box_half_width must be > 0");

  CatalogEntry e;
  e.name = "euclidean";
  e.chart.n = n;
  e.chart.domain = centered_cube(n, box_half_width);
  e.chart.label = "euclidean_n" + std::to_string(n);
  e.chart.metric = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  e.chart.metric_jacobian = [n](const Vec&) { return MetricDerivs::zero(n); };

  e.field.n = n;
  e.field.label = "dilation";
  e.field.components = [](const Vec& x) { return x; };
  e.field.jacobian = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  e.field.zero_set.points.push_back(Vec::Zero(n));
  e.field.level_box = [n](double, double rho_hi) { return centered_cube(n, rho_hi); };

  e.expected = {true, true, 2.0, 2.0, true};
  e.notes = "flat metric, dilation field; div h = n, mu = 2";
  e.radial = RadialReduction{unit_sphere_area(n), static_cast<double>(n - 1),
                             static_cast<double>(n), 0.0, box_half_width};
  return e;
}

inline CatalogEntry cone(double lambda = 0.8, double r_min = 0.5, double r_max = 4.0,
                         double theta_max = 2.0 * std::numbers::pi) {
  if (!(lambda > 0.0) || lambda == 1.0)
    throw ParameterOutOfRange("cone: lambda must be > 0 and != 1 (1 is flat polar coordinates)");
  if (!(0.0 < r_min && r_min < r_max))
    throw ParameterOutOfRange("cone: need 0 < r_min < r_max");
  if (!(theta_max > 0.0)) throw ParameterOutOfRange("cone: theta_max must be > 0");

  CatalogEntry e;
  e.name = "cone";
  e.chart.n = 2;
  e.chart.domain = make_box({r_min, 0.0}, {r_max, theta_max});
  e.chart.label = "cone_lambda" + std::to_string(lambda);
  const double l2 = lambda * lambda;
  e.chart.metric = [l2](const Vec& x) {
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = 1.0;
    g(1, 1) = l2 * x[0] * x[0];
    return g;
  };
  e.chart.metric_jacobian = [l2](const Vec& x) {
    MetricDerivs d = MetricDerivs::zero(2);
    d[0](1, 1) = 2.0 * l2 * x[0];
    return d;
  };

  e.field.n = 2;
  e.field.label = "radial_scaling";
  e.field.components = [](const Vec& x) {
    Vec h(2);
    h[0] = x[0];
    h[1] = 0.0;
    return h;
  };
  e.field.jacobian = [](const Vec&) {
    Mat j = Mat::Zero(2, 2);
    j(0, 0) = 1.0;
    return j;
  };
  e.field.zero_set.origin_ray = true;  // |h| = r -> 0 only at the apex, outside the chart
  e.field.level_box = [theta_max](double rho_lo, double rho_hi) {
    return make_box({rho_lo, 0.0}, {rho_hi, theta_max});
  };

  e.expected = {true, true, 2.0, 2.0, true};
  e.notes = "cone of total angle 2*pi*lambda (theta periodic); div h = 2, mu = 2";
  e.radial = RadialReduction{lambda * theta_max, 1.0, 2.0, r_min, r_max};
  return e;
}

inline CatalogEntry conformal_flat(double kappa = 0.1, int n = 3, double box_half_width = 2.0) {
  if (n < kMinDim || n > kMaxDim) throw ParameterOutOfRange("conformal_flat: n must be in [2, 4]");
  CatalogEntry e;
  e.name = "conformal_flat";
  e.chart.n = n;
  e.chart.domain = centered_cube(n, box_half_width);
  e.chart.label = "conformal_flat_kappa" + std::to_string(kappa);

  // phi(s) = kappa s e^{-s} with s = |x|^2; smooth everywhere, no log terms.
  auto phi = [kappa](double s) { return kappa * s * std::exp(-s); };
  auto dphi_ds = [kappa](double s) { return kappa * (1.0 - s) * std::exp(-s); };

  e.chart.metric = [n, phi](const Vec& x) {
    const double s = x.squaredNorm();
    return Mat(std::exp(2.0 * phi(s)) * Mat::Identity(n, n));
  };
  e.chart.metric_jacobian = [n, phi, dphi_ds](const Vec& x) {
    const double s = x.squaredNorm();
    const double factor = 2.0 * std::exp(2.0 * phi(s)) * dphi_ds(s) * 2.0;  // d_k e^{2phi} = this * x_k
    MetricDerivs d = MetricDerivs::zero(n);
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) d[k](i, i) = factor * x[k];
    }
    return d;
  };

  e.field.n = n;
  e.field.label = "dilation";
  e.field.components = [](const Vec& x) { return x; };
  e.field.jacobian = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  e.field.zero_set.points.push_back(Vec::Zero(n));
  e.field.level_box = [n, kappa](double, double rho_hi) {
    // |h| = e^{phi}|x| and phi >= min(0, kappa/e), so |x| <= rho_hi e^{-min(0, kappa/e)}
    const double bound = rho_hi * std::exp(std::max(0.0, -kappa) / std::numbers::e);
    return centered_cube(n, bound);
  };

  // mu(x) = 2 + 4 kappa s (1-s) e^{-s}; scan s over the box range for extremes.
  const double s_max = n * box_half_width * box_half_width;
  double mu_lo = 2.0, mu_hi = 2.0;
  for (int i = 0; i <= 4096; ++i) {
    const double s = s_max * i / 4096.0;
    const double mu = 2.0 + 4.0 * kappa * s * (1.0 - s) * std::exp(-s);
    mu_lo = std::min(mu_lo, mu);
    mu_hi = std::max(mu_hi, mu);
  }
  if (!(0.5 * n * mu_lo > 0.0))
    throw ParameterOutOfRange("conformal_flat: div h not positive on the box; reduce |kappa|");

  e.expected = {true, kappa == 0.0, mu_lo, mu_hi, true};
  e.notes = "radial conformal factor; dilation field stays conformal, mu varies";
  return e;
}

inline CatalogEntry hemisphere(int n = 2, double cap_angle = 1.2) {
  if (n < kMinDim || n > 3) throw ParameterOutOfRange("hemisphere: n must be 2 or 3");
  if (!(0.0 < cap_angle && cap_angle < 0.5 * std::numbers::pi))
    throw ParameterOutOfRange("hemisphere: cap_angle must be in (0, pi/2)");

  // Stereographic coordinates from the south pole: the unit sphere's polar
  // cap of angle `cap_angle` is |y| < tan(cap_angle / 2); the chart box is
  // the inscribed cube. The gradient field of the height function is h = y.
  const double y_max = std::tan(0.5 * cap_angle);
  const double c = y_max / std::sqrt(static_cast<double>(n));

  CatalogEntry e;
  e.name = "hemisphere";
  e.chart.n = n;
  e.chart.domain = centered_cube(n, c);
  e.chart.label = "hemisphere_cap" + std::to_string(cap_angle);
  e.chart.metric = [n](const Vec& y) {
    const double psi = 2.0 / (1.0 + y.squaredNorm());
    return Mat(psi * psi * Mat::Identity(n, n));
  };
  e.chart.metric_jacobian = [n](const Vec& y) {
    const double s = y.squaredNorm();
    const double psi = 2.0 / (1.0 + s);
    const double dpsi_ds = -2.0 / ((1.0 + s) * (1.0 + s));
    const double factor = 2.0 * psi * dpsi_ds * 2.0;  // d_k psi^2 = this * y_k
    MetricDerivs d = MetricDerivs::zero(n);
    for (int k = 0; k < n; ++k) {
      for (int i = 0; i < n; ++i) d[k](i, i) = factor * y[k];
    }
    return d;
  };

  e.field.n = n;
  e.field.label = "height_gradient";
  e.field.components = [](const Vec& y) { return y; };
  e.field.jacobian = [n](const Vec&) { return Mat(Mat::Identity(n, n)); };
  e.field.zero_set.points.push_back(Vec::Zero(n));
  e.field.level_box = [n](double, double rho_hi) {
    // |h| = 2|y|/(1+|y|^2), increasing for |y| < 1; invert when possible
    if (rho_hi >= 1.0) return centered_cube(n, 1.0);
    const double yb = (1.0 - std::sqrt(1.0 - rho_hi * rho_hi)) / rho_hi;
    return centered_cube(n, yb);
  };

  // mu(y) = 2 (1-s)/(1+s), decreasing in s; maximum 2 at the pole.
  const double s_max = n * c * c;
  e.expected = {true, false, 2.0 * (1.0 - s_max) / (1.0 + s_max), 2.0, true};
  e.notes = "round-sphere polar cap; mu proportional to the height function";
  return e;
}

// Planted negative control: h = (x1^2, 0, ...) on the flat chart is not
// conformal Killing; classify must reject it.
inline CatalogEntry euclidean_nonconformal(int n = 3, double box_half_width = 1.0) {
  CatalogEntry e = euclidean_dilation(n, box_half_width);
  e.name = "euclidean_nonconformal";
  e.field.label = "quadratic_nonconformal";
  e.field.components = [n](const Vec& x) {
    Vec h = Vec::Zero(n);
    h[0] = x[0] * x[0];
    return h;
  };
  e.field.jacobian = [n](const Vec& x) {
    Mat j = Mat::Zero(n, n);
    j(0, 0) = 2.0 * x[0];
    return j;
  };
  e.field.zero_set = ZeroSet{};  // vanishes on the hyperplane x1 = 0
  e.field.level_box = nullptr;
  e.expected = {false, false, 0.0, 0.0, false};
  e.notes = "negative control for the conformal certification";
  e.radial.reset();
  return e;
}

// The catalog self-test: classify must reproduce the expected facts. For
// homotheties the mu band is tight; for varying mu the sampled extremes must
// be contained in the closed-form range and come close to its endpoints.
inline bool matches_expected(const CatalogEntry& e, const ConformalReport& rep,
                             double mu_tol = 1e-6) {
  if (rep.is_conformal != e.expected.is_conformal) return false;
  if (rep.is_homothety != e.expected.is_homothety) return false;
  if (e.expected.is_conformal) {
    const double spread = e.expected.mu_max - e.expected.mu_min;
    const double slack = e.expected.is_homothety ? mu_tol : 0.05 * std::max(1.0, spread);
    if (rep.mu_min < e.expected.mu_min - mu_tol || rep.mu_min > e.expected.mu_min + slack)
      return false;
    if (rep.mu_max > e.expected.mu_max + mu_tol || rep.mu_max < e.expected.mu_max - slack)
      return false;
  }
  if (e.expected.div_h_positive && !(rep.div_h_min > 1e-12)) return false;
  return true;
}

}  // namespace ckn
