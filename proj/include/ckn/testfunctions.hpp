#pragma once

// Compactly supported test functions with analytic gradients: smooth bumps in
// chart coordinates and power-law profiles in |h| (near-extremizer families
// for sharpness probing). Gradients are coordinate partials d_i u; norms are
// taken with g^{ij} where needed.

#include "ckn/geometry.hpp"

#include <map>

namespace ckn {

struct TestFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;  // d_i u (covector components)
  Box support;                              // u and grad u vanish outside
  std::map<std::string, double> family_params;
  std::string family;

  // Fast path for |h|-anchored families: u(x) = profile(|h(x)|), so an
  // evaluator that already has |h| and its gradient at a point can skip the
  // generic value/gradient closures. Both paths compute identical values.
  bool anchored_to_hnorm = false;
  std::function<double(double)> profile_value;
  std::function<double(double)> profile_deriv;
};

inline double gradient_norm(const ManifoldChart& chart, const TestFunction& u, const Vec& x) {
  return covector_norm(chart, u.gradient(x), x);
}

// ---------------------------------------------------------------------------
// C-infinity ramp: step(t) = 0 for t <= 0, 1 for t >= 1, built from
// f(t) = exp(-1/t).

namespace detail {

inline double moll(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
inline double moll_deriv(double t) { return t > 0.0 ? std::exp(-1.0 / t) / (t * t) : 0.0; }

}  // namespace detail

inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double a = detail::moll(t);
  const double b = detail::moll(1.0 - t);
  return a / (a + b);
}

inline double smooth_step_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double a = detail::moll(t);
  const double b = detail::moll(1.0 - t);
  const double da = detail::moll_deriv(t);
  const double db = -detail::moll_deriv(1.0 - t);
  const double denom = (a + b) * (a + b);
  return (da * (a + b) - a * (da + db)) / denom;
}

// Polynomial C^8 step (S'(t) = 218790 t^8 (1-t)^8, the regularized incomplete
// beta I_t(9,9)). Unlike the exponential mollifier it is piecewise analytic,
// so Gauss panels converge geometrically across the ramp; used for the
// |h|-anchored cutoff windows where the quadrature cost of the mollifier's
// endpoint singularity is prohibitive.
inline double poly_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  const double t4 = t * t * t * t;
  return t4 * t4 * t *
         (24310.0 +
          t * (-175032.0 +
               t * (556920.0 +
                    t * (-1021020.0 +
                         t * (1178100.0 +
                              t * (-875160.0 + t * (408408.0 + t * (-109395.0 + t * 12870.0))))))));
}

inline double poly_step_deriv(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  const double u = t * (1.0 - t);
  const double u2 = u * u;
  return 218790.0 * u2 * u2 * u2 * u2;
}

// ---------------------------------------------------------------------------
// Radial profiles shared by the coordinate-space and |h|-anchored families.

// Bump profile: 1 on [0, r_in], 0 beyond r_out, smooth in between.
struct BumpProfile {
  double r_in, r_out;

  double operator()(double r) const {
    return smooth_step((r_out - r) / (r_out - r_in));
  }
  double deriv(double r) const {
    return -smooth_step_deriv((r_out - r) / (r_out - r_in)) / (r_out - r_in);
  }
};

// Cutoff window on [rho_in, rho_out]: C^8 polynomial ramps of width s*rho_in
// and s*rho_out at the two ends, identically 1 between them.
struct CutoffWindow {
  double rho_in, rho_out, s;

  double operator()(double rho) const {
    if (rho <= rho_in || rho >= rho_out) return 0.0;
    double eta = 1.0;
    const double up_w = s * rho_in;
    if (rho < rho_in + up_w) eta *= poly_step((rho - rho_in) / up_w);
    const double dn_w = s * rho_out;
    if (rho > rho_out - dn_w) eta *= poly_step((rho_out - rho) / dn_w);
    return eta;
  }
  double deriv(double rho) const {
    if (rho <= rho_in || rho >= rho_out) return 0.0;
    const double up_w = s * rho_in;
    const double dn_w = s * rho_out;
    const double up = rho < rho_in + up_w ? poly_step((rho - rho_in) / up_w) : 1.0;
    const double dup = rho < rho_in + up_w ? poly_step_deriv((rho - rho_in) / up_w) / up_w : 0.0;
    const double dn = rho > rho_out - dn_w ? poly_step((rho_out - rho) / dn_w) : 1.0;
    const double ddn =
        rho > rho_out - dn_w ? -poly_step_deriv((rho_out - rho) / dn_w) / dn_w : 0.0;
    return dup * dn + up * ddn;
  }
};

// Profile in rho = |h|: window(rho) * rho^{-delta}.
struct PowerProfile {
  CutoffWindow window;
  double delta;

  double operator()(double rho) const {
    const double eta = window(rho);
    return eta == 0.0 ? 0.0 : eta * std::pow(rho, -delta);
  }
  double deriv(double rho) const {
    const double eta = window(rho);
    if (eta == 0.0 && window.deriv(rho) == 0.0) return 0.0;
    return window.deriv(rho) * std::pow(rho, -delta) -
           delta * eta * std::pow(rho, -delta - 1.0);
  }
};

// Profile in rho = |h|: window(rho) * log(rho_out / rho) / log(rho_out / rho_in).
struct LogProfile {
  CutoffWindow window;

  double operator()(double rho) const {
    const double eta = window(rho);
    if (eta == 0.0) return 0.0;
    return eta * std::log(window.rho_out / rho) / std::log(window.rho_out / window.rho_in);
  }
  double deriv(double rho) const {
    const double norm = std::log(window.rho_out / window.rho_in);
    const double eta = window(rho);
    if (eta == 0.0 && window.deriv(rho) == 0.0) return 0.0;
    const double l = std::log(window.rho_out / rho) / norm;
    return window.deriv(rho) * l - eta / (rho * norm);
  }
};

// ---------------------------------------------------------------------------
// Families

inline TestFunction smooth_bump(const ManifoldChart& chart, const Vec& center, double r_in,
                                double r_out) {
  if (!(0.0 < r_in && r_in < r_out))
    throw ParameterOutOfRange("smooth_bump: need 0 < r_in < r_out");
  Box support;
  support.lo = center.array() - r_out;
  support.hi = center.array() + r_out;
  for (int i = 0; i < chart.n; ++i) {
    if (!(support.lo[i] > chart.domain.lo[i] && support.hi[i] < chart.domain.hi[i]))
      throw SupportOutsideChart("smooth_bump: ball of radius r_out not strictly inside chart");
  }

  BumpProfile profile{r_in, r_out};
  const Vec c = center;
  const int n = chart.n;
  TestFunction u;
  u.support = support;
  u.family = "bump";
  for (int i = 0; i < n; ++i) u.family_params["center" + std::to_string(i)] = c[i];
  u.family_params["r_in"] = r_in;
  u.family_params["r_out"] = r_out;
  u.value = [profile, c](const Vec& x) { return profile((x - c).norm()); };
  u.gradient = [profile, c, n](const Vec& x) {
    const Vec d = x - c;
    const double r = d.norm();
    if (r <= 0.0 || r <= profile.r_in || r >= profile.r_out) return Vec(Vec::Zero(n));
    return Vec((profile.deriv(r) / r) * d);
  };
  return u;
}

namespace detail {

// d_i |h|_g, assembled by chain rule from the field jacobian and the metric
// jacobian; valid wherever |h| > 0.
inline Vec hnorm_gradient(const ManifoldChart& chart, const FieldSpec& field, const Vec& x,
                          double rho) {
  const int n = chart.n;
  const Vec h = field.components(x);
  const Mat jac = field.jacobian(x);
  const Mat g = chart.metric(x);
  const MetricDerivs dg = chart.metric_jacobian(x);
  const Vec gh = g * h;
  Vec out(n);
  for (int i = 0; i < n; ++i) {
    double v = h.dot(dg[i] * h);
    for (int a = 0; a < n; ++a) v += 2.0 * gh[a] * jac(a, i);
    out[i] = v / (2.0 * rho);
  }
  return out;
}

template <class Profile>
TestFunction hnorm_anchored(const ManifoldChart& chart, const FieldSpec& field,
                            const Profile& profile, double rho_in, double rho_out) {
  Box support = chart.domain;
  if (field.level_box) {
    support = Box::intersect(field.level_box(rho_in, rho_out), chart.domain);
    if (support.is_empty())
      throw SupportOutsideChart("annulus { rho_in <= |h| <= rho_out } misses the chart");
  }
  // Captured by value: the test function stays valid after the chart/field
  // objects it was built from go out of scope.
  TestFunction u;
  u.support = support;
  u.value = [chart, field, profile](const Vec& x) {
    return profile(field_norm(chart, field, x));
  };
  u.gradient = [chart, field, profile](const Vec& x) {
    const double rho = field_norm(chart, field, x);
    const double dp = profile.deriv(rho);
    if (dp == 0.0) return Vec(Vec::Zero(chart.n));
    return Vec(dp * hnorm_gradient(chart, field, x, rho));
  };
  u.anchored_to_hnorm = true;
  u.profile_value = [profile](double rho) { return profile(rho); };
  u.profile_deriv = [profile](double rho) { return profile.deriv(rho); };
  return u;
}

}  // namespace detail

// u(x) = eta(|h(x)|) |h(x)|^{-delta}: the near-extremizer family. The support
// excludes { |h| < rho_in } by construction, so the zero set of h is avoided.
inline TestFunction power_cutoff(const ManifoldChart& chart, const FieldSpec& field, double delta,
                                 double rho_in, double rho_out, double smoothing = 0.1) {
  if (!(rho_in > 0.0)) throw ParameterOutOfRange("power_cutoff: rho_in must be > 0");
  if (rho_out / rho_in < 1.1)
    throw DegenerateAnnulus("power_cutoff: rho_out / rho_in must be >= 1.1");
  if (!(smoothing > 0.0 && smoothing < 0.5))
    throw ParameterOutOfRange("power_cutoff: smoothing must be in (0, 0.5)");

  PowerProfile profile{CutoffWindow{rho_in, rho_out, smoothing}, delta};
  TestFunction u = detail::hnorm_anchored(chart, field, profile, rho_in, rho_out);
  u.family = "power_cutoff";
  u.family_params = {{"delta", delta},
                     {"rho_in", rho_in},
                     {"rho_out", rho_out},
                     {"smoothing", smoothing}};
  return u;
}

// u(x) = eta(|h(x)|) log(rho_out/|h|)/log(rho_out/rho_in): the borderline
// (logarithmic) family.
inline TestFunction log_cutoff(const ManifoldChart& chart, const FieldSpec& field, double rho_in,
                               double rho_out, double smoothing = 0.1) {
  if (!(rho_in > 0.0)) throw ParameterOutOfRange("log_cutoff: rho_in must be > 0");
  if (rho_out / rho_in < 1.1)
    throw DegenerateAnnulus("log_cutoff: rho_out / rho_in must be >= 1.1");

  LogProfile profile{CutoffWindow{rho_in, rho_out, smoothing}};
  TestFunction u = detail::hnorm_anchored(chart, field, profile, rho_in, rho_out);
  u.family = "log_cutoff";
  u.family_params = {{"rho_in", rho_in}, {"rho_out", rho_out}, {"smoothing", smoothing}};
  return u;
}

}  // namespace ckn
