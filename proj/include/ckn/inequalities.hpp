#pragma once

// Evaluates both sides of the weighted inequalities, the intermediate proof
// identities, and the quadratic-form certificate. All integrals are taken
// over the support of the test function against the volume form; weights
// |h|^{-s} with s > 0 whose singularity lies inside the support are handled
// by an excision limit study (integrability probe + extrapolation fallback).

#include "ckn/fields.hpp"
#include "ckn/quadrature.hpp"
#include "ckn/testfunctions.hpp"

namespace ckn {

struct CKNParams {
  double a = 0.0;
  double b = 0.0;
  double p = 2.0;

  double q() const { return p / (p - 1.0); }
  void validate() const {
    if (!(p > 1.0)) throw ParamConditionViolated("CKN parameters: p > 1 required");
  }
};

struct XiaParams {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0 / 6.0;
  double r = 3.0;
  double p = 2.0;

  double q() const { return p / (p - 1.0); }

  // Throws ParamConditionViolated naming the first violated condition.
  void validate(int n) const {
    if (!(p > 1.0)) throw ParamConditionViolated("Xia parameters: p > 1 violated");
    if (!(p < r)) throw ParamConditionViolated("Xia parameters: p < r violated");
    if (!(alpha > 0.0)) throw ParamConditionViolated("Xia parameters: alpha > 0 violated");
    if (!(beta > 0.0)) throw ParamConditionViolated("Xia parameters: beta > 0 violated");
    if (!(1.0 / p + alpha / n > 0.0))
      throw ParamConditionViolated("Xia parameters: 1/p + alpha/n > 0 violated");
    if (!((p - 1.0) / (p * (r - 1.0)) + beta / n > 0.0))
      throw ParamConditionViolated("Xia parameters: (p-1)/(p(r-1)) + beta/n > 0 violated");
    if (!(1.0 / r + gamma / n > 0.0))
      throw ParamConditionViolated("Xia parameters: 1/r + gamma/n > 0 violated");
    const double gamma_expected = (alpha - 1.0) / r + (p - 1.0) * beta / (p * r);
    if (std::abs(gamma - gamma_expected) > 1e-12)
      throw ParamConditionViolated(
          "Xia parameters: gamma = (alpha-1)/r + (p-1)beta/(pr) violated");
  }
};

inline double sharp_constant_ckn(int n, const CKNParams& params) {
  return std::abs(n - (params.a + params.b + 1.0)) / (params.p * n);
}

struct InequalityReport {
  std::string inequality;
  double lhs = 0.0;
  double rhs = 0.0;
  double constant = 0.0;  // the sharp constant folded into lhs
  double ratio = 0.0;     // lhs / rhs, 0 when both sides vanish
  double margin = 0.0;    // rhs - lhs
  double slack = 0.0;     // 10x combined relative quadrature error
  std::vector<double> quadrature_errors;  // relative, one per integral
  bool verdict = false;                   // pass iff lhs <= rhs (1 + slack)
};

// ---------------------------------------------------------------------------
// Shared per-point geometry for the weighted integrands.

namespace detail {

struct PointGeom {
  double div_h = 0.0;
  double mu = 0.0;
  double hnorm = 0.0;
  double u = 0.0;
  double grad_norm = 0.0;   // |grad u|_g
  double h_dot_du = 0.0;    // h^i d_i u = g(h, grad u)
};

inline PointGeom point_geom(const ManifoldChart& chart, const FieldSpec& field,
                            const TestFunction& u, const Vec& x) {
  const int n = chart.n;
  const Mat g = chart.metric(x);
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success)
    throw SingularMetric("metric not positive definite inside integration domain");
  const Mat ginv = llt.solve(Mat::Identity(n, n));
  const Vec h = field.components(x);
  const Mat jac = field.jacobian(x);
  const MetricDerivs dg = chart.metric_jacobian(x);

  PointGeom p;
  double div = 0.0;
  for (int i = 0; i < n; ++i) div += jac(i, i);
  for (int k = 0; k < n; ++k) div += 0.5 * (ginv * dg[k]).trace() * h[k];
  p.div_h = div;
  p.mu = 2.0 * div / n;
  const Vec gh = g * h;
  const double h2 = h.dot(gh);
  p.hnorm = h2 > 0.0 ? std::sqrt(h2) : 0.0;

  if (u.anchored_to_hnorm && p.hnorm > 0.0) {
    // u = profile(|h|); chain rule through d_i |h| using the geometry already
    // in hand instead of the generic closures.
    p.u = u.profile_value(p.hnorm);
    const double fp = u.profile_deriv(p.hnorm);
    if (fp != 0.0) {
      Vec drho(n);
      for (int i = 0; i < n; ++i) {
        double v = h.dot(dg[i] * h);
        for (int a = 0; a < n; ++a) v += 2.0 * gh[a] * jac(a, i);
        drho[i] = v / (2.0 * p.hnorm);
      }
      const double gn2 = drho.dot(ginv * drho);
      p.grad_norm = std::abs(fp) * (gn2 > 0.0 ? std::sqrt(gn2) : 0.0);
      p.h_dot_du = fp * h.dot(drho);
    }
    return p;
  }

  p.u = u.value(x);
  const Vec du = u.gradient(x);
  const double gn2 = du.dot(ginv * du);
  p.grad_norm = gn2 > 0.0 ? std::sqrt(gn2) : 0.0;
  p.h_dot_du = h.dot(du);
  return p;
}

struct TermResult {
  double value = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
};

using TermFn = std::function<double(const PointGeom&)>;

inline bool zero_inside_support(const FieldSpec& field, const TestFunction& u, const Box& dom) {
  for (const Vec& z : field.zero_set.points) {
    if (dom.contains(z) && u.value(z) > 0.0) return true;
  }
  return false;
}

inline double rel_of(double value, double abs_err) {
  if (abs_err == 0.0) return 0.0;
  return std::min(1.0, abs_err / std::max(std::abs(value), 1e-300));
}

// Integrates the given terms over supp(u) intersected with the chart box. Terms whose weight
// |h|^{-s} is genuinely singular inside the support get an integrability
// probe (excision study at three radii): non-Cauchy sequences raise
// NonIntegrableWeight, integrable ones are integrated directly and fall back
// to geometric extrapolation of the study if the direct pass exhausts depth.
inline std::vector<TermResult> evaluate_terms(const ManifoldChart& chart, const FieldSpec& field,
                                              const TestFunction& u,
                                              const std::vector<TermFn>& terms,
                                              const std::vector<double>& singular_exponents,
                                              const QuadratureScheme& scheme) {
  const std::size_t m = terms.size();
  std::vector<TermResult> out(m);
  const Box dom = Box::intersect(u.support, chart.domain);
  if (dom.is_empty()) return out;

  const bool overlap = zero_inside_support(field, u, dom);
  std::vector<std::size_t> regular, singular;
  for (std::size_t i = 0; i < m; ++i) {
    if (overlap && singular_exponents[i] > 0.0)
      singular.push_back(i);
    else
      regular.push_back(i);
  }

  if (!regular.empty()) {
    auto f = [&](const Vec& x, std::span<double> vals) {
      const PointGeom p = point_geom(chart, field, u, x);
      for (std::size_t j = 0; j < regular.size(); ++j) vals[j] = terms[regular[j]](p);
    };
    const auto res = integrate_many(chart, static_cast<int>(regular.size()), f, scheme,
                                    &field.zero_set, &dom);
    for (std::size_t j = 0; j < regular.size(); ++j) {
      out[regular[j]] = {res[j].value, res[j].error_estimate,
                         rel_of(res[j].value, res[j].error_estimate)};
    }
  }

  for (std::size_t idx : singular) {
    auto f = [&](const Vec& x) { return terms[idx](point_geom(chart, field, u, x)); };

    // integrability probe at loose tolerance
    const double d_scale = 0.5 * dom.widths().minCoeff();
    const std::vector<double> epsilons = {0.2 * d_scale, 0.1 * d_scale, 0.05 * d_scale};
    QuadratureScheme probe = scheme;
    probe.rel_tol = std::max(1e-3, scheme.rel_tol);
    probe.max_depth = std::min(scheme.max_depth, 10);
    std::vector<IntegralResult> study;
    study.reserve(epsilons.size());
    for (double eps : epsilons) {
      QuadratureScheme s = probe;
      s.excision_radius = eps;
      study.push_back(
          integrate(chart, f, s, &field.zero_set, &dom, /*allow_unconverged=*/true));
    }
    const double d1 = study[1].value - study[0].value;
    const double d2 = study[2].value - study[1].value;
    const double noise =
        study[0].error_estimate + study[1].error_estimate + study[2].error_estimate;
    const bool visible = std::abs(d1) > 5.0 * noise && std::abs(d2) > 5.0 * noise;
    if (visible && std::abs(d2) >= 0.87 * std::abs(d1)) {
      throw NonIntegrableWeight(
          "weight |h|^{-" + std::to_string(singular_exponents[idx]) +
          "} fails the excision limit study (|h| vanishes inside the support)");
    }

    try {
      const IntegralResult direct = integrate(chart, f, scheme, &field.zero_set, &dom);
      out[idx] = {direct.value, direct.error_estimate,
                  rel_of(direct.value, direct.error_estimate)};
    } catch (const BudgetExceeded&) {
      // geometric eps -> 0 extrapolation of the study sequence
      double value = study[2].value;
      double err = noise;
      if (visible) {
        const double rho = std::clamp(d2 / d1, -0.86, 0.86);
        const double tail = d2 * rho / (1.0 - rho);
        value += tail;
        err += std::abs(tail);
      }
      out[idx] = {value, err, rel_of(value, err)};
    }
  }
  return out;
}

inline void require_positive_divergence(const ConformalReport& rep) {
  if (!(rep.div_h_min > 1e-12))
    throw DivergenceNotPositive("div h is not strictly positive on the classification grid");
}

inline ConformalReport gate_divergence(const ManifoldChart& chart, const FieldSpec& field) {
  const ConformalReport rep = classify(chart, field, 5, 1e-8);
  require_positive_divergence(rep);
  return rep;
}

inline ConformalReport gate_homothety(const ManifoldChart& chart, const FieldSpec& field) {
  const ConformalReport rep = gate_divergence(chart, field);
  if (!rep.is_homothety || std::abs(rep.mu_max - 2.0) > 1e-6 || std::abs(rep.mu_min - 2.0) > 1e-6)
    throw NotHomothety("field is not a homothety normalized to div h = n (mu = 2)");
  return rep;
}

inline InequalityReport assemble_two_factor_report(std::string name, double constant, double i0,
                                                   double i1, double i2, double inv_q,
                                                   double inv_p,
                                                   const std::vector<TermResult>& t) {
  InequalityReport rep;
  rep.inequality = std::move(name);
  rep.constant = constant;
  rep.lhs = constant * i0;
  rep.rhs = std::pow(i1, inv_q) * std::pow(i2, inv_p);
  for (const auto& tr : t) rep.quadrature_errors.push_back(tr.rel_err);
  rep.slack = 10.0 * (t[0].rel_err + inv_q * t[1].rel_err + inv_p * t[2].rel_err);
  rep.margin = rep.rhs - rep.lhs;
  if (rep.rhs > 0.0) {
    rep.ratio = rep.lhs / rep.rhs;
    rep.verdict = rep.lhs <= rep.rhs * (1.0 + rep.slack);
  } else {
    rep.ratio = 0.0;
    rep.verdict = std::abs(rep.lhs) <= 1e-12;
  }
  return rep;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// The general weighted inequality:
//   C int (div h) |u|^p / |h|^{a+b+1} dV
//     <= ( int (div h) |u|^p / |h|^{aq} dV )^{1/q}
//      * ( int (div h)^{1-p} |grad u|^p / |h|^{bp} dV )^{1/p}
// with C = |n - (a+b+1)| / (p n).

inline InequalityReport evaluate_ckn(const ManifoldChart& chart, const FieldSpec& field,
                                     const TestFunction& u, const CKNParams& params,
                                     const QuadratureScheme& scheme) {
  params.validate();
  detail::gate_divergence(chart, field);
  const int n = chart.n;
  const double a = params.a, b = params.b, p = params.p, q = params.q();
  const double k = a + b + 1.0;

  const std::vector<detail::TermFn> terms = {
      [=](const detail::PointGeom& g) {
        return g.div_h * std::pow(std::abs(g.u), p) * std::pow(g.hnorm, -k);
      },
      [=](const detail::PointGeom& g) {
        return g.div_h * std::pow(std::abs(g.u), p) * std::pow(g.hnorm, -a * q);
      },
      [=](const detail::PointGeom& g) {
        return std::pow(g.div_h, 1.0 - p) * std::pow(g.grad_norm, p) * std::pow(g.hnorm, -b * p);
      }};
  const auto t = detail::evaluate_terms(chart, field, u, terms, {k, a * q, b * p}, scheme);
  return detail::assemble_two_factor_report("ckn", sharp_constant_ckn(n, params), t[0].value,
                                            t[1].value, t[2].value, 1.0 / q, 1.0 / p, t);
}

// Specialization to homotheties with div h = n and p = q = 2:
//   C int |u|^2 / |h|^{a+b+1} dV
//     <= ( int |u|^2 / |h|^{2a} dV )^{1/2} ( int |grad u|^2 / |h|^{2b} dV )^{1/2}
// with C = |n - (a+b+1)| / 2.

inline InequalityReport evaluate_euclidean_ckn(const ManifoldChart& chart, const FieldSpec& field,
                                               const TestFunction& u, double a, double b,
                                               const QuadratureScheme& scheme) {
  detail::gate_homothety(chart, field);
  const int n = chart.n;
  const double k = a + b + 1.0;

  const std::vector<detail::TermFn> terms = {
      [=](const detail::PointGeom& g) { return g.u * g.u * std::pow(g.hnorm, -k); },
      [=](const detail::PointGeom& g) { return g.u * g.u * std::pow(g.hnorm, -2.0 * a); },
      [=](const detail::PointGeom& g) {
        return g.grad_norm * g.grad_norm * std::pow(g.hnorm, -2.0 * b);
      }};
  const auto t = detail::evaluate_terms(chart, field, u, terms, {k, 2.0 * a, 2.0 * b}, scheme);
  return detail::assemble_two_factor_report("euclidean_ckn", 0.5 * std::abs(n - k), t[0].value,
                                            t[1].value, t[2].value, 0.5, 0.5, t);
}

// Hardy form (a = p-1, b = 0 specialization raised to the p-th power):
//   (|n-p|/(np))^p int (div h) |u|^p / |h|^p dV <= int (div h)^{1-p} |grad u|^p dV

inline InequalityReport evaluate_hardy(const ManifoldChart& chart, const FieldSpec& field,
                                       const TestFunction& u, double p,
                                       const QuadratureScheme& scheme) {
  if (!(p > 1.0)) throw ParamConditionViolated("hardy: p > 1 required");
  detail::gate_divergence(chart, field);
  const int n = chart.n;
  const double constant = std::pow(std::abs(n - p) / (n * p), p);

  const std::vector<detail::TermFn> terms = {
      [=](const detail::PointGeom& g) {
        return g.div_h * std::pow(std::abs(g.u), p) * std::pow(g.hnorm, -p);
      },
      [=](const detail::PointGeom& g) {
        return std::pow(g.div_h, 1.0 - p) * std::pow(g.grad_norm, p);
      }};
  const auto t = detail::evaluate_terms(chart, field, u, terms, {p, 0.0}, scheme);

  InequalityReport rep;
  rep.inequality = "hardy";
  rep.constant = constant;
  rep.lhs = constant * t[0].value;
  rep.rhs = t[1].value;
  rep.quadrature_errors = {t[0].rel_err, t[1].rel_err};
  rep.slack = 10.0 * (t[0].rel_err + t[1].rel_err);
  rep.margin = rep.rhs - rep.lhs;
  if (rep.rhs > 0.0) {
    rep.ratio = rep.lhs / rep.rhs;
    rep.verdict = rep.lhs <= rep.rhs * (1.0 + rep.slack);
  } else {
    rep.ratio = 0.0;
    rep.verdict = std::abs(rep.lhs) <= 1e-12;
  }
  return rep;
}

// Uncertainty-principle form:
//   (1/p) int (div h) |u|^p dV
//     <= ( int (div h) |h|^q |u|^p dV )^{1/q} ( int (div h)^{1-p} |grad u|^p dV )^{1/p}

inline InequalityReport evaluate_uncertainty(const ManifoldChart& chart, const FieldSpec& field,
                                             const TestFunction& u, double p,
                                             const QuadratureScheme& scheme) {
  if (!(p > 1.0)) throw ParamConditionViolated("uncertainty: p > 1 required");
  detail::gate_divergence(chart, field);
  const double q = p / (p - 1.0);

  const std::vector<detail::TermFn> terms = {
      [=](const detail::PointGeom& g) { return g.div_h * std::pow(std::abs(g.u), p); },
      [=](const detail::PointGeom& g) {
        return g.div_h * std::pow(g.hnorm, q) * std::pow(std::abs(g.u), p);
      },
      [=](const detail::PointGeom& g) {
        return std::pow(g.div_h, 1.0 - p) * std::pow(g.grad_norm, p);
      }};
  const auto t = detail::evaluate_terms(chart, field, u, terms, {0.0, -q, 0.0}, scheme);
  return detail::assemble_two_factor_report("uncertainty", 1.0 / p, t[0].value, t[1].value,
                                            t[2].value, 1.0 / q, 1.0 / p, t);
}

// Xia-type inequality:
//   int (div h) |h|^{gamma r} |u|^r dV
//     <= (r n / (n + gamma r))
//        ( int (div h)^{1-p} |h|^{alpha p} |grad u|^p dV )^{1/p}
//        ( int (div h) |h|^{beta} |u|^{(r-1)q} dV )^{1/q}

inline InequalityReport evaluate_xia(const ManifoldChart& chart, const FieldSpec& field,
                                     const TestFunction& u, const XiaParams& params,
                                     const QuadratureScheme& scheme) {
  params.validate(chart.n);
  detail::gate_divergence(chart, field);
  const int n = chart.n;
  const double p = params.p, q = params.q(), r = params.r;
  const double gr = params.gamma * r;

  const std::vector<detail::TermFn> terms = {
      [=](const detail::PointGeom& g) {
        return g.div_h * std::pow(g.hnorm, gr) * std::pow(std::abs(g.u), r);
      },
      [=](const detail::PointGeom& g) {
        return std::pow(g.div_h, 1.0 - p) * std::pow(g.hnorm, params.alpha * p) *
               std::pow(g.grad_norm, p);
      },
      [=](const detail::PointGeom& g) {
        return g.div_h * std::pow(g.hnorm, params.beta) *
               std::pow(std::abs(g.u), (r - 1.0) * q);
      }};
  const auto t =
      detail::evaluate_terms(chart, field, u, terms, {-gr, -params.alpha * p, -params.beta}, scheme);

  InequalityReport rep;
  rep.inequality = "xia";
  rep.constant = r * n / (n + gr);
  rep.lhs = t[0].value;
  rep.rhs = rep.constant * std::pow(t[1].value, 1.0 / p) * std::pow(t[2].value, 1.0 / q);
  rep.quadrature_errors = {t[0].rel_err, t[1].rel_err, t[2].rel_err};
  rep.slack = 10.0 * (t[0].rel_err + t[1].rel_err / p + t[2].rel_err / q);
  rep.margin = rep.rhs - rep.lhs;
  if (rep.rhs > 0.0) {
    rep.ratio = rep.lhs / rep.rhs;
    rep.verdict = rep.lhs <= rep.rhs * (1.0 + rep.slack);
  } else {
    rep.ratio = 0.0;
    rep.verdict = std::abs(rep.lhs) <= 1e-12;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Proof-chain trace: the three stations of the Theorem 2 proof as numbers.
//   (i)   integration by parts:
//         int |u|^{p-1} (h, grad u) / |h|^k dV
//           = -((n-k)/(2p)) int mu |u|^p / |h|^k dV,   k = a+b+1
//   (ii)  pointwise bound |(h, grad u)| <= |h| |grad u|
//   (iii) Hoelder split with exponents (q, p)
// Station values are in the mu-normalization; (i) and (iii) coincide
// algebraically with lhs and rhs of evaluate_ckn.

struct ProofTrace {
  double ipp_integral = 0.0;    // int |u|^{p-1} (h, grad u)/|h|^k dV
  double weighted_mass = 0.0;   // int mu |u|^p / |h|^k dV
  double signed_constant = 0.0; // (n-k)/(2p), sign carried by the identity
  double residual_abs = 0.0;
  double residual_rel = 0.0;
  double station_i = 0.0;
  double station_ii = 0.0;
  double station_iii = 0.0;
  bool monotone_ok = false;
  std::vector<double> quadrature_errors;
};

inline ProofTrace proof_chain_trace(const ManifoldChart& chart, const FieldSpec& field,
                                    const TestFunction& u, const CKNParams& params,
                                    const QuadratureScheme& scheme) {
  params.validate();
  detail::gate_divergence(chart, field);
  const int n = chart.n;
  const double a = params.a, b = params.b, p = params.p, q = params.q();
  const double k = a + b + 1.0;

  const std::vector<detail::TermFn> terms = {
      // J: signed integration-by-parts integral
      [=](const detail::PointGeom& g) {
        return std::pow(std::abs(g.u), p - 1.0) * g.h_dot_du * std::pow(g.hnorm, -k);
      },
      // K: weighted mass
      [=](const detail::PointGeom& g) {
        return g.mu * std::pow(std::abs(g.u), p) * std::pow(g.hnorm, -k);
      },
      // W: Cauchy-Schwarz majorant
      [=](const detail::PointGeom& g) {
        return std::pow(std::abs(g.u), p - 1.0) * g.grad_norm * std::pow(g.hnorm, -(k - 1.0));
      },
      // Hoelder factors
      [=](const detail::PointGeom& g) {
        return g.mu * std::pow(std::abs(g.u), p) * std::pow(g.hnorm, -a * q);
      },
      [=](const detail::PointGeom& g) {
        return std::pow(g.mu, 1.0 - p) * std::pow(g.grad_norm, p) * std::pow(g.hnorm, -b * p);
      }};
  const auto t =
      detail::evaluate_terms(chart, field, u, terms, {k, k, k - 1.0, a * q, b * p}, scheme);

  ProofTrace trace;
  trace.ipp_integral = t[0].value;
  trace.weighted_mass = t[1].value;
  trace.signed_constant = (n - k) / (2.0 * p);
  trace.residual_abs = std::abs(t[0].value + trace.signed_constant * t[1].value);
  const double scale =
      std::max({std::abs(t[0].value), std::abs(trace.signed_constant * t[1].value), 1e-300});
  trace.residual_rel = trace.residual_abs / scale;
  trace.station_i = std::abs(trace.signed_constant) * t[1].value;
  trace.station_ii = t[2].value;
  trace.station_iii = std::pow(t[3].value, 1.0 / q) * std::pow(t[4].value, 1.0 / p);
  for (const auto& tr : t) trace.quadrature_errors.push_back(tr.rel_err);
  const double s2 = 10.0 * (t[1].rel_err + t[2].rel_err);
  const double s3 = 10.0 * (t[2].rel_err + t[3].rel_err / q + t[4].rel_err / p);
  trace.monotone_ok = trace.station_i <= trace.station_ii * (1.0 + s2) + 1e-300 &&
                      trace.station_ii <= trace.station_iii * (1.0 + s3) + 1e-300;
  return trace;
}

// ---------------------------------------------------------------------------
// Quadratic-form certificate for homotheties (p = 2): with
//   W = grad u / |h|^b + t u h / |h|^{a+1},
// g(W, W) >= 0 pointwise, and Q(t) = int g(W,W) dV = A t^2 + B t + D with
//   A = int u^2 / |h|^{2a} dV
//   D = int |grad u|^2 / |h|^{2b} dV
//   B = 2 int u (h, grad u) / |h|^{a+b+1} dV = -(n-k) int u^2 / |h|^k dV
// (the cross term reduced through the divergence identity). Q(t) >= 0 for all
// t is the discriminant condition B^2 <= 4AD, which is the two-factor
// inequality again.

struct CostaReport {
  std::vector<double> t_values;
  std::vector<double> quad_values;  // Q(t) per requested t
  double coeff_a = 0.0;
  double coeff_b = 0.0;        // reduced via the divergence identity
  double coeff_d = 0.0;
  double cross_term = 0.0;     // direct quadrature of int u (h, grad u)/|h|^k dV
  double optimal_t = 0.0;      // argmin of Q
  double discriminant_ratio = 0.0;  // B^2 / (4AD)
  bool nonnegative = false;    // all quad_values >= -1e-8
  bool bound_ok = false;       // B^2 <= 4AD (1 + slack)
  double slack = 0.0;
  std::vector<double> quadrature_errors;
};

inline CostaReport costa_quadratic_check(const ManifoldChart& chart, const FieldSpec& field,
                                         const TestFunction& u, double a, double b,
                                         std::span<const double> t_values,
                                         const QuadratureScheme& scheme) {
  detail::gate_homothety(chart, field);
  const int n = chart.n;
  const double k = a + b + 1.0;

  const std::vector<detail::TermFn> terms = {
      [=](const detail::PointGeom& g) { return g.u * g.u * std::pow(g.hnorm, -2.0 * a); },
      [=](const detail::PointGeom& g) {
        return g.grad_norm * g.grad_norm * std::pow(g.hnorm, -2.0 * b);
      },
      [=](const detail::PointGeom& g) { return g.u * g.h_dot_du * std::pow(g.hnorm, -k); },
      [=](const detail::PointGeom& g) { return g.u * g.u * std::pow(g.hnorm, -k); }};
  const auto t =
      detail::evaluate_terms(chart, field, u, terms, {2.0 * a, 2.0 * b, k, k}, scheme);

  CostaReport rep;
  rep.coeff_a = t[0].value;
  rep.coeff_d = t[1].value;
  rep.cross_term = t[2].value;
  rep.coeff_b = -(n - k) * t[3].value;
  for (const auto& tr : t) rep.quadrature_errors.push_back(tr.rel_err);

  rep.t_values.assign(t_values.begin(), t_values.end());
  rep.nonnegative = true;
  for (double tv : rep.t_values) {
    // same nodes for all four integrals, so this equals the direct quadrature
    // of the pointwise nonnegative g(W,W)
    const double qv = rep.coeff_d + 2.0 * tv * rep.cross_term + tv * tv * rep.coeff_a;
    rep.quad_values.push_back(qv);
    if (qv < -1e-8) rep.nonnegative = false;
  }

  rep.optimal_t = rep.coeff_a > 0.0 ? -rep.coeff_b / (2.0 * rep.coeff_a) : 0.0;
  const double denom = 4.0 * rep.coeff_a * rep.coeff_d;
  rep.discriminant_ratio = denom > 0.0 ? rep.coeff_b * rep.coeff_b / denom : 0.0;
  rep.slack = 10.0 * (2.0 * t[3].rel_err + t[0].rel_err + t[1].rel_err);
  rep.bound_ok = rep.discriminant_ratio <= 1.0 + rep.slack;
  return rep;
}

inline CostaReport costa_quadratic_check(const ManifoldChart& chart, const FieldSpec& field,
                                         const TestFunction& u, double a, double b, double t,
                                         const QuadratureScheme& scheme) {
  const double ts[1] = {t};
  return costa_quadratic_check(chart, field, u, a, b, std::span<const double>(ts, 1), scheme);
}

}  // namespace ckn
