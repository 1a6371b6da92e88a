#pragma once

// Sharpness probing: maximize the inequality ratio over extremal test
// function families (power-law and logarithmic profiles in |h|) and
// extrapolate the deficit 1 - ratio in 1/log(R), R = rho_out/rho_in.
//
// On homothety entries whose geometry is radial in |h| (flat space, cone)
// all integrals route through 1D quadrature, which keeps R = 1e4 tractable;
// one small-R point per sweep is cross-checked against the full
// n-dimensional pipeline.

#include "ckn/catalog.hpp"
#include "ckn/inequalities.hpp"

namespace ckn {

struct ExtremalFamily {
  enum class Kind { power_cutoff, log_cutoff };
  Kind kind = Kind::power_cutoff;
  double rho_in = 1.0;
  double smoothing = 0.1;
};

struct SharpnessSample {
  double R = 0.0;
  double delta = 0.0;
  double ratio = 0.0;
  double slack = 0.0;
};

struct DeficitFit {
  double c0 = 0.0;  // extrapolated gap to sharpness
  double c1 = 0.0;
  double r2 = 0.0;  // coefficient of determination
};

struct SharpnessStudy {
  CKNParams params;
  ExtremalFamily family;
  std::vector<SharpnessSample> samples;  // per-R optimum
  double best_ratio = 0.0;
  DeficitFit deficit_fit;
  double extrapolated_limit = 0.0;
  bool degenerate = false;  // sharp constant vanishes (a+b+1 = n)
  bool used_radial_path = false;
  // radial vs n-dimensional pipeline agreement at the smallest R
  double crosscheck_radial = 0.0;
  double crosscheck_ndim = 0.0;
  double crosscheck_rel = 0.0;
};

inline double ratio_of(const ManifoldChart& chart, const FieldSpec& field, const TestFunction& u,
                       const CKNParams& params, const QuadratureScheme& scheme) {
  return evaluate_ckn(chart, field, u, params, scheme).ratio;
}

namespace detail {

// ratio of the two-factor inequality for a radial profile u(|h|) on a
// homothety entry with dV = angular_measure r^{n-1} dr and div h = n.
template <class Profile>
std::pair<double, double> radial_ratio(const RadialReduction& radial, const CKNParams& params,
                                       const Profile& profile, double rho_in, double rho_out) {
  const double n = radial.div_h;
  const double a = params.a, b = params.b, p = params.p, q = params.q();
  const double k = a + b + 1.0;
  const double e = radial.radial_exponent;
  const double c = sharp_constant_ckn(static_cast<int>(n), params);

  auto mass_k = [&](double r) {
    const double u = profile(r);
    return std::pow(std::abs(u), p) * std::pow(r, e - k);
  };
  auto mass_a = [&](double r) {
    const double u = profile(r);
    return std::pow(std::abs(u), p) * std::pow(r, e - a * q);
  };
  auto grad_b = [&](double r) {
    const double du = profile.deriv(r);
    return std::pow(std::abs(du), p) * std::pow(r, e - b * p);
  };
  const auto i0 = integrate_1d(mass_k, rho_in, rho_out, 1e-9);
  const auto i1 = integrate_1d(mass_a, rho_in, rho_out, 1e-9);
  const auto i2 = integrate_1d(grad_b, rho_in, rho_out, 1e-9);

  const double A = radial.angular_measure;
  const double lhs = c * A * n * i0.value;
  const double rhs = std::pow(A * n * i1.value, 1.0 / q) *
                     std::pow(A * std::pow(n, 1.0 - p) * i2.value, 1.0 / p);
  const double r0 = rel_of(i0.value, i0.error_estimate);
  const double r1 = rel_of(i1.value, i1.error_estimate);
  const double r2 = rel_of(i2.value, i2.error_estimate);
  const double slack = 10.0 * (r0 + r1 / q + r2 / p);
  if (rhs <= 0.0) return {0.0, slack};
  return {lhs / rhs, slack};
}

inline std::pair<double, double> family_ratio_radial(const RadialReduction& radial,
                                                     const CKNParams& params,
                                                     const ExtremalFamily& family, double delta,
                                                     double rho_in, double rho_out) {
  const CutoffWindow window{rho_in, rho_out, family.smoothing};
  if (family.kind == ExtremalFamily::Kind::power_cutoff) {
    return radial_ratio(radial, params, PowerProfile{window, delta}, rho_in, rho_out);
  }
  return radial_ratio(radial, params, LogProfile{window}, rho_in, rho_out);
}

inline std::pair<double, double> family_ratio_pipeline(const ManifoldChart& chart,
                                                       const FieldSpec& field,
                                                       const CKNParams& params,
                                                       const ExtremalFamily& family, double delta,
                                                       double rho_in, double rho_out,
                                                       const QuadratureScheme& scheme) {
  const TestFunction u =
      family.kind == ExtremalFamily::Kind::power_cutoff
          ? power_cutoff(chart, field, delta, rho_in, rho_out, family.smoothing)
          : log_cutoff(chart, field, rho_in, rho_out, family.smoothing);
  const InequalityReport rep = evaluate_ckn(chart, field, u, params, scheme);
  return {rep.ratio, rep.slack};
}

// Derivative-free 1D maximization of f over [lo, hi].
template <class F>
double golden_section_max(F&& f, double lo, double hi, int iterations = 20) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - gr * (hi - lo);
  double d = lo + gr * (hi - lo);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - gr * (hi - lo);
      fc = f(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + gr * (hi - lo);
      fd = f(d);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

inline SharpnessStudy sweep(const ManifoldChart& chart, const FieldSpec& field,
                            const CKNParams& params, const ExtremalFamily& family,
                            const std::vector<double>& R_values,
                            const std::vector<double>& delta_values,
                            const QuadratureScheme& scheme,
                            const RadialReduction* radial = nullptr, int threads = 1) {
  params.validate();
  {
    std::vector<double> distinct = R_values;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 3)
      throw FitIllConditioned("sweep: at least 3 distinct R values required for the deficit fit");
  }
  const bool power = family.kind == ExtremalFamily::Kind::power_cutoff;
  if (power && delta_values.empty())
    throw ParameterOutOfRange("sweep: delta_values must be nonempty for the power family");

  SharpnessStudy study;
  study.params = params;
  study.family = family;
  study.used_radial_path = radial != nullptr;

  if (sharp_constant_ckn(chart.n, params) == 0.0) {
    study.degenerate = true;
    for (double R : R_values) study.samples.push_back({R, 0.0, 0.0, 0.0});
    return study;
  }

  auto ratio_at = [&](double delta, double rho_out) -> std::pair<double, double> {
    if (radial) {
      return detail::family_ratio_radial(*radial, params, family, delta, family.rho_in, rho_out);
    }
    return detail::family_ratio_pipeline(chart, field, params, family, delta, family.rho_in,
                                         rho_out, scheme);
  };

  study.samples.resize(R_values.size());
  parallel_for_index(R_values.size(), threads, [&](std::size_t ri) {
    const double R = R_values[ri];
    const double rho_out = family.rho_in * R;
    if (radial && (rho_out > radial->r_max || family.rho_in < radial->r_min))
      throw SupportOutsideChart("sweep: annulus does not fit the radial range of the chart");

    SharpnessSample sample;
    sample.R = R;
    if (!power) {
      auto [ratio, slack] = ratio_at(0.0, rho_out);
      sample.ratio = ratio;
      sample.slack = slack;
    } else {
      std::size_t best = 0;
      double best_ratio = -1.0;
      for (std::size_t di = 0; di < delta_values.size(); ++di) {
        auto [ratio, slack] = ratio_at(delta_values[di], rho_out);
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best = di;
        }
      }
      // refine around the grid maximum
      const double step = delta_values.size() > 1
                              ? (delta_values.back() - delta_values.front()) /
                                    static_cast<double>(delta_values.size() - 1)
                              : 0.5;
      const double lo = delta_values[best] - std::abs(step);
      const double hi = delta_values[best] + std::abs(step);
      const double delta_star = detail::golden_section_max(
          [&](double d) { return ratio_at(d, rho_out).first; }, lo, hi, 20);
      auto [ratio, slack] = ratio_at(delta_star, rho_out);
      sample.delta = delta_star;
      sample.ratio = ratio;
      sample.slack = slack;
    }
    study.samples[ri] = sample;
  });

  study.best_ratio = 0.0;
  for (const auto& s : study.samples) study.best_ratio = std::max(study.best_ratio, s.ratio);

  // least-squares fit of 1 - ratio = c0 + c1 / log R
  {
    double sxx = 0.0, sx = 0.0, sy = 0.0, sxy = 0.0;
    const double m = static_cast<double>(study.samples.size());
    for (const auto& s : study.samples) {
      const double x = 1.0 / std::log(s.R);
      const double y = 1.0 - s.ratio;
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double det = m * sxx - sx * sx;
    if (std::abs(det) < 1e-14 * std::max(1.0, m * sxx))
      throw FitIllConditioned("sweep: deficit fit is singular (R values too close)");
    study.deficit_fit.c1 = (m * sxy - sx * sy) / det;
    study.deficit_fit.c0 = (sy - study.deficit_fit.c1 * sx) / m;
    double ss_res = 0.0, ss_tot = 0.0;
    const double mean_y = sy / m;
    for (const auto& s : study.samples) {
      const double x = 1.0 / std::log(s.R);
      const double y = 1.0 - s.ratio;
      const double fit = study.deficit_fit.c0 + study.deficit_fit.c1 * x;
      ss_res += (y - fit) * (y - fit);
      ss_tot += (y - mean_y) * (y - mean_y);
    }
    study.deficit_fit.r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
    study.extrapolated_limit = 1.0 - study.deficit_fit.c0;
  }

  // cross-check the radial path against the n-dimensional pipeline once
  if (radial) {
    std::size_t smallest = 0;
    for (std::size_t i = 1; i < study.samples.size(); ++i) {
      if (study.samples[i].R < study.samples[smallest].R) smallest = i;
    }
    const SharpnessSample& s = study.samples[smallest];
    study.crosscheck_radial = s.ratio;
    study.crosscheck_ndim =
        detail::family_ratio_pipeline(chart, field, params, family, s.delta, family.rho_in,
                                      family.rho_in * s.R, scheme)
            .first;
    study.crosscheck_rel = rel_diff(study.crosscheck_radial, study.crosscheck_ndim);
  }
  return study;
}

}  // namespace ckn
