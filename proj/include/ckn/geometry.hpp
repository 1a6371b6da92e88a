#pragma once

// Coordinate-chart Riemannian geometry: metric algebra, Levi-Civita
// connection, covariant differential operators and the volume element.
//
// Index conventions used throughout:
//   metric(x)            g_ij          symmetric, positive definite
//   metric_jacobian(x)   d[k](i,j)     = \partial_k g_ij
//   field jacobian(x)    J(i,j)        = \partial_j h^i
//   christoffel          gamma[k](i,j) = Gamma^k_ij (symmetric in i,j)

#include "ckn/common.hpp"

#include <optional>
#include <random>

namespace ckn {

// Partial derivatives of the metric components, one matrix per axis.
struct MetricDerivs {
  int n = 0;
  std::array<Mat, kMaxDim> d{};

  Mat& operator[](int k) { return d[static_cast<std::size_t>(k)]; }
  const Mat& operator[](int k) const { return d[static_cast<std::size_t>(k)]; }

  static MetricDerivs zero(int n) {
    MetricDerivs m;
    m.n = n;
    for (int k = 0; k < n; ++k) m.d[static_cast<std::size_t>(k)] = Mat::Zero(n, n);
    return m;
  }
};

struct ChristoffelSymbols {
  int n = 0;
  std::array<Mat, kMaxDim> gamma{};  // gamma[k](i,j) = Gamma^k_ij

  const Mat& operator[](int k) const { return gamma[static_cast<std::size_t>(k)]; }
};

using MetricFn = std::function<Mat(const Vec&)>;
using MetricJacFn = std::function<MetricDerivs(const Vec&)>;

struct ManifoldChart {
  int n = 0;
  Box domain;
  MetricFn metric;
  MetricJacFn metric_jacobian;
  std::string label;

  // Audited construction for untrusted inputs (manifest files, user code):
  // checks symmetry, positive definiteness and the analytic jacobian against
  // central differences at `samples` deterministic random points.
  static ManifoldChart validated(int n, Box domain, MetricFn metric, MetricJacFn metric_jacobian,
                                 std::string label, int samples = 16, std::uint64_t seed = 20090615);
};

// Known zero locations of a vector field, consumed by quadrature excision.
// `origin_ray` marks fields like r d/dr on a cone whose zero set is only
// approached at the r -> 0 chart boundary.
struct ZeroSet {
  std::vector<Vec> points;
  bool origin_ray = false;

  bool empty() const { return points.empty() && !origin_ray; }
};

struct FieldSpec {
  int n = 0;
  std::function<Vec(const Vec&)> components;       // h^i(x)
  std::function<Mat(const Vec&)> jacobian;         // J(i,j) = \partial_j h^i
  ZeroSet zero_set;
  std::string label;
  // Optional sharp support bound for level sets of |h|: returns a coordinate
  // box containing { rho_lo <= |h|_g <= rho_hi }. Catalog fields provide it;
  // generic fields may leave it unset (the chart box is used instead).
  std::function<Box(double, double)> level_box;

  static FieldSpec validated(int n, std::function<Vec(const Vec&)> components,
                             std::function<Mat(const Vec&)> jacobian, ZeroSet zeros,
                             std::string label, const ManifoldChart& chart, int samples = 16,
                             std::uint64_t seed = 20090615);
};

// Contravariant symmetric 2-tensor, stored as the upper triangle so the
// symmetry T^{ij} = T^{ji} is exact by construction.
struct SymTensor2Up {
  int n = 0;
  std::array<double, 10> upper{};  // (i <= j), row-major over the triangle

  static int tri_index(int i, int j, int n) {
    // i <= j required
    return i * n - i * (i - 1) / 2 + (j - i);
  }

  double operator()(int i, int j) const {
    if (i > j) std::swap(i, j);
    return upper[static_cast<std::size_t>(tri_index(i, j, n))];
  }

  void set(int i, int j, double v) {
    if (i > j) std::swap(i, j);
    upper[static_cast<std::size_t>(tri_index(i, j, n))] = v;
  }

  Mat to_matrix() const {
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double v = (*this)(i, j);
        s += v * v;
      }
    return std::sqrt(s);
  }

  static SymTensor2Up from_matrix(const Mat& m) {
    SymTensor2Up t;
    t.n = static_cast<int>(m.rows());
    for (int i = 0; i < t.n; ++i)
      for (int j = i; j < t.n; ++j) t.set(i, j, m(i, j));
    return t;
  }
};

namespace detail {

inline Eigen::LLT<Mat> metric_llt(const ManifoldChart& chart, const Vec& x) {
  const Mat g = chart.metric(x);
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) {
    throw SingularMetric("metric not positive definite at sampled point (chart '" + chart.label +
                         "')");
  }
  return llt;
}

}  // namespace detail

inline Mat inverse_metric(const ManifoldChart& chart, const Vec& x) {
  auto llt = detail::metric_llt(chart, x);
  return llt.solve(Mat::Identity(chart.n, chart.n));
}

inline double volume_element(const ManifoldChart& chart, const Vec& x) {
  auto llt = detail::metric_llt(chart, x);
  // det g = prod(diag L)^2 for g = L L^T
  double root = 1.0;
  for (int i = 0; i < chart.n; ++i) root *= llt.matrixLLT()(i, i);
  return root;
}

inline ChristoffelSymbols christoffel(const ManifoldChart& chart, const Vec& x) {
  const int n = chart.n;
  const Mat ginv = inverse_metric(chart, x);
  const MetricDerivs dg = chart.metric_jacobian(x);
  ChristoffelSymbols c;
  c.n = n;
  for (int k = 0; k < n; ++k) {
    Mat gk = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int m = 0; m < n; ++m) {
          s += ginv(k, m) * (dg[i](m, j) + dg[j](i, m) - dg[m](i, j));
        }
        const double v = 0.5 * s;
        gk(i, j) = v;
        gk(j, i) = v;  // lower-index symmetry exact by construction
      }
    }
    c.gamma[static_cast<std::size_t>(k)] = gk;
  }
  return c;
}

// d_k log sqrt(det g) = (1/2) tr(g^{-1} d_k g); used by the density-form
// divergence, which needs no Christoffel symbols.
inline Vec log_volume_gradient(const ManifoldChart& chart, const Vec& x) {
  const int n = chart.n;
  const Mat ginv = inverse_metric(chart, x);
  const MetricDerivs dg = chart.metric_jacobian(x);
  Vec out(n);
  for (int k = 0; k < n; ++k) out[k] = 0.5 * (ginv * dg[k]).trace();
  return out;
}

namespace detail {

inline double divergence_connection_form(const ManifoldChart& chart, const FieldSpec& field,
                                         const Vec& x) {
  const int n = chart.n;
  const Mat jac = field.jacobian(x);
  const Vec h = field.components(x);
  const ChristoffelSymbols c = christoffel(chart, x);
  double div = 0.0;
  for (int i = 0; i < n; ++i) div += jac(i, i);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) div += c[i](i, k) * h[k];
  return div;
}

inline double divergence_density_form(const ManifoldChart& chart, const FieldSpec& field,
                                      const Vec& x) {
  const int n = chart.n;
  const Mat jac = field.jacobian(x);
  const Vec h = field.components(x);
  const Vec dlog = log_volume_gradient(chart, x);
  double div = 0.0;
  for (int i = 0; i < n; ++i) div += jac(i, i);
  div += dlog.dot(h);
  return div;
}

}  // namespace detail

inline double covariant_divergence(const ManifoldChart& chart, const FieldSpec& field,
                                   const Vec& x) {
  const double div = detail::divergence_density_form(chart, field, x);
#ifndef NDEBUG
  {
    const double conn = detail::divergence_connection_form(chart, field, x);
    const double scale = std::max({std::abs(div), std::abs(conn), 1.0});
    if (std::abs(div - conn) > 1e-10 * scale) {
      throw Error("covariant_divergence: density and connection forms disagree");
    }
  }
#endif
  return div;
}

inline Mat covariant_deriv_up(const ManifoldChart& chart, const FieldSpec& field, const Vec& x) {
  const int n = chart.n;
  const Mat ginv = inverse_metric(chart, x);
  const Mat jac = field.jacobian(x);
  const Vec h = field.components(x);
  const ChristoffelSymbols c = christoffel(chart, x);
  // nabla_k h^j = d_k h^j + Gamma^j_km h^m
  Mat nabla_down(n, n);  // (k, j)
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      double v = jac(j, k);
      for (int m = 0; m < n; ++m) v += c[j](k, m) * h[m];
      nabla_down(k, j) = v;
    }
  }
  return ginv * nabla_down;  // (i, j) = g^{ik} nabla_k h^j
}

inline double field_norm(const ManifoldChart& chart, const FieldSpec& field, const Vec& x) {
  const Vec h = field.components(x);
  const Mat g = chart.metric(x);
  const double sq = h.dot(g * h);
  return sq > 0.0 ? std::sqrt(sq) : 0.0;
}

// Norm of a covector (e.g. a function differential du): sqrt(g^{ij} w_i w_j).
inline double covector_norm(const ManifoldChart& chart, const Vec& w, const Vec& x) {
  const Mat ginv = inverse_metric(chart, x);
  const double sq = w.dot(ginv * w);
  return sq > 0.0 ? std::sqrt(sq) : 0.0;
}

// ---------------------------------------------------------------------------
// Audited construction

namespace detail {

inline Vec random_interior_point(const Box& box, std::mt19937_64& rng, double margin_frac = 0.05) {
  const int n = box.dim();
  Vec x(n);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double w = box.hi[i] - box.lo[i];
    x[i] = box.lo[i] + w * (margin_frac + (1.0 - 2.0 * margin_frac) * unit(rng));
  }
  return x;
}

}  // namespace detail

inline ManifoldChart ManifoldChart::validated(int n, Box domain, MetricFn metric,
                                              MetricJacFn metric_jacobian, std::string label,
                                              int samples, std::uint64_t seed) {
  if (n < kMinDim || n > kMaxDim) throw ParameterOutOfRange("chart dimension must be in [2, 4]");
  if (!domain.valid() || domain.dim() != n) throw ParameterOutOfRange("invalid chart box");
  ManifoldChart chart{n, std::move(domain), std::move(metric), std::move(metric_jacobian),
                      std::move(label)};

  std::mt19937_64 rng(seed);
  const double fd_step = 1e-5;
  for (int s = 0; s < samples; ++s) {
    const Vec x = detail::random_interior_point(chart.domain, rng);
    const Mat g = chart.metric(x);
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, g.cwiseAbs().maxCoeff()))
      throw ParameterOutOfRange("metric is not symmetric at sample point (chart '" + chart.label +
                                "')");
    detail::metric_llt(chart, x);  // throws SingularMetric if not PD

    const MetricDerivs dg = chart.metric_jacobian(x);
    for (int k = 0; k < n; ++k) {
      Vec xp = x, xm = x;
      xp[k] += fd_step;
      xm[k] -= fd_step;
      const Mat fd = (chart.metric(xp) - chart.metric(xm)) / (2.0 * fd_step);
      const double scale = std::max(1.0, fd.norm());
      if ((fd - dg[k]).norm() > 1e-5 * scale)
        throw ParameterOutOfRange("metric_jacobian disagrees with finite differences (chart '" +
                                  chart.label + "', axis " + std::to_string(k) + ")");
    }
  }
  return chart;
}

inline FieldSpec FieldSpec::validated(int n, std::function<Vec(const Vec&)> components,
                                      std::function<Mat(const Vec&)> jacobian, ZeroSet zeros,
                                      std::string label, const ManifoldChart& chart, int samples,
                                      std::uint64_t seed) {
  if (n != chart.n) throw ParameterOutOfRange("field dimension does not match chart");
  FieldSpec f;
  f.n = n;
  f.components = std::move(components);
  f.jacobian = std::move(jacobian);
  f.zero_set = std::move(zeros);
  f.label = std::move(label);

  std::mt19937_64 rng(seed);
  const double fd_step = 1e-5;
  for (int s = 0; s < samples; ++s) {
    const Vec x = detail::random_interior_point(chart.domain, rng);
    const Mat jac = f.jacobian(x);
    for (int k = 0; k < n; ++k) {
      Vec xp = x, xm = x;
      xp[k] += fd_step;
      xm[k] -= fd_step;
      const Vec fd = (f.components(xp) - f.components(xm)) / (2.0 * fd_step);
      const double scale = std::max(1.0, fd.norm());
      if ((fd - jac.col(k)).norm() > 1e-5 * scale)
        throw ParameterOutOfRange("field jacobian disagrees with finite differences (field '" +
                                  f.label + "', axis " + std::to_string(k) + ")");
    }
  }
  for (const Vec& z : f.zero_set.points) {
    if (field_norm(chart, f, z) >= 1e-12)
      throw ParameterOutOfRange("listed zero of field '" + f.label + "' has |h| >= 1e-12");
  }
  return f;
}

}  // namespace ckn
