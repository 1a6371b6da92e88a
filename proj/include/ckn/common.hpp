#pragma once

// Shared infrastructure for the manifold inequality toolkit: fixed-capacity
// linear algebra aliases (chart dimensions 2..4), the error taxonomy, axis
// aligned coordinate boxes and a few numeric utilities used across modules.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ckn {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kMaxDim = 4;
inline constexpr int kMinDim = 2;

// All dense objects are heap-free: dynamic size with compile-time capacity 4.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim, kMaxDim>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMetric : public Error {
 public:
  using Error::Error;
};
class TooCloseToZeroSet : public Error {
 public:
  using Error::Error;
};
class NonFiniteIntegrand : public Error {
 public:
  using Error::Error;
};
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};
class SupportOutsideChart : public Error {
 public:
  using Error::Error;
};
class DegenerateAnnulus : public Error {
 public:
  using Error::Error;
};
class DivergenceNotPositive : public Error {
 public:
  using Error::Error;
};
class NotHomothety : public Error {
 public:
  using Error::Error;
};
class ParamConditionViolated : public Error {
 public:
  using Error::Error;
};
class NonIntegrableWeight : public Error {
 public:
  using Error::Error;
};
class ParameterOutOfRange : public Error {
 public:
  using Error::Error;
};
class FitIllConditioned : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Axis-aligned coordinate box.
struct Box {
  Vec lo;
  Vec hi;

  int dim() const { return static_cast<int>(lo.size()); }

  bool contains(const Vec& x) const {
    for (int i = 0; i < dim(); ++i) {
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    }
    return true;
  }

  Vec center() const { return 0.5 * (lo + hi); }
  Vec widths() const { return hi - lo; }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
    return v;
  }

  // Euclidean diagonal; the chart-scale reference length for thresholds.
  double diameter() const { return (hi - lo).norm(); }

  bool valid() const {
    if (lo.size() != hi.size() || lo.size() == 0) return false;
    for (int i = 0; i < dim(); ++i) {
      if (!(lo[i] < hi[i])) return false;
    }
    return true;
  }

  static Box intersect(const Box& a, const Box& b) {
    Box r;
    r.lo = a.lo.cwiseMax(b.lo);
    r.hi = a.hi.cwiseMin(b.hi);
    return r;
  }

  bool is_empty() const {
    for (int i = 0; i < dim(); ++i) {
      if (!(lo[i] < hi[i])) return true;
    }
    return false;
  }
};

inline Box make_box(std::initializer_list<double> lo, std::initializer_list<double> hi) {
  Box b;
  b.lo.resize(static_cast<int>(lo.size()));
  b.hi.resize(static_cast<int>(hi.size()));
  int i = 0;
  for (double v : lo) b.lo[i++] = v;
  i = 0;
  for (double v : hi) b.hi[i++] = v;
  return b;
}

inline Box centered_cube(int n, double half_width) {
  Box b;
  b.lo = Vec::Constant(n, -half_width);
  b.hi = Vec::Constant(n, half_width);
  return b;
}

// Deterministic pairwise (tree) summation; bit-stable for a fixed operand order.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() == 0) return 0.0;
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

// Surface measure of the unit (n-1)-sphere in R^n: 2 pi^{n/2} / Gamma(n/2).
inline double unit_sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

// Volume of the unit n-ball.
inline double unit_ball_volume(int n) { return unit_sphere_area(n) / n; }

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

// Runs f(i) for i in [0, count), split over `threads` workers. Callers write
// results by index; reductions stay deterministic as long as they are order
// independent (max/min) or performed after the join in index order. The first
// exception thrown by any worker is rethrown after the join.
template <class F>
void parallel_for_index(std::size_t count, int threads, F&& f) {
  if (threads <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) f(i);
    return;
  }
  const int workers = static_cast<int>(std::min<std::size_t>(threads, count));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (std::size_t i = static_cast<std::size_t>(w); i < count;
             i += static_cast<std::size_t>(workers))
          f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace ckn
