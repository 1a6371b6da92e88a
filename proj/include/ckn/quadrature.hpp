#pragma once

// Numerical integration against the Riemannian volume form over chart boxes,
// with coordinate-ball excision around field zeros and an epsilon -> 0 limit
// study for singular weights.
//
// Two schemes: a tensor Gauss-Legendre rule for smooth singularity-free
// integrands (error estimated from the N vs N+2 point rules), and adaptive
// 2^n subdivision with an embedded G4/G6 pair per cell. Gauss nodes are
// interior and even-order, so no evaluation ever lands on a cell boundary or
// a cell center; an isolated singularity on a dyadic grid line cannot
// produce NaN.

#include "ckn/geometry.hpp"

#include <map>
#include <mutex>
#include <queue>

namespace ckn {

enum class QuadKind { tensor_gauss, adaptive_subdivision };

struct QuadratureScheme {
  QuadKind kind = QuadKind::adaptive_subdivision;
  int points_per_axis = 8;       // tensor_gauss only
  int max_depth = 12;            // adaptive only
  double rel_tol = 1e-6;         // adaptive only
  double excision_radius = 0.0;  // coordinate-ball radius removed around zeros

  void validate() const {
    if (points_per_axis < 2) throw ParameterOutOfRange("quadrature: points_per_axis must be >= 2");
    if (rel_tol <= 0.0) throw ParameterOutOfRange("quadrature: rel_tol must be > 0");
    if (excision_radius < 0.0) throw ParameterOutOfRange("quadrature: excision_radius must be >= 0");
    if (max_depth < 0) throw ParameterOutOfRange("quadrature: max_depth must be >= 0");
  }
};

struct IntegralResult {
  double value = 0.0;
  double error_estimate = 0.0;               // difference of the two finest levels
  double excised_volume_fraction = 0.0;      // measure(excision in box) / measure(box)
  QuadratureScheme scheme_echo;
};

// Scalar integrand in chart coordinates; the volume element is applied by the
// integrator.
using Integrand = std::function<double(const Vec&)>;
// Vector integrand: writes m values at x into `out`; lets callers share the
// per-point geometry work across the integrals of one report.
using VectorIntegrand = std::function<void(const Vec&, std::span<double>)>;

// ---------------------------------------------------------------------------
// Gauss-Legendre nodes (Newton on the Legendre recurrence), cached per order.

struct GaussRule {
  std::vector<double> x;  // nodes on (-1, 1)
  std::vector<double> w;
};

inline const GaussRule& gauss_legendre(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  GaussRule rule;
  rule.x.resize(static_cast<std::size_t>(n));
  rule.w.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.x[static_cast<std::size_t>(i)] = -x;  // ascending order
    rule.w[static_cast<std::size_t>(i)] = w;
    rule.x[static_cast<std::size_t>(n - 1 - i)] = x;
    rule.w[static_cast<std::size_t>(n - 1 - i)] = w;
  }
  auto [pos, inserted] = cache.emplace(n, std::move(rule));
  return pos->second;
}

// ---------------------------------------------------------------------------
// Excision bookkeeping

namespace detail {

struct ExcisionCheck {
  const ZeroSet* zeros = nullptr;
  double radius = 0.0;

  bool active() const { return radius > 0.0 && zeros != nullptr && !zeros->empty(); }

  bool excised(const Vec& x) const {
    if (!active()) return false;
    for (const Vec& z : zeros->points) {
      if ((x - z).norm() <= radius) return true;
    }
    // origin-ray zeros live at first-coordinate -> 0
    if (zeros->origin_ray && x[0] <= radius) return true;
    return false;
  }
};

inline double halton(std::uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  for (std::uint64_t i = index + 1; i > 0; i /= static_cast<std::uint64_t>(base)) {
    f /= base;
    r += f * static_cast<double>(i % static_cast<std::uint64_t>(base));
  }
  return r;
}

// measure(ball(center, radius) intersect box). Exact for interior balls,
// quasi Monte Carlo (deterministic Halton) for clipped ones.
inline double ball_box_volume(const Vec& center, double radius, const Box& box) {
  const int n = box.dim();
  bool interior = true;
  for (int i = 0; i < n && interior; ++i) {
    interior = center[i] - radius >= box.lo[i] && center[i] + radius <= box.hi[i];
  }
  if (interior) return unit_ball_volume(n) * std::pow(radius, n);

  Box bbox;
  bbox.lo = center.array() - radius;
  bbox.hi = center.array() + radius;
  const Box clip = Box::intersect(bbox, box);
  if (clip.is_empty()) return 0.0;

  static constexpr int kBases[kMaxDim] = {2, 3, 5, 7};
  const std::uint64_t samples = 200000;
  std::uint64_t inside = 0;
  Vec x(n);
  for (std::uint64_t s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) {
      x[i] = clip.lo[i] + (clip.hi[i] - clip.lo[i]) * halton(s, kBases[i]);
    }
    if ((x - center).norm() <= radius) ++inside;
  }
  return clip.volume() * static_cast<double>(inside) / static_cast<double>(samples);
}

inline double excised_fraction(const ExcisionCheck& ex, const Box& box) {
  if (!ex.active()) return 0.0;
  double vol = 0.0;
  for (const Vec& z : ex.zeros->points) vol += ball_box_volume(z, ex.radius, box);
  if (ex.zeros->origin_ray && box.lo[0] < ex.radius) {
    double slab = std::min(ex.radius, box.hi[0]) - box.lo[0];
    for (int i = 1; i < box.dim(); ++i) slab *= box.hi[i] - box.lo[i];
    vol += slab;
  }
  return std::min(1.0, vol / box.volume());
}

// Applies an m-component tensor Gauss rule over `cell`, accumulating
// integrand * sqrt(det g). Throws NonFiniteIntegrand on NaN/Inf outside the
// excision region.
inline void tensor_rule_apply(const ManifoldChart& chart, const VectorIntegrand& f, int m,
                              const Box& cell, int order, const ExcisionCheck& ex,
                              std::span<double> out) {
  const int n = chart.n;
  const GaussRule& rule = gauss_legendre(order);
  for (int i = 0; i < m; ++i) out[i] = 0.0;

  std::array<int, kMaxDim> idx{};
  std::array<double, 8> fx{};
  Vec x(n);
  const Vec half = 0.5 * (cell.hi - cell.lo);
  const Vec mid = 0.5 * (cell.hi + cell.lo);
  double cell_jacobian = 1.0;
  for (int i = 0; i < n; ++i) cell_jacobian *= half[i];

  bool done = false;
  while (!done) {
    double w = cell_jacobian;
    for (int i = 0; i < n; ++i) {
      x[i] = mid[i] + half[i] * rule.x[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      w *= rule.w[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
    }
    if (!ex.excised(x)) {
      const double dv = volume_element(chart, x);
      f(x, std::span<double>(fx.data(), static_cast<std::size_t>(m)));
      for (int i = 0; i < m; ++i) {
        const double v = fx[static_cast<std::size_t>(i)];
        if (!std::isfinite(v)) {
          throw NonFiniteIntegrand("non-finite integrand outside excision region");
        }
        out[i] += w * dv * v;
      }
    }
    // advance multi-index
    done = true;
    for (int i = 0; i < n; ++i) {
      auto& ii = idx[static_cast<std::size_t>(i)];
      if (++ii < order) {
        done = false;
        break;
      }
      ii = 0;
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Main entry points

// Integrates m integrands simultaneously over `domain` (defaults to the chart
// box) against the volume form. Deterministic for a fixed scheme: cell pop
// order is tie-broken by creation index and final sums are pairwise over
// leaves in creation order.
inline std::vector<IntegralResult> integrate_many(const ManifoldChart& chart, int m,
                                                  const VectorIntegrand& f,
                                                  const QuadratureScheme& scheme,
                                                  const ZeroSet* zeros = nullptr,
                                                  const Box* domain = nullptr,
                                                  bool allow_unconverged = false) {
  scheme.validate();
  if (m < 1 || m > 8) throw ParameterOutOfRange("integrate_many: m must be in [1, 8]");
  const Box box = domain ? Box::intersect(*domain, chart.domain) : chart.domain;

  std::vector<IntegralResult> results(static_cast<std::size_t>(m));
  for (auto& r : results) r.scheme_echo = scheme;
  if (box.is_empty()) return results;

  detail::ExcisionCheck ex{zeros, scheme.excision_radius};
  const double excised_frac = detail::excised_fraction(ex, box);
  for (auto& r : results) r.excised_volume_fraction = excised_frac;

  if (scheme.kind == QuadKind::tensor_gauss) {
    std::array<double, 8> lo{}, hi{};
    detail::tensor_rule_apply(chart, f, m, box, scheme.points_per_axis, ex,
                              std::span<double>(lo.data(), static_cast<std::size_t>(m)));
    detail::tensor_rule_apply(chart, f, m, box, scheme.points_per_axis + 2, ex,
                              std::span<double>(hi.data(), static_cast<std::size_t>(m)));
    for (int i = 0; i < m; ++i) {
      results[static_cast<std::size_t>(i)].value = hi[static_cast<std::size_t>(i)];
      results[static_cast<std::size_t>(i)].error_estimate =
          std::abs(hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]);
    }
    return results;
  }

  // adaptive_subdivision: embedded even-order pair per cell (even orders keep
  // nodes off cell centers, where planted singularities live). Cells bisect
  // along ONE axis, chosen by a second-difference variation indicator, so
  // refinement forms thin slabs aligned with sheet-like features (cutoff
  // shells) instead of cubing them isotropically. `max_depth` caps the number
  // of bisections PER AXIS, i.e. the finest cell width is box_width/2^depth.
  //
  // Error accounting: the raw pair gap |G6 - G4| only drives the refinement
  // order; the reported error of a leaf is the observed parent -> children
  // jump of the fine value (the difference between the two finest refinement
  // levels), apportioned over the children by their gap share. The gap alone
  // would overstate the fine rule's error by orders of magnitude and force
  // runaway refinement.
  constexpr int kOrderLow = 4;
  constexpr int kOrderHigh = 6;
  const int n = chart.n;

  struct Cell {
    Box box;
    std::array<std::uint8_t, kMaxDim> splits{};  // bisections per axis so far
    bool refined = false;
    std::array<double, 8> fine{};
    std::array<double, 8> gap{};  // |fine - coarse|
    std::array<double, 8> err{};  // leaf error assignment
  };

  std::vector<Cell> cells;
  cells.reserve(1024);
  // max-heap on (priority, creation id); ids make pop order deterministic
  using HeapItem = std::pair<double, std::size_t>;
  std::priority_queue<HeapItem> heap;

  std::array<double, 8> total_value{}, total_err{}, total_l1{};

  auto eval_cell = [&](const Box& b, const std::array<std::uint8_t, kMaxDim>& splits) {
    Cell c;
    c.box = b;
    c.splits = splits;
    std::array<double, 8> coarse{};
    detail::tensor_rule_apply(chart, f, m, b, kOrderLow, ex,
                              std::span<double>(coarse.data(), static_cast<std::size_t>(m)));
    detail::tensor_rule_apply(chart, f, m, b, kOrderHigh, ex,
                              std::span<double>(c.fine.data(), static_cast<std::size_t>(m)));
    for (int i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      c.gap[ii] = std::abs(c.fine[ii] - coarse[ii]);
      c.err[ii] = c.gap[ii];  // a seed cell has no refinement history yet
    }
    return c;
  };

  auto priority_of = [&](const Cell& c) {
    double p = 0.0;
    for (int i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double scale = std::max({std::abs(total_value[ii]), 0.1 * total_l1[ii], 1e-300});
      p = std::max(p, c.err[ii] / scale);
    }
    return p;
  };

  auto push_cell = [&](Cell&& c) {
    for (int i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      total_value[ii] += c.fine[ii];
      total_err[ii] += c.err[ii];
      total_l1[ii] += std::abs(c.fine[ii]);
    }
    cells.push_back(std::move(c));
    heap.emplace(priority_of(cells.back()), cells.size() - 1);
  };

  auto converged = [&]() {
    for (int i = 0; i < m; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double tol =
          scheme.rel_tol * std::max(std::abs(total_value[ii]), 0.1 * total_l1[ii]);
      if (total_err[ii] > tol) return false;
    }
    return true;
  };

  // Central second differences along each axis locate the direction of
  // sharpest variation; ties and non-finite probes fall back to the longest
  // axis. Returns the axis to bisect, honoring the per-axis depth cap.
  std::array<double, 8> probe_buf{};
  auto pick_axis = [&](const Cell& c) -> int {
    const Vec mid = c.box.center();
    const Vec w = c.box.widths();
    auto probe = [&](const Vec& x) {
      double s = 0.0;
      if (ex.excised(x)) return 0.0;
      f(x, std::span<double>(probe_buf.data(), static_cast<std::size_t>(m)));
      for (int i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        const double scale = std::max({std::abs(total_value[ii]), 0.1 * total_l1[ii], 1e-300});
        if (std::isfinite(probe_buf[ii])) s += std::abs(probe_buf[ii]) / scale;
      }
      return s;
    };
    const double fc = probe(mid);
    double best_score = -1.0;
    int best_axis = -1;
    for (int i = 0; i < n; ++i) {
      if (c.splits[static_cast<std::size_t>(i)] >= scheme.max_depth) continue;
      Vec xp = mid, xm = mid;
      xp[i] += 0.25 * w[i];
      xm[i] -= 0.25 * w[i];
      const double score = std::abs(probe(xp) + probe(xm) - 2.0 * fc);
      // widen ties toward the longest splittable axis
      const double keyed = score + 1e-12 * w[i];
      if (keyed > best_score + 1e-300 || (keyed == best_score && best_axis < 0)) {
        best_score = keyed;
        best_axis = i;
      }
    }
    if (best_axis >= 0 && best_score <= 0.0) {
      // flat probes: bisect the widest splittable axis
      for (int i = 0; i < n; ++i) {
        if (c.splits[static_cast<std::size_t>(i)] >= scheme.max_depth) continue;
        if (best_axis < 0 || w[i] > w[best_axis]) best_axis = i;
      }
    }
    return best_axis;
  };

  // Seed with a uniform minimum subdivision so a narrowly supported integrand
  // cannot be missed by the root rule.
  {
    const int min_splits = n <= 3 ? 2 : 1;
    const int cells_per_axis = 1 << min_splits;
    std::array<std::uint8_t, kMaxDim> seed_splits{};
    for (int i = 0; i < n; ++i)
      seed_splits[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(min_splits);
    std::array<int, kMaxDim> idx{};
    bool done = false;
    while (!done) {
      Box b;
      b.lo.resize(n);
      b.hi.resize(n);
      for (int i = 0; i < n; ++i) {
        const double w = (box.hi[i] - box.lo[i]) / cells_per_axis;
        b.lo[i] = box.lo[i] + w * idx[static_cast<std::size_t>(i)];
        b.hi[i] = b.lo[i] + w;
      }
      push_cell(eval_cell(b, seed_splits));
      done = true;
      for (int i = 0; i < n; ++i) {
        auto& ii = idx[static_cast<std::size_t>(i)];
        if (++ii < cells_per_axis) {
          done = false;
          break;
        }
        ii = 0;
      }
    }
  }

  const std::size_t kMaxCells = 1u << 21;
  bool depth_exhausted = false;
  while (!converged() && !heap.empty()) {
    const auto [prio, id] = heap.top();
    heap.pop();
    if (cells.size() + 2 > kMaxCells) {
      throw BudgetExceeded("adaptive quadrature: cell budget exhausted before rel_tol");
    }
    const int axis = pick_axis(cells[id]);
    if (axis < 0) {
      depth_exhausted = true;  // frozen leaf: every axis at max_depth
      continue;
    }
    {
      Cell& parent = cells[id];
      parent.refined = true;
      for (int i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        total_value[ii] -= parent.fine[ii];
        total_err[ii] -= parent.err[ii];
        total_l1[ii] -= std::abs(parent.fine[ii]);
      }
    }
    const Box pbox = cells[id].box;
    std::array<std::uint8_t, kMaxDim> csplits = cells[id].splits;
    const std::array<double, 8> parent_fine = cells[id].fine;
    ++csplits[static_cast<std::size_t>(axis)];
    const double mid = 0.5 * (pbox.lo[axis] + pbox.hi[axis]);

    std::array<Cell, 2> children;
    std::array<double, 8> child_sum{}, gap_sum{};
    for (int half = 0; half < 2; ++half) {
      Box b = pbox;
      if (half == 0)
        b.hi[axis] = mid;
      else
        b.lo[axis] = mid;
      children[static_cast<std::size_t>(half)] = eval_cell(b, csplits);
      for (int i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        child_sum[ii] += children[static_cast<std::size_t>(half)].fine[ii];
        gap_sum[ii] += children[static_cast<std::size_t>(half)].gap[ii];
      }
    }
    const std::array<double, 8> parent_gap = cells[id].gap;
    for (int half = 0; half < 2; ++half) {
      Cell& c = children[static_cast<std::size_t>(half)];
      for (int i = 0; i < m; ++i) {
        const auto ii = static_cast<std::size_t>(i);
        // The jump is informative only when this split actually sharpened the
        // pair gap; a bisection along a flat axis leaves the children's gaps
        // at the parent level and a near-zero jump that must not be trusted.
        if (gap_sum[ii] <= 0.5 * parent_gap[ii]) {
          const double jump = std::abs(child_sum[ii] - parent_fine[ii]);
          const double share = gap_sum[ii] > 0.0 ? c.gap[ii] / gap_sum[ii] : 0.5;
          c.err[ii] = std::min(c.gap[ii], std::max(jump * share, 1e-3 * c.gap[ii]));
        } else {
          c.err[ii] = c.gap[ii];
        }
      }
      push_cell(std::move(c));  // may invalidate earlier references
    }
  }

  // Deterministic final reduction: pairwise sums over leaves in creation order.
  std::vector<double> leaf_vals, leaf_errs;
  leaf_vals.reserve(cells.size());
  leaf_errs.reserve(cells.size());
  for (int i = 0; i < m; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    leaf_vals.clear();
    leaf_errs.clear();
    for (const Cell& c : cells) {
      if (c.refined) continue;
      leaf_vals.push_back(c.fine[ii]);
      leaf_errs.push_back(c.err[ii]);
    }
    results[ii].value = pairwise_sum(leaf_vals);
    results[ii].error_estimate = pairwise_sum(leaf_errs);
  }

  if (depth_exhausted && !allow_unconverged) {
    bool ok = true;
    for (int i = 0; i < m && ok; ++i) {
      const auto ii = static_cast<std::size_t>(i);
      const double tol =
          scheme.rel_tol * std::max(std::abs(results[ii].value), 0.1 * total_l1[ii]);
      ok = results[ii].error_estimate <= tol;
    }
    if (!ok) {
      throw BudgetExceeded("adaptive quadrature: max_depth exhausted before rel_tol");
    }
  }
  return results;
}

inline IntegralResult integrate(const ManifoldChart& chart, const Integrand& f,
                                const QuadratureScheme& scheme, const ZeroSet* zeros = nullptr,
                                const Box* domain = nullptr, bool allow_unconverged = false) {
  auto wrap = [&f](const Vec& x, std::span<double> out) { out[0] = f(x); };
  return integrate_many(chart, 1, wrap, scheme, zeros, domain, allow_unconverged)[0];
}

// One IntegralResult per epsilon (strictly decreasing, positive). Callers use
// the sequence to confirm Cauchy convergence as eps -> 0 for integrable
// weights, or to diagnose divergence for non-integrable ones.
inline std::vector<IntegralResult> excision_limit_study(const ManifoldChart& chart,
                                                        const Integrand& f,
                                                        const QuadratureScheme& scheme,
                                                        const std::vector<double>& epsilons,
                                                        const ZeroSet* zeros = nullptr,
                                                        const Box* domain = nullptr) {
  if (epsilons.empty()) throw ParameterOutOfRange("excision_limit_study: no epsilons");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (epsilons[i] <= 0.0 || (i > 0 && epsilons[i] >= epsilons[i - 1]))
      throw ParameterOutOfRange("excision_limit_study: epsilons must be strictly decreasing, > 0");
  }
  std::vector<IntegralResult> out;
  out.reserve(epsilons.size());
  for (double eps : epsilons) {
    QuadratureScheme s = scheme;
    s.excision_radius = eps;
    out.push_back(integrate(chart, f, s, zeros, domain));
  }
  return out;
}

// ---------------------------------------------------------------------------
// 1D adaptive quadrature (radial reductions and oracles for wide annuli)

struct Result1D {
  double value = 0.0;
  double error_estimate = 0.0;
};

inline Result1D integrate_1d(const std::function<double(double)>& f, double a, double b,
                             double rel_tol = 1e-10, int max_depth = 48) {
  if (!(a < b)) throw ParameterOutOfRange("integrate_1d: need a < b");

  struct Seg {
    double lo, hi;
    int depth;
    bool refined = false;
    double coarse, fine;
  };
  auto apply = [&f](double lo, double hi, int order) {
    const GaussRule& rule = gauss_legendre(order);
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (std::size_t i = 0; i < rule.x.size(); ++i) {
      const double v = f(mid + half * rule.x[i]);
      if (!std::isfinite(v)) throw NonFiniteIntegrand("integrate_1d: non-finite integrand");
      s += half * rule.w[i] * v;
    }
    return s;
  };
  auto eval = [&](double lo, double hi, int depth) {
    Seg s{lo, hi, depth, false, 0.0, 0.0};
    s.coarse = apply(lo, hi, 6);
    s.fine = apply(lo, hi, 12);
    return s;
  };

  std::vector<Seg> segs;
  std::priority_queue<std::pair<double, std::size_t>> heap;
  double total_value = 0.0, total_err = 0.0, total_l1 = 0.0;
  auto add = [&](Seg&& s) {
    total_value += s.fine;
    total_err += std::abs(s.fine - s.coarse);
    total_l1 += std::abs(s.fine);
    segs.push_back(s);
    heap.emplace(std::abs(s.fine - s.coarse), segs.size() - 1);
  };
  // seed with 8 segments so narrow features are not missed by one rule
  for (int i = 0; i < 8; ++i) {
    const double lo = a + (b - a) * i / 8.0;
    const double hi = a + (b - a) * (i + 1) / 8.0;
    add(eval(lo, hi, 3));
  }
  auto converged = [&]() {
    return total_err <= rel_tol * std::max(std::abs(total_value), 0.1 * total_l1);
  };
  bool exhausted = false;
  while (!converged() && !heap.empty()) {
    const auto [prio, id] = heap.top();
    heap.pop();
    Seg& s = segs[id];
    if (s.depth >= max_depth) {
      exhausted = true;
      continue;
    }
    if (segs.size() > (1u << 22)) throw BudgetExceeded("integrate_1d: segment budget exhausted");
    s.refined = true;
    total_value -= s.fine;
    total_err -= std::abs(s.fine - s.coarse);
    total_l1 -= std::abs(s.fine);
    const double lo = s.lo, hi = s.hi, mid = 0.5 * (s.lo + s.hi);
    const int d = s.depth;
    add(eval(lo, mid, d + 1));  // may invalidate `s`
    add(eval(mid, hi, d + 1));
  }

  std::vector<double> vals, errs;
  for (const Seg& s : segs) {
    if (s.refined) continue;
    vals.push_back(s.fine);
    errs.push_back(std::abs(s.fine - s.coarse));
  }
  Result1D r{pairwise_sum(vals), pairwise_sum(errs)};
  if (exhausted && r.error_estimate > rel_tol * std::max(std::abs(r.value), 0.1 * total_l1)) {
    throw BudgetExceeded("integrate_1d: max_depth exhausted before rel_tol");
  }
  return r;
}

}  // namespace ckn
