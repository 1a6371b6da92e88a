#pragma once

// JSON views of the report types. Field names are part of the stable report
// schema (see docs/schemas.md); bump kSchemaVersion when either changes.

#include "ckn/fields.hpp"
#include "ckn/inequalities.hpp"
#include "ckn/sharpness.hpp"

#include <json.hpp>

namespace ckn {

inline constexpr int kSchemaVersion = 1;

using json = nlohmann::json;

namespace detail {
inline json finite_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}
}  // namespace detail

inline void to_json(json& j, const ConformalReport& r) {
  j = json{{"max_deficit", r.max_deficit},
           {"mu_min", detail::finite_or_null(r.mu_min)},
           {"mu_max", detail::finite_or_null(r.mu_max)},
           {"div_h_min", detail::finite_or_null(r.div_h_min)},
           {"is_conformal", r.is_conformal},
           {"is_homothety", r.is_homothety},
           {"tol", r.tol},
           {"grid_resolution", r.grid_resolution},
           {"points_sampled", r.points_sampled},
           {"points_excised", r.points_excised}};
}

inline void to_json(json& j, const IdentityCheck& c) {
  j = json{{"lhs", c.lhs}, {"rhs", c.rhs}, {"abs_err", c.abs_err}};
}

inline void to_json(json& j, const CKNParams& p) {
  j = json{{"a", p.a}, {"b", p.b}, {"p", p.p}, {"q", p.q()}};
}

inline void to_json(json& j, const XiaParams& p) {
  j = json{{"alpha", p.alpha}, {"beta", p.beta}, {"gamma", p.gamma},
           {"r", p.r},         {"p", p.p},       {"q", p.q()}};
}

inline void to_json(json& j, const QuadratureScheme& s) {
  j = json{{"kind", s.kind == QuadKind::tensor_gauss ? "tensor_gauss" : "adaptive_subdivision"},
           {"points_per_axis", s.points_per_axis},
           {"max_depth", s.max_depth},
           {"rel_tol", s.rel_tol},
           {"excision_radius", s.excision_radius}};
}

inline void to_json(json& j, const IntegralResult& r) {
  j = json{{"value", r.value},
           {"error_estimate", r.error_estimate},
           {"excised_volume_fraction", r.excised_volume_fraction},
           {"scheme", r.scheme_echo}};
}

inline void to_json(json& j, const InequalityReport& r) {
  j = json{{"inequality", r.inequality},
           {"lhs", r.lhs},
           {"rhs", r.rhs},
           {"constant", r.constant},
           {"ratio", r.ratio},
           {"margin", r.margin},
           {"slack", r.slack},
           {"quadrature_errors", r.quadrature_errors},
           {"verdict", r.verdict ? "pass" : "fail"}};
}

inline void to_json(json& j, const ProofTrace& t) {
  j = json{{"ipp_integral", t.ipp_integral},
           {"weighted_mass", t.weighted_mass},
           {"signed_constant", t.signed_constant},
           {"residual_abs", t.residual_abs},
           {"residual_rel", t.residual_rel},
           {"station_i", t.station_i},
           {"station_ii", t.station_ii},
           {"station_iii", t.station_iii},
           {"monotone_ok", t.monotone_ok},
           {"quadrature_errors", t.quadrature_errors}};
}

inline void to_json(json& j, const CostaReport& r) {
  j = json{{"t_values", r.t_values},
           {"quad_values", r.quad_values},
           {"coeff_a", r.coeff_a},
           {"coeff_b", r.coeff_b},
           {"coeff_d", r.coeff_d},
           {"cross_term", r.cross_term},
           {"optimal_t", r.optimal_t},
           {"discriminant_ratio", r.discriminant_ratio},
           {"nonnegative", r.nonnegative},
           {"bound_ok", r.bound_ok},
           {"slack", r.slack},
           {"quadrature_errors", r.quadrature_errors}};
}

inline void to_json(json& j, const SharpnessSample& s) {
  j = json{{"R", s.R}, {"delta", s.delta}, {"ratio", s.ratio}, {"slack", s.slack}};
}

inline void to_json(json& j, const ExtremalFamily& f) {
  j = json{{"kind", f.kind == ExtremalFamily::Kind::power_cutoff ? "power_cutoff" : "log_cutoff"},
           {"rho_in", f.rho_in},
           {"smoothing", f.smoothing}};
}

inline void to_json(json& j, const SharpnessStudy& s) {
  j = json{{"params", s.params},
           {"family", s.family},
           {"samples", s.samples},
           {"best_ratio", s.best_ratio},
           {"deficit_fit",
            json{{"c0", s.deficit_fit.c0}, {"c1", s.deficit_fit.c1}, {"r2", s.deficit_fit.r2}}},
           {"extrapolated_limit", s.extrapolated_limit},
           {"degenerate", s.degenerate},
           {"used_radial_path", s.used_radial_path},
           {"crosscheck",
            json{{"radial", s.crosscheck_radial},
                 {"ndim", s.crosscheck_ndim},
                 {"rel_diff", s.crosscheck_rel}}}};
}

}  // namespace ckn
