#pragma once

// Experiment configuration and the four command entry points behind the CLI:
// verify-field, check-inequality, probe-sharpness, trace-proof. The JSON
// config is the archival contract; a run is fully determined by (config,
// seed). See docs/schemas.md for the schemas.

#include "ckn/serialization.hpp"

#include <chrono>
#include <random>

namespace ckn {

struct SharpnessConfig {
  ExtremalFamily family;
  std::vector<double> R_values = {10.0, 100.0, 1000.0, 10000.0};
  std::vector<double> delta_values;
};

struct ExperimentConfig {
  json raw;  // canonicalized echo of the input
  std::string catalog_name = "euclidean";
  json catalog_params = json::object();
  std::string inequality = "ckn";  // ckn | euclidean_ckn | hardy | uncertainty | xia
  CKNParams ckn_params;
  XiaParams xia_params;
  std::vector<json> functions;
  QuadratureScheme scheme;
  int classify_grid = 9;
  double classify_tol = 1e-9;
  SharpnessConfig sharpness;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_path;
};

struct RunOutcome {
  json report;
  int exit_code = 0;
  std::string summary;  // human-readable text
};

// ---------------------------------------------------------------------------
// Chart manifests: either a catalog selector or a polynomial metric given as
// monomial coefficient tables (exact jacobians are derived term by term).

struct MonomialTerm {
  int i = 0, j = 0;
  double c = 0.0;
  std::array<int, kMaxDim> powers{};
};

inline ManifoldChart chart_from_polynomial(int n, const Box& box,
                                           const std::vector<MonomialTerm>& terms,
                                           const std::string& label) {
  auto metric = [n, terms](const Vec& x) {
    Mat g = Mat::Zero(n, n);
    for (const auto& t : terms) {
      double v = t.c;
      for (int k = 0; k < n; ++k) {
        for (int e = 0; e < t.powers[static_cast<std::size_t>(k)]; ++e) v *= x[k];
      }
      g(t.i, t.j) += v;
      if (t.i != t.j) g(t.j, t.i) += v;
    }
    return g;
  };
  auto metric_jacobian = [n, terms](const Vec& x) {
    MetricDerivs d = MetricDerivs::zero(n);
    for (const auto& t : terms) {
      for (int k = 0; k < n; ++k) {
        const int pk = t.powers[static_cast<std::size_t>(k)];
        if (pk == 0) continue;
        double v = t.c * pk;
        for (int m = 0; m < n; ++m) {
          const int pm = t.powers[static_cast<std::size_t>(m)] - (m == k ? 1 : 0);
          for (int e = 0; e < pm; ++e) v *= x[m];
        }
        d[k](t.i, t.j) += v;
        if (t.i != t.j) d[k](t.j, t.i) += v;
      }
    }
    return d;
  };
  // untrusted input: run the construction-time audit
  return ManifoldChart::validated(n, box, metric, metric_jacobian, label);
}

inline CatalogEntry catalog_from_json(const std::string& name, const json& p) {
  auto get = [&p](const char* key, double fallback) {
    return p.contains(key) ? p.at(key).get<double>() : fallback;
  };
  auto get_int = [&p](const char* key, int fallback) {
    return p.contains(key) ? p.at(key).get<int>() : fallback;
  };
  if (name == "euclidean")
    return euclidean_dilation(get_int("n", 3), get("box_half_width", 2.0));
  if (name == "cone")
    return cone(get("lambda", 0.8), get("r_min", 0.5), get("r_max", 4.0),
                get("theta_max", 2.0 * std::numbers::pi));
  if (name == "conformal_flat")
    return conformal_flat(get("kappa", 0.1), get_int("n", 3), get("box_half_width", 2.0));
  if (name == "hemisphere") return hemisphere(get_int("n", 2), get("cap_angle", 1.2));
  if (name == "euclidean_nonconformal")
    return euclidean_nonconformal(get_int("n", 3), get("box_half_width", 1.0));
  throw ConfigError("unknown catalog entry '" + name + "'");
}

inline ManifoldChart chart_from_manifest(const json& manifest) {
  if (!manifest.contains("metric")) throw ConfigError("chart manifest: missing 'metric'");
  const json& metric = manifest.at("metric");
  const std::string kind = metric.value("kind", "catalog");
  if (kind == "catalog") {
    return catalog_from_json(metric.at("name").get<std::string>(),
                             metric.value("params", json::object()))
        .chart;
  }
  if (kind != "polynomial") throw ConfigError("chart manifest: unknown metric kind '" + kind + "'");

  const int n = manifest.at("dimension").get<int>();
  Box box;
  box.lo.resize(n);
  box.hi.resize(n);
  const auto& lo = manifest.at("box").at("lo");
  const auto& hi = manifest.at("box").at("hi");
  if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n)
    throw ConfigError("chart manifest: box bounds must have 'dimension' entries");
  for (int i = 0; i < n; ++i) {
    box.lo[i] = lo.at(static_cast<std::size_t>(i)).get<double>();
    box.hi[i] = hi.at(static_cast<std::size_t>(i)).get<double>();
  }
  std::vector<MonomialTerm> terms;
  for (const auto& tj : metric.at("terms")) {
    MonomialTerm t;
    t.i = tj.at("i").get<int>();
    t.j = tj.at("j").get<int>();
    t.c = tj.at("c").get<double>();
    const auto& pw = tj.at("powers");
    if (static_cast<int>(pw.size()) != n)
      throw ConfigError("chart manifest: monomial powers must have 'dimension' entries");
    for (int k = 0; k < n; ++k)
      t.powers[static_cast<std::size_t>(k)] = pw.at(static_cast<std::size_t>(k)).get<int>();
    if (t.i < 0 || t.j < 0 || t.i >= n || t.j >= n)
      throw ConfigError("chart manifest: monomial indices out of range");
    terms.push_back(t);
  }
  return chart_from_polynomial(n, box, terms, manifest.value("label", std::string("manifest")));
}

// ---------------------------------------------------------------------------
// Config parsing

inline ExperimentConfig parse_config(const json& j) {
  ExperimentConfig cfg;
  try {
    cfg.raw = j;
    if (j.contains("catalog")) {
      const json& c = j.at("catalog");
      cfg.catalog_name = c.at("name").get<std::string>();
      cfg.catalog_params = c;
      cfg.catalog_params.erase("name");
    }
    cfg.inequality = j.value("inequality", std::string("ckn"));
    if (cfg.inequality != "ckn" && cfg.inequality != "euclidean_ckn" &&
        cfg.inequality != "hardy" && cfg.inequality != "uncertainty" && cfg.inequality != "xia")
      throw ConfigError("unknown inequality selector '" + cfg.inequality + "'");

    if (j.contains("params")) {
      const json& p = j.at("params");
      if (cfg.inequality == "xia") {
        cfg.xia_params.alpha = p.value("alpha", 1.0);
        cfg.xia_params.beta = p.value("beta", 1.0);
        cfg.xia_params.gamma = p.value("gamma", 1.0 / 6.0);
        cfg.xia_params.r = p.value("r", 3.0);
        cfg.xia_params.p = p.value("p", 2.0);
      } else {
        cfg.ckn_params.a = p.value("a", 0.0);
        cfg.ckn_params.b = p.value("b", 0.0);
        cfg.ckn_params.p = p.value("p", 2.0);
      }
    }
    if (j.contains("functions")) {
      for (const auto& f : j.at("functions")) cfg.functions.push_back(f);
    }
    if (j.contains("quadrature")) {
      const json& q = j.at("quadrature");
      const std::string kind = q.value("kind", std::string("adaptive_subdivision"));
      if (kind == "tensor_gauss")
        cfg.scheme.kind = QuadKind::tensor_gauss;
      else if (kind == "adaptive_subdivision")
        cfg.scheme.kind = QuadKind::adaptive_subdivision;
      else
        throw ConfigError("unknown quadrature kind '" + kind + "'");
      cfg.scheme.points_per_axis = q.value("points_per_axis", 8);
      cfg.scheme.max_depth = q.value("max_depth", 12);
      cfg.scheme.rel_tol = q.value("rel_tol", 1e-6);
      cfg.scheme.excision_radius = q.value("excision_radius", 0.0);
    }
    cfg.scheme.validate();
    if (j.contains("classify")) {
      cfg.classify_grid = j.at("classify").value("grid_resolution", 9);
      cfg.classify_tol = j.at("classify").value("tol", 1e-9);
    }
    if (j.contains("sharpness")) {
      const json& s = j.at("sharpness");
      const std::string fam = s.value("family", std::string("power_cutoff"));
      if (fam == "power_cutoff")
        cfg.sharpness.family.kind = ExtremalFamily::Kind::power_cutoff;
      else if (fam == "log_cutoff")
        cfg.sharpness.family.kind = ExtremalFamily::Kind::log_cutoff;
      else
        throw ConfigError("unknown extremal family '" + fam + "'");
      cfg.sharpness.family.rho_in = s.value("rho_in", 1.0);
      cfg.sharpness.family.smoothing = s.value("smoothing", 0.1);
      if (s.contains("R_values")) cfg.sharpness.R_values = s.at("R_values").get<std::vector<double>>();
      if (s.contains("delta_values"))
        cfg.sharpness.delta_values = s.at("delta_values").get<std::vector<double>>();
    }
    cfg.seed = j.value("seed", 0ull);
    cfg.threads = j.value("threads", 1);
    cfg.output_path = j.value("output", std::string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline TestFunction function_from_json(const CatalogEntry& entry, const json& f) {
  try {
    const std::string family = f.at("family").get<std::string>();
    if (family == "bump") {
      const auto c = f.at("center").get<std::vector<double>>();
      if (static_cast<int>(c.size()) != entry.chart.n)
        throw ConfigError("bump center must have chart dimension entries");
      Vec center(entry.chart.n);
      for (int i = 0; i < entry.chart.n; ++i) center[i] = c[static_cast<std::size_t>(i)];
      return smooth_bump(entry.chart, center, f.at("r_in").get<double>(),
                         f.at("r_out").get<double>());
    }
    if (family == "power_cutoff") {
      return power_cutoff(entry.chart, entry.field, f.at("delta").get<double>(),
                          f.at("rho_in").get<double>(), f.at("rho_out").get<double>(),
                          f.value("smoothing", 0.1));
    }
    if (family == "log_cutoff") {
      return log_cutoff(entry.chart, entry.field, f.at("rho_in").get<double>(),
                        f.at("rho_out").get<double>(), f.value("smoothing", 0.1));
    }
    throw ConfigError("unknown test-function family '" + family + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("function descriptor: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Identity checks on random non-excised points (verify-field)

struct IdentitySummary {
  std::vector<double> k_values;
  std::vector<double> lemma_max_abs_err;  // per k
  double radial_max_abs_err = 0.0;
  int points = 0;
};

inline IdentitySummary identity_grid_check(const CatalogEntry& entry, int points,
                                           std::uint64_t seed) {
  const int n = entry.chart.n;
  IdentitySummary s;
  s.k_values = {-2.0, -1.0, 0.0, 1.0, 2.0, static_cast<double>(n - 1), static_cast<double>(n),
                static_cast<double>(n + 1)};
  s.lemma_max_abs_err.assign(s.k_values.size(), 0.0);

  std::mt19937_64 rng(seed);
  const double threshold = kZeroExcisionFrac * entry.chart.domain.diameter();
  int found = 0;
  for (int attempt = 0; attempt < points * 100 && found < points; ++attempt) {
    const Vec x = detail::random_interior_point(entry.chart.domain, rng);
    if (field_norm(entry.chart, entry.field, x) < threshold) continue;
    ++found;
    for (std::size_t ki = 0; ki < s.k_values.size(); ++ki) {
      const auto check = lemma_divergence_check(entry.chart, entry.field, s.k_values[ki], x);
      s.lemma_max_abs_err[ki] = std::max(s.lemma_max_abs_err[ki], check.abs_err);
    }
    const auto rad = radial_identity_check(entry.chart, entry.field, x);
    s.radial_max_abs_err = std::max(s.radial_max_abs_err, rad.abs_err);
  }
  s.points = found;
  return s;
}

inline void to_json(json& j, const IdentitySummary& s) {
  j = json{{"k_values", s.k_values},
           {"lemma_max_abs_err", s.lemma_max_abs_err},
           {"radial_max_abs_err", s.radial_max_abs_err},
           {"points", s.points}};
}

// ---------------------------------------------------------------------------
// Commands

namespace detail {

inline json report_shell(const ExperimentConfig& cfg, const char* command) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["toolkit_version"] = kVersion;
  j["command"] = command;
  j["config"] = cfg.raw;
  j["seed"] = cfg.seed;
  return j;
}

inline void stamp_wall_time(json& j, std::chrono::steady_clock::time_point t0) {
  const auto dt = std::chrono::steady_clock::now() - t0;
  j["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(dt).count();
}

}  // namespace detail

inline RunOutcome cmd_verify_field(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const CatalogEntry entry = catalog_from_json(cfg.catalog_name, cfg.catalog_params);
  const ConformalReport rep =
      classify(entry.chart, entry.field, cfg.classify_grid, cfg.classify_tol, cfg.threads);
  const IdentitySummary ids = identity_grid_check(entry, 100, cfg.seed);

  RunOutcome out;
  out.report = detail::report_shell(cfg, "verify-field");
  out.report["conformal_report"] = rep;
  out.report["identity_checks"] = ids;
  detail::stamp_wall_time(out.report, t0);

  const bool pass = rep.is_conformal && rep.div_h_min > 1e-12;
  out.exit_code = pass ? 0 : 1;

  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "verify-field %s: %s\n"
                "  max_deficit = %.3e (tol %.1e)\n"
                "  mu in [%.9g, %.9g], homothety: %s\n"
                "  div h min = %.9g\n"
                "  lemma max |lhs-rhs| over k: %.3e, contraction identity: %.3e\n",
                cfg.catalog_name.c_str(), pass ? "PASS" : "FAIL", rep.max_deficit, rep.tol,
                rep.mu_min, rep.mu_max, rep.is_homothety ? "yes" : "no", rep.div_h_min,
                *std::max_element(ids.lemma_max_abs_err.begin(), ids.lemma_max_abs_err.end()),
                ids.radial_max_abs_err);
  out.summary = buf;
  return out;
}

inline RunOutcome cmd_check_inequality(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const CatalogEntry entry = catalog_from_json(cfg.catalog_name, cfg.catalog_params);
  if (cfg.functions.empty()) throw ConfigError("check-inequality: no test functions configured");

  RunOutcome out;
  out.report = detail::report_shell(cfg, "check-inequality");

  const ConformalReport rep =
      classify(entry.chart, entry.field, cfg.classify_grid, cfg.classify_tol, cfg.threads);
  out.report["conformal_report"] = rep;
  if (!rep.is_conformal || !(rep.div_h_min > 1e-12)) {
    detail::stamp_wall_time(out.report, t0);
    out.exit_code = 1;
    out.summary = "check-inequality: field verification failed (not conformal or div h <= 0)\n";
    return out;
  }

  std::vector<InequalityReport> reports;
  for (const json& fj : cfg.functions) {
    const TestFunction u = function_from_json(entry, fj);
    InequalityReport r;
    if (cfg.inequality == "ckn")
      r = evaluate_ckn(entry.chart, entry.field, u, cfg.ckn_params, cfg.scheme);
    else if (cfg.inequality == "euclidean_ckn")
      r = evaluate_euclidean_ckn(entry.chart, entry.field, u, cfg.ckn_params.a, cfg.ckn_params.b,
                                 cfg.scheme);
    else if (cfg.inequality == "hardy")
      r = evaluate_hardy(entry.chart, entry.field, u, cfg.ckn_params.p, cfg.scheme);
    else if (cfg.inequality == "uncertainty")
      r = evaluate_uncertainty(entry.chart, entry.field, u, cfg.ckn_params.p, cfg.scheme);
    else
      r = evaluate_xia(entry.chart, entry.field, u, cfg.xia_params, cfg.scheme);
    reports.push_back(std::move(r));
  }
  out.report["inequality_reports"] = reports;
  detail::stamp_wall_time(out.report, t0);

  bool all_pass = true;
  std::string text = "check-inequality (" + cfg.inequality + ") on " + cfg.catalog_name + ":\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    all_pass = all_pass && r.verdict;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "  [%zu] lhs = %.9e  rhs = %.9e  ratio = %.6f  %s\n", i, r.lhs,
                  r.rhs, r.ratio, r.verdict ? "pass" : "FAIL");
    text += buf;
  }
  out.exit_code = all_pass ? 0 : 1;
  out.summary = text;
  return out;
}

inline RunOutcome cmd_probe_sharpness(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const CatalogEntry entry = catalog_from_json(cfg.catalog_name, cfg.catalog_params);

  std::vector<double> deltas = cfg.sharpness.delta_values;
  if (deltas.empty()) {
    // default grid around the Hardy-type exponent (n - p)/p
    const double center = (entry.chart.n - cfg.ckn_params.p) / cfg.ckn_params.p;
    for (int i = -4; i <= 4; ++i) deltas.push_back(center + 0.15 * i);
  }
  const SharpnessStudy study = sweep(entry.chart, entry.field, cfg.ckn_params,
                                     cfg.sharpness.family, cfg.sharpness.R_values, deltas,
                                     cfg.scheme, entry.radial ? &*entry.radial : nullptr,
                                     cfg.threads);

  RunOutcome out;
  out.report = detail::report_shell(cfg, "probe-sharpness");
  out.report["sharpness_study"] = study;
  detail::stamp_wall_time(out.report, t0);

  std::string text = "probe-sharpness on " + cfg.catalog_name + ":\n";
  text += "      R        delta*        ratio\n";
  for (const auto& s : study.samples) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), "  %9.4g  %10.6f  %12.9f\n", s.R, s.delta, s.ratio);
    text += buf;
  }
  char buf[256];
  if (study.degenerate) {
    text += "  degenerate configuration: sharp constant is 0\n";
  } else {
    std::snprintf(buf, sizeof(buf),
                  "  deficit fit: c0 = %.5f, c1 = %.5f (R^2 = %.4f)\n"
                  "  extrapolated limit = %.5f\n",
                  study.deficit_fit.c0, study.deficit_fit.c1, study.deficit_fit.r2,
                  study.extrapolated_limit);
    text += buf;
  }
  out.summary = text;

  bool sound = true;
  for (const auto& s : study.samples) sound = sound && s.ratio <= 1.0 + std::max(s.slack, 1e-9);
  out.exit_code = sound ? 0 : 1;
  return out;
}

inline RunOutcome cmd_trace_proof(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const CatalogEntry entry = catalog_from_json(cfg.catalog_name, cfg.catalog_params);
  if (cfg.functions.empty()) throw ConfigError("trace-proof: no test functions configured");

  RunOutcome out;
  out.report = detail::report_shell(cfg, "trace-proof");

  const ConformalReport rep =
      classify(entry.chart, entry.field, cfg.classify_grid, cfg.classify_tol, cfg.threads);
  out.report["conformal_report"] = rep;
  const bool homothety = rep.is_homothety && std::abs(rep.mu_max - 2.0) <= 1e-6;

  std::vector<ProofTrace> traces;
  std::vector<CostaReport> costa;
  for (const json& fj : cfg.functions) {
    const TestFunction u = function_from_json(entry, fj);
    traces.push_back(proof_chain_trace(entry.chart, entry.field, u, cfg.ckn_params, cfg.scheme));
    if (homothety) {
      const double ts[5] = {-2.0, -1.0, 0.0, 1.0, 2.0};
      costa.push_back(costa_quadratic_check(entry.chart, entry.field, u, cfg.ckn_params.a,
                                            cfg.ckn_params.b, std::span<const double>(ts, 5),
                                            cfg.scheme));
    }
  }
  out.report["proof_traces"] = traces;
  if (homothety)
    out.report["costa_checks"] = costa;
  else
    out.report["costa_checks"] = "skipped (field is not a homothety with div h = n)";
  detail::stamp_wall_time(out.report, t0);

  bool pass = true;
  std::string text = "trace-proof on " + cfg.catalog_name + ":\n";
  for (std::size_t i = 0; i < traces.size(); ++i) {
    const auto& t = traces[i];
    const bool ok = t.monotone_ok && t.residual_rel <= 1e-4;
    pass = pass && ok;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "  [%zu] ipp residual = %.3e (rel %.3e), stations %0.6e <= %0.6e <= %0.6e %s\n",
                  i, t.residual_abs, t.residual_rel, t.station_i, t.station_ii, t.station_iii,
                  ok ? "ok" : "VIOLATION");
    text += buf;
  }
  for (std::size_t i = 0; i < costa.size(); ++i) {
    const auto& c = costa[i];
    pass = pass && c.nonnegative && c.bound_ok;
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "  [%zu] quadratic certificate: optimal t = %.6f, B^2/(4AD) = %.9f %s\n", i,
                  c.optimal_t, c.discriminant_ratio,
                  c.nonnegative && c.bound_ok ? "ok" : "VIOLATION");
    text += buf;
  }
  if (!homothety) text += "  quadratic certificate skipped (not a homothety)\n";
  out.exit_code = pass ? 0 : 1;
  out.summary = text;
  return out;
}

}  // namespace ckn
