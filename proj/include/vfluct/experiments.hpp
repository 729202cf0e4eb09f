#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>
#include <nlohmann/json.hpp>

#include "vfluct/config.hpp"
#include "vfluct/deterministic.hpp"
#include "vfluct/kernels.hpp"
#include "vfluct/simulate.hpp"
#include "vfluct/stats.hpp"

namespace vfluct {

/// Writes comma-separated rows; doubles with 17 significant digits.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
    out_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((out_ << (first ? "" : ",") << format(fields), first = false), ...);
    out_ << '\n';
  }

  static std::string format(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
  }
  static std::string format(std::size_t v) { return std::to_string(v); }
  static std::string format(const std::string& v) { return v; }
  static std::string format(const char* v) { return v; }

 private:
  std::ofstream out_;
};

namespace detail {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::filesystem::path p(dir);
  std::filesystem::create_directories(p);
  return p;
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const ExperimentConfig& c) {
  nlohmann::json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["config"] = to_json(c);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << m.dump(2) << '\n';
}

// Seeds of independent random domains derived from the config seed.
inline std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t salt) {
  const Philox4x32 mix(seed);
  const auto r = mix({static_cast<std::uint32_t>(salt), 0x5EEDu, 0, 0});
  return (static_cast<std::uint64_t>(r[0]) << 32) | r[1];
}

}  // namespace detail

/// E[f(B)] for B ~ Normal(0, var) by 60-point Gauss-Legendre on +-12 sd.
template <class F>
double gaussian_expectation(F f, double var) {
  const double sd = std::sqrt(var);
  auto integrand = [&](double u) {
    return f(sd * u) * std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  };
  return boost::math::quadrature::gauss<double, 60>::integrate(integrand, -12.0, 12.0);
}

/// Weak-expansion limit for the multiplicative preset from its closed forms
/// Y = x0 B, delta = x0^2 (B^3 - 3 T B):  E[phi(x0 B)(B^3 - 3 T B)] / (2 T).
inline double multiplicative_rhs_oracle(TestFunction phi, double x0, double T) {
  return gaussian_expectation(
             [&](double b) { return apply(phi, x0 * b) * (b * b * b - 3.0 * T * b); }, T) /
         (2.0 * T);
}

// ---------------------------------------------------------------- limit

struct LimitResult {
  LimitPath limit;
  VariancePath variance;
};

inline LimitResult run_limit(const ExperimentConfig& c) {
  const auto coeff = c.coefficients();
  const TimeGrid grid = c.grid();
  const KernelCache cache(coeff, grid);
  auto x = solve_deterministic_limit(coeff, grid, c.x0, cache);
  auto var = variance_of_Y(solve_derivative_field(coeff, grid, x, cache), grid);

  const auto dir = detail::prepare_dir(c.output_dir);
  CsvWriter lim(dir / "limit.csv", {"t", "x"});
  CsvWriter vr(dir / "variance.csv", {"t", "var_Y"});
  for (std::size_t j = 0; j < grid.size(); ++j) {
    lim.row(grid.node(j), x[j]);
    vr.row(grid.node(j), var.values[j]);
  }
  detail::write_manifest(dir, "limit", c);
  return {std::move(x), std::move(var)};
}

// ------------------------------------------------------------ rate-scan

struct StrongRow {
  double eps = 0.0;
  double t = 0.0;
  double rms_limit = 0.0, rms_limit_se = 0.0;     // RMS(X - x)
  double rms_fluct = 0.0, rms_fluct_se = 0.0;     // RMS(X~ - Y)
  double rms_second = 0.0, rms_second_se = 0.0;   // RMS((X~ - Y)/eps - Z/2)
};

struct FitRow {
  std::string quantity;
  double t = 0.0;
  std::optional<RateFit> fit;  // empty: below resolution
};

struct RateScanResult {
  std::vector<DistanceReport> distances;
  std::vector<StrongRow> strong;
  std::vector<FitRow> fits;

  const FitRow* fit(const std::string& quantity, double t) const {
    for (const auto& f : fits) {
      if (f.quantity == quantity && f.t == t) return &f;
    }
    return nullptr;
  }
};

namespace detail {

// RMS of a sample with a delta-method standard error.
inline MeanWithError rms_with_error(const std::vector<double>& v) {
  std::vector<double> sq(v.size());
  for (std::size_t m = 0; m < v.size(); ++m) sq[m] = v[m] * v[m];
  const auto ms = mean_with_error(sq);
  const double rms = std::sqrt(ms.value);
  return {rms, rms > 0.0 ? ms.se / (2.0 * rms) : 0.0};
}

inline std::optional<RateFit> try_fit(const std::vector<std::pair<double, double>>& pts) {
  try {
    return rate_fit(pts);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

}  // namespace detail

inline RateScanResult run_rate_scan(const ExperimentConfig& c) {
  if (c.epsilons.size() < 3) throw ConfigError("config field 'epsilons': rate-scan needs at least 3");
  const TimeGrid grid = c.grid();
  const LinearizedModel model(c.coefficients(), grid, c.x0);
  const auto nodes = c.nodes();
  const auto batch = sample_brownian(c.M, grid, c.seed);
  const auto s = simulate_coupled(model, batch, c.epsilons, nodes, true);

  RateScanResult r;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const double t = grid.node(nodes[k]);
    const auto y = s.column(s.y, k);
    const auto z = s.column(s.z, k);
    std::vector<std::pair<double, double>> ks, tv, lim, fl, sec;
    for (std::size_t e = 0; e < c.epsilons.size(); ++e) {
      const double eps = c.epsilons[e];
      const auto xt = s.column(s.fluct[e], k);
      const auto rep = distance_report(xt, y, eps, t, detail::derived_seed(c.seed, 1000 * e + k),
                                       c.bootstrap_resamples);
      r.distances.push_back(rep);
      std::vector<double> d_lim(y.size()), d_fl(y.size()), d_sec(y.size());
      for (std::size_t m = 0; m < y.size(); ++m) {
        d_lim[m] = eps * xt[m];
        d_fl[m] = xt[m] - y[m];
        d_sec[m] = (xt[m] - y[m]) / eps - 0.5 * z[m];
      }
      StrongRow row{eps, t};
      const auto a = detail::rms_with_error(d_lim);
      const auto b = detail::rms_with_error(d_fl);
      const auto q = detail::rms_with_error(d_sec);
      row.rms_limit = a.value;
      row.rms_limit_se = a.se;
      row.rms_fluct = b.value;
      row.rms_fluct_se = b.se;
      row.rms_second = q.value;
      row.rms_second_se = q.se;
      r.strong.push_back(row);
      ks.push_back({eps, rep.kolmogorov});
      tv.push_back({eps, rep.tv_histogram});
      lim.push_back({eps, row.rms_limit});
      fl.push_back({eps, row.rms_fluct});
      sec.push_back({eps, row.rms_second});
    }
    r.fits.push_back({"kolmogorov", t, detail::try_fit(ks)});
    r.fits.push_back({"tv_histogram", t, detail::try_fit(tv)});
    r.fits.push_back({"rms_limit", t, detail::try_fit(lim)});
    r.fits.push_back({"rms_fluct", t, detail::try_fit(fl)});
    r.fits.push_back({"rms_second", t, detail::try_fit(sec)});
  }

  const auto dir = detail::prepare_dir(c.output_dir);
  {
    CsvWriter out(dir / "distances.csv", {"epsilon", "t", "kolmogorov", "kolmogorov_se",
                                          "tv_histogram", "tv_se", "bins", "samples"});
    for (const auto& d : r.distances) {
      out.row(d.epsilon, d.t, d.kolmogorov, d.kolmogorov_se, d.tv_histogram, d.tv_se, d.bins,
              d.samples_a);
    }
  }
  {
    CsvWriter out(dir / "strong.csv", {"epsilon", "t", "rms_limit", "rms_limit_se", "rms_fluct",
                                       "rms_fluct_se", "rms_second", "rms_second_se"});
    for (const auto& w : r.strong) {
      out.row(w.eps, w.t, w.rms_limit, w.rms_limit_se, w.rms_fluct, w.rms_fluct_se, w.rms_second,
              w.rms_second_se);
    }
  }
  {
    CsvWriter out(dir / "ratefit.csv",
                  {"quantity", "t", "slope", "intercept", "residual", "points", "status"});
    for (const auto& f : r.fits) {
      if (f.fit) {
        out.row(f.quantity, f.t, f.fit->slope, f.fit->intercept, f.fit->residual, f.fit->points,
                "ok");
      } else {
        out.row(f.quantity, f.t, detail::kNaN, detail::kNaN, detail::kNaN, c.epsilons.size(),
                "below resolution");
      }
    }
  }
  detail::write_manifest(dir, "rate-scan", c);
  return r;
}

// ----------------------------------------------------------------- thm2

struct Thm2Row {
  double eps = 0.0;
  std::string phi;
  MeanWithError lhs, rhs;
  double zscore = detail::kNaN;
  // Two-point extrapolation 2 FD(eps) - FD(2 eps) of the one-sided
  // difference quotient, when 2 eps is also in the sweep.
  std::optional<MeanWithError> lhs_extrap;
  double zscore_extrap = detail::kNaN;
  double oracle = detail::kNaN;  // closed-form rhs where available
  std::string status = "ok";
};

struct Thm2Result {
  double var_y = 0.0;
  std::vector<Thm2Row> rows;
};

inline Thm2Result run_thm2(const ExperimentConfig& c) {
  const TimeGrid grid = c.grid();
  const LinearizedModel model(c.coefficients(), grid, c.x0);
  const std::size_t n = grid.steps();
  const auto batch = sample_brownian(c.M, grid, c.seed);
  const auto s = simulate_coupled(model, batch, c.epsilons, {n}, true);
  const auto y = s.column(s.y, 0);

  Thm2Result r;
  r.var_y = model.variance().values[n];
  for (std::size_t e = 0; e < c.epsilons.size(); ++e) {
    const double eps = c.epsilons[e];
    const auto xt = s.column(s.fluct[e], 0);
    std::optional<std::size_t> coarse;
    for (std::size_t k = 0; k < c.epsilons.size(); ++k) {
      if (std::abs(c.epsilons[k] - 2.0 * eps) <= 1e-12) coarse = k;
    }
    for (const auto& id : c.test_functions) {
      const auto phi = parse_test_function(id);
      Thm2Row row;
      row.eps = eps;
      row.phi = id;
      row.lhs = thm2_lhs(phi, xt, y, eps);
      if (c.preset == "multiplicative") row.oracle = multiplicative_rhs_oracle(phi, c.x0, c.T);
      try {
        row.rhs = thm2_rhs(phi, y, s.skorokhod, r.var_y);
      } catch (const DegenerateLawError&) {
        row.rhs = {detail::kNaN, detail::kNaN};
        row.status = "degenerate";
        r.rows.push_back(row);
        continue;
      }
      const double cse = combined_se(row.lhs, row.rhs);
      const double gap = std::abs(row.lhs.value - row.rhs.value);
      row.zscore = cse > 0.0 ? gap / cse : (gap == 0.0 ? 0.0 : detail::kInf);
      if (coarse) {
        const auto xc = s.column(s.fluct[*coarse], 0);
        std::vector<double> v(y.size());
        for (std::size_t m = 0; m < y.size(); ++m) {
          const double fine = (apply(phi, xt[m]) - apply(phi, y[m])) / eps;
          const double rough = (apply(phi, xc[m]) - apply(phi, y[m])) / (2.0 * eps);
          v[m] = 2.0 * fine - rough;
        }
        row.lhs_extrap = mean_with_error(v);
        const double cse2 = combined_se(*row.lhs_extrap, row.rhs);
        const double gap2 = std::abs(row.lhs_extrap->value - row.rhs.value);
        row.zscore_extrap = cse2 > 0.0 ? gap2 / cse2 : (gap2 == 0.0 ? 0.0 : detail::kInf);
      }
      r.rows.push_back(row);
    }
  }

  const auto dir = detail::prepare_dir(c.output_dir);
  CsvWriter out(dir / "thm2.csv",
                {"epsilon", "phi", "lhs", "lhs_se", "rhs", "rhs_se", "zscore", "lhs_extrap",
                 "lhs_extrap_se", "zscore_extrap", "oracle", "status"});
  for (const auto& w : r.rows) {
    const double ex = w.lhs_extrap ? w.lhs_extrap->value : detail::kNaN;
    const double ex_se = w.lhs_extrap ? w.lhs_extrap->se : detail::kNaN;
    out.row(w.eps, w.phi, w.lhs.value, w.lhs.se, w.rhs.value, w.rhs.se, w.zscore, ex, ex_se,
            w.zscore_extrap, w.oracle, w.status);
  }
  detail::write_manifest(dir, "thm2", c);
  return r;
}

// --------------------------------------------------------- kernel-check

struct KernelRow {
  std::string kind;  // l2_mass, covariance, variance_margin
  double H = 0.0;
  double t = 0.0;
  double s = detail::kNaN;
  double value = 0.0;
  double reference = 0.0;
  double se = 0.0;
  double deviation = 0.0;  // relative (l2_mass), in SE units (covariance), margin
};

struct KernelCheckResult {
  std::vector<KernelRow> rows;
};

namespace detail {

// Sample covariance E[B^H_t B^H_s] (mean known to be zero) of the synthesized
// fBm for every configured pair, with the standard error of the product mean.
inline std::vector<MeanWithError> synthesized_covariances(const FbmKernelParams& p,
                                                          const TimeGrid& grid,
                                                          const BrownianBatch& batch,
                                                          const std::vector<std::pair<double, double>>& pairs) {
  std::vector<std::size_t> nodes;
  for (const auto& [t, s] : pairs) {
    nodes.push_back(grid.index_of(t));
    nodes.push_back(grid.index_of(s));
  }
  std::vector<std::vector<double>> weights;
  for (auto j : nodes) weights.push_back(fbm_synthesis_weights(p, grid, j));

  const std::size_t paths = batch.paths();
  Matrix products(paths, pairs.size());
  parallel_for(paths, [&](std::size_t begin, std::size_t end) {
    std::vector<double> dB(grid.steps());
    std::vector<double> b(nodes.size());
    for (std::size_t m = begin; m < end; ++m) {
      batch.increments(m, dB);
      for (std::size_t k = 0; k < nodes.size(); ++k) {
        b[k] = dot(weights[k].data(), dB.data(), nodes[k]);
      }
      for (std::size_t q = 0; q < pairs.size(); ++q) products(m, q) = b[2 * q] * b[2 * q + 1];
    }
  });
  std::vector<MeanWithError> out;
  std::vector<double> col(paths);
  for (std::size_t q = 0; q < pairs.size(); ++q) {
    for (std::size_t m = 0; m < paths; ++m) col[m] = products(m, q);
    out.push_back(mean_with_error(col));
  }
  return out;
}

}  // namespace detail

inline KernelCheckResult run_kernel_check(const ExperimentConfig& c) {
  const auto& kc = c.kernel;
  if (kc.hurst.empty()) throw ConfigError("config field 'kernel.H_list': must not be empty");
  KernelCheckResult r;
  const TimeGrid grid(c.T, kc.N);
  const auto batch = sample_brownian(kc.M, grid, detail::derived_seed(c.seed, 7));
  const double sigma0 = c.preset == "fbm-additive" ? c.params.at(0) : 1.0;

  for (double H : kc.hurst) {
    const auto p = make_fbm_params(H);
    for (double t : kc.mass_times) {
      const double mass = kernel_l2_mass(p, t);
      const double ref = std::pow(t, 2.0 * H);
      r.rows.push_back({"l2_mass", H, t, detail::kNaN, mass, ref, 0.0, std::abs(mass - ref) / ref});
    }
    const auto cov = detail::synthesized_covariances(p, grid, batch, kc.covariance_pairs);
    for (std::size_t q = 0; q < kc.covariance_pairs.size(); ++q) {
      const auto [t, s] = kc.covariance_pairs[q];
      const double ref = fbm_covariance(H, t, s);
      const double dev = cov[q].se > 0.0 ? (cov[q].value - ref) / cov[q].se : 0.0;
      r.rows.push_back({"covariance", H, t, s, cov[q].value, ref, cov[q].se, dev});
    }
    if (H > 0.5 && !p.brownian) {
      const auto coeff = make_preset("fbm-additive", {sigma0}, H);
      const auto var = variance_of_Y(
          solve_derivative_field(coeff, grid, solve_deterministic_limit(coeff, grid, 0.0)), grid);
      const double cstar = sigma0 * sigma0 * p.cH * p.cH / (H * (2 * H - 1) * (2 * H - 1));
      for (std::size_t j = 1; j < grid.size(); ++j) {
        const double t = grid.node(j);
        const double bound = 0.5 * cstar * std::pow(t, 2.0 * H);
        r.rows.push_back(
            {"variance_margin", H, t, detail::kNaN, var.values[j], bound, 0.0, var.values[j] - bound});
      }
    }
  }

  const auto dir = detail::prepare_dir(c.output_dir);
  CsvWriter out(dir / "kernel.csv",
                {"kind", "H", "t", "s", "value", "reference", "se", "deviation"});
  for (const auto& w : r.rows) out.row(w.kind, w.H, w.t, w.s, w.value, w.reference, w.se, w.deviation);
  detail::write_manifest(dir, "kernel-check", c);
  return r;
}

}  // namespace vfluct
