#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vfluct/config.hpp"
#include "vfluct/error.hpp"
#include "vfluct/experiments.hpp"

namespace vfluct {

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitDivergence = 3,
  kExitAssert = 4,
};

/// Outcome of the --assert gates: one message per failed check.
struct AssertionLog {
  std::vector<std::string> failures;

  void check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

namespace detail {

inline std::string fmt(double v) { return CsvWriter::format(v); }

inline void assert_rate_scan(const RateScanResult& r, double T, AssertionLog& log) {
  for (const auto& d : r.distances) {
    const double margin = 4.0 * std::hypot(d.kolmogorov_se, d.tv_se);
    log.check(d.kolmogorov <= d.tv_histogram + margin,
              "kolmogorov " + fmt(d.kolmogorov) + " exceeds tv_histogram + 4 SE at eps=" +
                  fmt(d.epsilon) + ", t=" + fmt(d.t));
  }
  for (const auto& f : r.fits) {
    if (!f.fit || f.t != T) continue;
    if (f.quantity == "rms_limit" || f.quantity == "rms_fluct") {
      log.check(std::abs(f.fit->slope - 1.0) <= 0.15,
                f.quantity + " slope " + fmt(f.fit->slope) + " outside 1 +- 0.15");
    }
    if (f.quantity == "kolmogorov") {
      log.check(f.fit->slope >= 0.75, "kolmogorov slope " + fmt(f.fit->slope) + " below 0.75");
    }
  }
  for (std::size_t k = 1; k < r.strong.size(); ++k) {
    const auto& a = r.strong[k - 1];
    const auto& b = r.strong[k];
    if (a.t != b.t) continue;
    const double tol = 2.0 * std::hypot(a.rms_second_se, b.rms_second_se);
    log.check(b.rms_second <= a.rms_second + tol,
              "second-order RMS rises from eps=" + fmt(a.eps) + " to eps=" + fmt(b.eps) +
                  " at t=" + fmt(b.t));
  }
}

inline void assert_thm2(const Thm2Result& r, double smallest_eps, AssertionLog& log) {
  for (const auto& w : r.rows) {
    if (w.eps != smallest_eps) continue;
    if (w.status != "ok") {
      log.check(false, "phi=" + w.phi + ": " + w.status);
      continue;
    }
    log.check(w.zscore <= 3.0, "phi=" + w.phi + ": |lhs - rhs| = " + fmt(w.zscore) +
                                   " combined SE at eps=" + fmt(w.eps));
    if (!std::isnan(w.oracle)) {
      log.check(std::abs(w.rhs.value - w.oracle) <= 3.0 * w.rhs.se,
                "phi=" + w.phi + ": rhs " + fmt(w.rhs.value) + " vs oracle " + fmt(w.oracle));
    }
  }
}

inline void assert_kernel(const KernelCheckResult& r, AssertionLog& log) {
  for (const auto& w : r.rows) {
    const std::string where = w.kind + " H=" + fmt(w.H) + " t=" + fmt(w.t);
    if (w.kind == "l2_mass") log.check(w.deviation <= 1e-3, where + ": relative error " + fmt(w.deviation));
    if (w.kind == "covariance") {
      log.check(std::abs(w.deviation) <= 3.0, where + " s=" + fmt(w.s) + ": " + fmt(w.deviation) + " SE");
    }
    if (w.kind == "variance_margin") log.check(w.deviation >= 0.0, where + ": margin " + fmt(w.deviation));
  }
}

}  // namespace detail

/// Runs one subcommand; returns the process exit code. Diagnostics go to err.
inline int run_cli(int argc, const char* const* argv, std::ostream& err = std::cerr) {
  CLI::App app{"Small-noise stochastic Volterra equations: limits, fluctuations, corrections"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool assert_mode = false;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--out", out_dir, "output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "random seed (overrides seed)");
    sub->add_flag("--assert", assert_mode, "exit with status 4 if an acceptance check fails");
  };
  auto* limit = app.add_subcommand("limit", "deterministic limit and Var(Y_t)");
  auto* rate = app.add_subcommand("rate-scan", "distances and strong rates over the eps sweep");
  auto* thm2 = app.add_subcommand("thm2", "weak expansion: difference quotient vs correction");
  auto* kernel = app.add_subcommand("kernel-check", "fBm kernel identities");
  for (auto* sub : {limit, rate, thm2, kernel}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream out;
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    ExperimentConfig c = load_config(config_path);
    if (out_dir) c.output_dir = *out_dir;
    if (seed) c.seed = *seed;
    AssertionLog log;
    if (limit->parsed()) {
      run_limit(c);
    } else if (rate->parsed()) {
      detail::assert_rate_scan(run_rate_scan(c), c.T, log);
    } else if (thm2->parsed()) {
      detail::assert_thm2(run_thm2(c), c.epsilons.back(), log);
    } else {
      detail::assert_kernel(run_kernel_check(c), log);
    }
    if (assert_mode && !log.failures.empty()) {
      for (const auto& f : log.failures) err << "assert: " << f << '\n';
      return kExitAssert;
    }
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DivergenceError& e) {
    err << "divergence: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace vfluct
