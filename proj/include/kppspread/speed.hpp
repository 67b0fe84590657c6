#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "kppspread/coeffs.hpp"
#include "kppspread/discretize.hpp"
#include "kppspread/eigensolver.hpp"

namespace kppspread {

/// Spreading speed c = inf_{lam>0} k^lam / lam and its minimizer.
struct SpeedResult {
  double c = std::numeric_limits<double>::quiet_NaN();
  double lambda_star = std::numeric_limits<double>::quiet_NaN();
  double k_at_lambda_star = std::numeric_limits<double>::quiet_NaN();
  double k0 = std::numeric_limits<double>::quiet_NaN();
  bool persistent = false;  // k0 > 0; no speed is reported otherwise
  double bracket_lo = 0.0, bracket_hi = 0.0;
  int evals = 0;
};

namespace detail {

/// Golden-section minimum of a strictly unimodal function on [lo, hi].
/// Returns the midpoint of the final bracket.
inline double golden_min(const std::function<double(double)>& f, double lo, double hi,
                         double width_tol) {
  constexpr double gr = 0.6180339887498949;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = f(x1), f2 = f(x2);
  while (hi - lo > width_tol) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    }
  }
  return 0.5 * (lo + hi);
}

/// Minimize g(lam) = k(lam)/lam over lam > 0 for a convex positive eigencurve.
/// k0 must be positive.  c_upper is an a-priori upper bound on the speed used
/// to place the left bracket end where g is safely above the minimum.
inline SpeedResult minimize_ratio(const std::function<double(double)>& kfun, double k0,
                                  double c_upper, double width_tol, int* evals) {
  std::map<double, double> cache;
  auto k = [&](double lam) {
    auto itc = cache.find(lam);
    if (itc != cache.end()) return itc->second;
    const double v = kfun(lam);
    ++*evals;
    cache.emplace(lam, v);
    return v;
  };
  auto g = [&](double lam) { return k(lam) / lam; };

  SpeedResult out;
  out.k0 = k0;
  out.persistent = k0 > 0.0;
  if (!out.persistent) return out;

  const double lo = std::min(1e-3, k0 / (10.0 * c_upper));
  double hi = std::max(1.0, 2.0 * lo);
  int grow = 0;
  while (g(hi) <= g(0.5 * hi)) {
    hi *= 2.0;
    if (++grow > 60) throw NoConvergence("speed bracket growth failed");
  }
  const double lam_star = golden_min(g, lo, hi, width_tol);
  out.lambda_star = lam_star;
  out.k_at_lambda_star = k(lam_star);
  out.c = out.k_at_lambda_star / lam_star;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  return out;
}

/// Run fn(i) for i in [0,n) on a small worker pool; rethrows the first error.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr err;
  std::mutex err_mtx;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mtx);
        if (!err) err = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

}  // namespace detail

/// Spreading speed of the full model.  Computes k^0 first; a non-positive k^0
/// is reported as persistent = false (extinction or the open borderline case),
/// with no speed attached.
inline SpeedResult fg_speed(const ModelConfig& cfg) {
  int evals = 0;
  auto kfun = [&](double lam) {
    return principal_eigenpair(assemble_cell(cfg, lam), cfg.tol.eigen).k;
  };
  const double k0 = kfun(0.0);
  ++evals;
  SpeedResult out;
  out.k0 = k0;
  out.persistent = k0 > 0.0;
  if (!out.persistent) {
    out.evals = evals;
    return out;
  }
  const double rmax = std::max(cfg.r_bounds.max, k0);
  const double c_upper =
      cfg.a_bounds.max_abs_dx / cfg.L + 2.0 * std::sqrt(cfg.a_bounds.max * rmax);
  out = detail::minimize_ratio(kfun, k0, c_upper, cfg.tol.lambda, &evals);
  out.evals = evals;
  return out;
}

struct Speed1dOptions {
  int nx = 256;
  double L = 1.0;
  double tol_eigen = 1e-10;
  double tol_lambda = 1e-6;
};

/// Phenotype-free speed c^1(A, R) on the unit cell with period scaling L.
inline SpeedResult speed_1d(const XField& A, const XField& R, const Speed1dOptions& opt = {}) {
  int evals = 0;
  auto kfun = [&](double lam) {
    return principal_eigenpair(assemble_x(A, R, lam, opt.nx, opt.L), opt.tol_eigen).k;
  };
  const double k0 = kfun(0.0);
  ++evals;
  SpeedResult out;
  out.k0 = k0;
  out.persistent = k0 > 0.0;
  if (!out.persistent) {
    out.evals = evals;
    return out;
  }
  double sup_a = -1e300, sup_r = -1e300, sup_dax = 0.0;
  for (int i = 0; i < 1024; ++i) {
    const double x = i / 1024.0;
    sup_a = std::max(sup_a, A(x));
    sup_r = std::max(sup_r, R(x));
    sup_dax = std::max(sup_dax, std::abs(A.deriv(x)));
  }
  const double c_upper = sup_dax / opt.L + 2.0 * std::sqrt(sup_a * std::max(sup_r, k0));
  out = detail::minimize_ratio(kfun, k0, c_upper, opt.tol_lambda, &evals);
  out.evals = evals;
  return out;
}

struct SweepPoint {
  double param = 0.0;
  SpeedResult result;
};

/// Result of a parameter sweep; for m-sweeps the grid argmax is reported,
/// optionally refined by a local golden search between its neighbours (the
/// refinement is flagged: no global unimodality in m is claimed).
struct SweepRecord {
  std::string parameter;
  std::vector<SweepPoint> points;
  bool has_argmax = false;
  double m_star = std::numeric_limits<double>::quiet_NaN();
  double c_star = std::numeric_limits<double>::quiet_NaN();
  bool refined = false;
};

namespace detail {

inline void require_increasing(const std::vector<double>& v, const char* what) {
  for (size_t i = 0; i < v.size(); ++i) {
    if (v[i] <= 0.0) throw ValidationError(std::string(what) + " values must be positive");
    if (i > 0 && v[i] <= v[i - 1])
      throw ValidationError(std::string(what) + " values must be strictly increasing");
  }
}

}  // namespace detail

inline SweepRecord sweep_m(const ModelConfig& cfg, const std::vector<double>& m_values,
                           int threads = 1) {
  detail::require_increasing(m_values, "m");
  SweepRecord rec;
  rec.parameter = "m";
  rec.points.resize(m_values.size());
  detail::parallel_for(static_cast<int>(m_values.size()), threads, [&](int i) {
    ModelConfig c = cfg;
    c.m = m_values[i];
    rec.points[i] = SweepPoint{m_values[i], fg_speed(c)};
  });

  int best = -1;
  for (size_t i = 0; i < rec.points.size(); ++i) {
    const auto& p = rec.points[i];
    if (p.result.persistent && (best < 0 || p.result.c > rec.points[best].result.c))
      best = static_cast<int>(i);
  }
  if (best < 0) return rec;
  rec.has_argmax = true;
  rec.m_star = rec.points[best].param;
  rec.c_star = rec.points[best].result.c;

  const bool interior = best > 0 && best + 1 < static_cast<int>(rec.points.size()) &&
                        rec.points[best - 1].result.persistent &&
                        rec.points[best + 1].result.persistent;
  if (interior) {
    // local refinement in log m between the argmax neighbours
    auto cval = [&](double logm) {
      ModelConfig c = cfg;
      c.m = std::exp(logm);
      const SpeedResult r = fg_speed(c);
      return r.persistent ? -r.c : 1e300;
    };
    const double lo = std::log(rec.points[best - 1].param);
    const double hi = std::log(rec.points[best + 1].param);
    const double lm = detail::golden_min(cval, lo, hi, 1e-2 * (hi - lo));
    ModelConfig c = cfg;
    c.m = std::exp(lm);
    const SpeedResult r = fg_speed(c);
    if (r.persistent && r.c > rec.c_star) {
      rec.m_star = c.m;
      rec.c_star = r.c;
      rec.refined = true;
    }
  }
  return rec;
}

inline SweepRecord sweep_L(const ModelConfig& cfg, const std::vector<double>& L_values,
                           int threads = 1) {
  detail::require_increasing(L_values, "L");
  SweepRecord rec;
  rec.parameter = "L";
  rec.points.resize(L_values.size());
  detail::parallel_for(static_cast<int>(L_values.size()), threads, [&](int i) {
    ModelConfig c = cfg;
    c.L = L_values[i];
    rec.points[i] = SweepPoint{L_values[i], fg_speed(c)};
  });
  return rec;
}

/// Diagnostic export of the eigencurve lam -> k^lam.
inline std::vector<std::pair<double, double>> k_lambda_curve(const ModelConfig& cfg,
                                                             const std::vector<double>& lambdas,
                                                             int threads = 1) {
  std::vector<std::pair<double, double>> out(lambdas.size());
  detail::parallel_for(static_cast<int>(lambdas.size()), threads, [&](int i) {
    out[i] = {lambdas[i],
              principal_eigenpair(assemble_cell(cfg, lambdas[i]), cfg.tol.eigen).k};
  });
  return out;
}

}  // namespace kppspread
