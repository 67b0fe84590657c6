#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "kppspread/coeffs.hpp"
#include "kppspread/discretize.hpp"
#include "kppspread/eigensolver.hpp"
#include "kppspread/speed.hpp"

namespace kppspread {

/// Samples of the local (frozen-x) principal eigenvalue H_m on a midpoint
/// x-grid, and its maximum M.
struct LocalEigCurve {
  std::vector<double> x;  // midpoints (i+1/2)/n
  std::vector<double> H;
  double M = 0.0;
  double m = 0.0;
};

namespace detail {

inline void require_mu_x_independent(const ModelConfig& cfg) {
  if (!cfg.mu.x_independent()) throw AssumptionViolated("mu depends on x");
}
inline void require_a_theta_independent(const ModelConfig& cfg) {
  if (!cfg.a.theta_independent()) throw AssumptionViolated("a depends on theta");
}
inline void require_mu_theta_independent(const ModelConfig& cfg) {
  if (!cfg.mu.theta_independent()) throw AssumptionViolated("mu depends on theta");
}

/// Maximum of r(x, .) over theta: dense scan plus one parabolic refinement.
inline double theta_max_of_r(const CoefficientField& r, double x, int samples = 513) {
  double best = -1e300;
  int bi = 0;
  const double h = 1.0 / (samples - 1);
  for (int i = 0; i < samples; ++i) {
    const double v = r.evaluate(x, i * h);
    if (v > best) {
      best = v;
      bi = i;
    }
  }
  if (bi > 0 && bi + 1 < samples) {
    const double fm = r.evaluate(x, (bi - 1) * h);
    const double fp = r.evaluate(x, (bi + 1) * h);
    const double denom = fm - 2.0 * best + fp;
    if (denom < 0.0) {
      double dt = 0.5 * (fm - fp) / denom;
      dt = std::clamp(dt, -1.0, 1.0);
      best = std::max(best, r.evaluate(x, (bi + dt) * h));
    }
  }
  return best;
}

}  // namespace detail

/// H_m(x) on x_samples midpoints: one theta-only eigenproblem per sample.
inline LocalEigCurve local_eig_curve(const ModelConfig& cfg, int x_samples = 512) {
  detail::require_mu_x_independent(cfg);
  const ThetaField mu_t = to_thetafield(cfg.mu);
  const int nt = std::max(cfg.grid.ntheta, 64);
  LocalEigCurve curve;
  curve.m = cfg.m;
  curve.x.resize(x_samples);
  curve.H.resize(x_samples);
  detail::parallel_for(x_samples, 1, [&](int i) {
    const double xi = (i + 0.5) / x_samples;
    curve.x[i] = xi;
    auto op = assemble_theta([&](double t) { return mu_t(t); },
                             [&](double t) { return cfg.r.evaluate(xi, t); }, cfg.m, nt);
    curve.H[i] = principal_eigenpair(op, cfg.tol.eigen).k;
  });
  curve.M = *std::max_element(curve.H.begin(), curve.H.end());
  return curve;
}

/// The action-like integral j(k) = \int_0^1 sqrt((k - H(x))/a(x)) dx on the
/// midpoint samples of a curve.  Strictly increasing for k >= M; the midpoint
/// rule avoids evaluating the square-root singularity at the maximiser of H.
struct JProfile {
  std::vector<double> H;
  std::vector<double> a;
  double M = 0.0;

  double operator()(double k) const {
    double acc = 0.0;
    for (size_t i = 0; i < H.size(); ++i)
      acc += std::sqrt(std::max(k - H[i], 0.0) / a[i]);
    return acc / static_cast<double>(H.size());
  }
};

namespace detail {

inline JProfile make_jprofile(const ModelConfig& cfg, const std::vector<double>& xs,
                              const std::vector<double>& Hs) {
  JProfile j;
  j.H = Hs;
  j.M = *std::max_element(Hs.begin(), Hs.end());
  j.a.resize(xs.size());
  for (size_t i = 0; i < xs.size(); ++i) j.a[i] = cfg.a.evaluate(xs[i], 0.5);
  return j;
}

/// inf_{k > M} k / j(k).  The objective is strictly unimodal in k (j is
/// concave increasing), so a geometric scan in u = k - M brackets the minimum
/// and golden section finishes it.
inline double minimize_k_over_j(const JProfile& j) {
  const double M = j.M;
  if (M <= 0.0) throw NotPersistent("tail eigenvalue limit M is not positive");
  auto f = [&](double u) {
    const double k = M + u;
    const double jv = j(k);
    return jv > 0.0 ? k / jv : 1e300;
  };
  const double scale = std::max(1.0, std::abs(M));
  double u = 1e-9 * scale;
  double fu = f(u);
  double u_prev = u, f_prev = fu;
  int steps = 0;
  for (;;) {
    const double un = u * 2.0;
    const double fn = f(un);
    if (fn > fu) break;  // minimum inside [u_prev, un]
    u_prev = u;
    f_prev = fu;
    u = un;
    fu = fn;
    if (++steps > 200) throw NoConvergence("k/j bracket growth failed");
  }
  (void)f_prev;
  const double us = golden_min(f, u_prev, 2.0 * u, 1e-11 * std::max(scale, u));
  return f(us);
}

}  // namespace detail

/// Large-period speed limit via the j-integral, evaluated as inf_k k/j(k).
inline double speed_L_inf(const ModelConfig& cfg) {
  detail::require_a_theta_independent(cfg);
  const LocalEigCurve curve = local_eig_curve(cfg, 4096);
  const JProfile j = detail::make_jprofile(cfg, curve.x, curve.H);
  return detail::minimize_k_over_j(j);
}

/// Small-period homogenized speed: the eigenvalue route (homogenized
/// theta-only eigenproblem, minimized over lambda) and the independent
/// variational route (projected gradient ascent of 2 sqrt(A_psi R_psi)).
struct HomogenizedSpeed {
  double c = std::numeric_limits<double>::quiet_NaN();
  double c_variational = std::numeric_limits<double>::quiet_NaN();
  double lambda_star = std::numeric_limits<double>::quiet_NaN();
  double k0 = std::numeric_limits<double>::quiet_NaN();
  bool persistent = false;
};

inline HomogenizedSpeed homogenized_speed_L0(const ModelConfig& cfg) {
  const ThetaField mu_a = mean_x_arith(cfg.mu);
  const ThetaField r_a = mean_x_arith(cfg.r);
  const auto a_h = mean_x_harm(cfg.a);

  const int nt = cfg.grid.ntheta;
  const double ht = 1.0 / nt;
  std::vector<double> ah_node(nt), r_node(nt), mu_face(nt - 1);
  for (int jn = 0; jn < nt; ++jn) {
    const double t = (jn + 0.5) * ht;
    ah_node[jn] = a_h(t);
    r_node[jn] = r_a(t);
  }
  for (int jf = 0; jf + 1 < nt; ++jf) mu_face[jf] = mu_a((jf + 1) * ht);

  auto assemble = [&](double lam) {
    return assemble_theta([&](double t) { return mu_a(t); },
                          [&, lam](double t) { return r_a(t) + lam * lam * a_h(t); }, cfg.m,
                          nt);
  };

  HomogenizedSpeed out;
  int evals = 0;
  auto kfun = [&](double lam) { return principal_eigenpair(assemble(lam), cfg.tol.eigen).k; };
  out.k0 = kfun(0.0);
  out.persistent = out.k0 > 0.0;
  if (!out.persistent) return out;

  double sup_ah = 0.0, sup_r = -1e300;
  for (int jn = 0; jn < nt; ++jn) {
    sup_ah = std::max(sup_ah, ah_node[jn]);
    sup_r = std::max(sup_r, r_node[jn]);
  }
  const double c_upper = 2.0 * std::sqrt(sup_ah * std::max(sup_r, out.k0));
  const SpeedResult eig_route =
      detail::minimize_ratio(kfun, out.k0, c_upper, cfg.tol.lambda, &evals);
  out.c = eig_route.c;
  out.lambda_star = eig_route.lambda_star;

  // Variational route.  Discrete forms matching the assembled stencil:
  //   A_psi = h sum ah psi^2,   R_psi = h sum r psi^2 - m h sum_f mu_f (dpsi/h)^2
  // over psi with h sum psi^2 = 1.  Ascent starts from the principal
  // eigenfunction at lambda*, where the two routes coincide, and must not
  // decrease the objective.
  Eigen::VectorXd psi =
      principal_eigenpair(assemble(out.lambda_star), cfg.tol.eigen).phi / std::sqrt(ht);
  auto stiffness = [&](const Eigen::VectorXd& p) {
    Eigen::VectorXd Kp = Eigen::VectorXd::Zero(nt);
    for (int jf = 0; jf + 1 < nt; ++jf) {
      const double flux = mu_face[jf] * (p[jf + 1] - p[jf]) / (ht * ht);
      Kp[jf] += flux;
      Kp[jf + 1] -= flux;
    }
    return Kp;
  };
  auto forms = [&](const Eigen::VectorXd& p, double& Apsi, double& Rpsi) {
    Apsi = 0.0;
    double rsum = 0.0;
    for (int jn = 0; jn < nt; ++jn) {
      Apsi += ah_node[jn] * p[jn] * p[jn];
      rsum += r_node[jn] * p[jn] * p[jn];
    }
    Apsi *= ht;
    Rpsi = ht * rsum + cfg.m * ht * p.dot(stiffness(p));
  };
  double Apsi = 0.0, Rpsi = 0.0;
  forms(psi, Apsi, Rpsi);
  double best = Apsi * Rpsi;
  double step = 0.1 / std::max(1.0, std::abs(best));
  for (int iter = 0; iter < 200; ++iter) {
    Eigen::VectorXd grad(nt);
    const Eigen::VectorXd Kpsi = stiffness(psi);
    for (int jn = 0; jn < nt; ++jn)
      grad[jn] = 2.0 * ht * (Rpsi * ah_node[jn] * psi[jn] +
                             Apsi * (r_node[jn] * psi[jn] + cfg.m * Kpsi[jn]));
    bool improved = false;
    for (int bt = 0; bt < 20; ++bt) {
      Eigen::VectorXd trial = psi + step * grad;
      trial /= std::sqrt(ht) * trial.norm();
      double At, Rt;
      forms(trial, At, Rt);
      if (Rt > 0.0 && At * Rt > best) {
        psi = trial;
        Apsi = At;
        Rpsi = Rt;
        best = At * Rt;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    step *= 1.5;  // mild recovery after successful steps
  }
  out.c_variational = 2.0 * std::sqrt(std::max(best, 0.0));
  return out;
}

/// Large-mutation limit c^1(a, rbar) on the L-periodic cell.
inline double speed_m_inf(const ModelConfig& cfg) {
  detail::require_a_theta_independent(cfg);
  detail::require_mu_theta_independent(cfg);
  const XField a1 = to_xfield(cfg.a);
  const XField rbar = mean_theta_arith(cfg.r);
  Speed1dOptions opt{cfg.grid.nx, cfg.L, cfg.tol.eigen, cfg.tol.lambda};
  const SpeedResult res = speed_1d(a1, rbar, opt);
  if (!res.persistent)
    throw NotPersistent("kappa^1(0; a, rbar) is not positive");
  return res.c;
}

struct ThetaArgmax {
  double c = 0.0;
  double theta_argmax = 0.0;
};

/// Small-mutation limit: best single-phenotype speed over the persistent
/// slices, with parabolic refinement of the grid argmax.
inline ThetaArgmax speed_m_0(const ModelConfig& cfg, int theta_samples = 129) {
  detail::require_a_theta_independent(cfg);
  detail::require_mu_x_independent(cfg);
  const XField a1 = to_xfield(cfg.a);
  Speed1dOptions opt{cfg.grid.nx, cfg.L, cfg.tol.eigen, cfg.tol.lambda};

  auto slice_speed = [&](double theta) {
    const SpeedResult r = speed_1d(a1, x_slice(cfg.r, theta), opt);
    return r.persistent ? r.c : std::numeric_limits<double>::quiet_NaN();
  };

  const double h = 1.0 / (theta_samples - 1);
  std::vector<double> cs(theta_samples);
  detail::parallel_for(theta_samples, 1,
                       [&](int i) { cs[i] = slice_speed(i * h); });
  int best = -1;
  for (int i = 0; i < theta_samples; ++i)
    if (std::isfinite(cs[i]) && (best < 0 || cs[i] > cs[best])) best = i;
  if (best < 0) throw NotPersistent("no phenotype slice persists");

  ThetaArgmax out{cs[best], best * h};
  if (best > 0 && best + 1 < theta_samples && std::isfinite(cs[best - 1]) &&
      std::isfinite(cs[best + 1])) {
    const double denom = cs[best - 1] - 2.0 * cs[best] + cs[best + 1];
    if (denom < 0.0) {
      double dt = std::clamp(0.5 * (cs[best - 1] - cs[best + 1]) / denom, -1.0, 1.0);
      const double tv = (best + dt) * h;
      const double cv = slice_speed(tv);
      if (std::isfinite(cv) && cv > out.c) out = ThetaArgmax{cv, tv};
    }
  }
  return out;
}

/// Harmonic mean of the frozen-coefficient local speeds 2 sqrt(a H_m).
inline double harmonic_speed(const ModelConfig& cfg, int x_samples = 2048) {
  detail::require_a_theta_independent(cfg);
  const LocalEigCurve curve = local_eig_curve(cfg, x_samples);
  double acc = 0.0;
  for (size_t i = 0; i < curve.H.size(); ++i) {
    if (curve.H[i] <= 0.0)
      throw UndefinedSpeed("H_m is not positive everywhere; c_H is undefined");
    acc += 1.0 / (2.0 * std::sqrt(cfg.a.evaluate(curve.x[i], 0.5) * curve.H[i]));
  }
  return static_cast<double>(curve.H.size()) / acc;
}

namespace detail {

/// The no-dominant-phenotype condition on a sample grid: every theta must be
/// strictly beaten somewhere by some other phenotype.
inline void check_hetero_assumption(const CoefficientField& r, int nx = 128, int ntheta = 64,
                                    double margin = 1e-12) {
  std::vector<double> theta(ntheta);
  for (int j = 0; j < ntheta; ++j) theta[j] = static_cast<double>(j) / (ntheta - 1);
  std::vector<double> rmax_x(nx, -1e300);
  std::vector<std::vector<double>> rv(nx, std::vector<double>(ntheta));
  for (int i = 0; i < nx; ++i) {
    const double x = static_cast<double>(i) / nx;
    for (int j = 0; j < ntheta; ++j) {
      rv[i][j] = r.evaluate(x, theta[j]);
      rmax_x[i] = std::max(rmax_x[i], rv[i][j]);
    }
  }
  for (int j = 0; j < ntheta; ++j) {
    bool beaten = false;
    for (int i = 0; i < nx && !beaten; ++i)
      if (rmax_x[i] > rv[i][j] + margin) beaten = true;
    if (!beaten)
      throw AssumptionViolated("phenotype theta = " + std::to_string(theta[j]) +
                               " is best everywhere (heterogeneity assumption fails)");
  }
}

}  // namespace detail

/// Gap between the two iterated limits (m->0 after L->inf minus L->inf after
/// m->0), evaluated by the two j-integral formulas.  Positive under the
/// no-dominant-phenotype assumption.
inline double mutation_gap(const ModelConfig& cfg) {
  detail::require_a_theta_independent(cfg);
  detail::require_mu_x_independent(cfg);
  detail::check_hetero_assumption(cfg.r);

  const int n = 4096;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = (i + 0.5) / n;

  // first term: j built from H_0(x) = max_theta r(x, theta)
  std::vector<double> H0(n);
  for (int i = 0; i < n; ++i) H0[i] = detail::theta_max_of_r(cfg.r, xs[i]);
  const double term1 = detail::minimize_k_over_j(detail::make_jprofile(cfg, xs, H0));

  // second term: best single-slice j-speed over admissible phenotypes
  auto slice_limit = [&](double theta) {
    std::vector<double> Hs(n);
    for (int i = 0; i < n; ++i) Hs[i] = cfg.r.evaluate(xs[i], theta);
    const double M = *std::max_element(Hs.begin(), Hs.end());
    if (M <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    return detail::minimize_k_over_j(detail::make_jprofile(cfg, xs, Hs));
  };
  const int S = 129;
  const double h = 1.0 / (S - 1);
  std::vector<double> cs(S);
  for (int i = 0; i < S; ++i) cs[i] = slice_limit(i * h);
  int best = -1;
  for (int i = 0; i < S; ++i)
    if (std::isfinite(cs[i]) && (best < 0 || cs[i] > cs[best])) best = i;
  if (best < 0) throw NotPersistent("no phenotype slice persists in the tail limit");
  double term2 = cs[best];
  if (best > 0 && best + 1 < S && std::isfinite(cs[best - 1]) && std::isfinite(cs[best + 1])) {
    const double denom = cs[best - 1] - 2.0 * cs[best] + cs[best + 1];
    if (denom < 0.0) {
      const double dt = std::clamp(0.5 * (cs[best - 1] - cs[best + 1]) / denom, -1.0, 1.0);
      const double cv = slice_limit((best + dt) * h);
      if (std::isfinite(cv)) term2 = std::max(term2, cv);
    }
  }

  const double gamma = term1 - term2;
  if (gamma <= 0.0)
    throw Error("mutation gap came out non-positive despite the heterogeneity check");
  return gamma;
}

}  // namespace kppspread
