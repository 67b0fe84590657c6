#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "kppspread/asymptotics.hpp"
#include "kppspread/coeffs.hpp"
#include "kppspread/discretize.hpp"
#include "kppspread/eigensolver.hpp"
#include "kppspread/speed.hpp"

namespace kppspread {

struct CheckItem {
  std::string name;
  bool pass = false;
  double margin = 0.0;  // how far inside the bound the measurement landed
  std::string detail;
};

struct CheckReport {
  std::vector<CheckItem> items;
  bool all_pass = true;

  void add(const std::string& name, bool pass, double margin, const std::string& detail = "") {
    items.push_back({name, pass, margin, detail});
    all_pass = all_pass && pass;
  }
};

/// Run the per-module invariant suites on a config.  Deterministic (fixed
/// seeds, fixed iteration orders).
inline CheckReport run_checks(const ModelConfig& cfg) {
  CheckReport rep;
  std::mt19937_64 rng(20240811u);
  std::uniform_real_distribution<double> ux(0.0, 1.0);

  {  // exact periodicity in x
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = ux(rng), th = ux(rng);
      for (const CoefficientField* f : {&cfg.a, &cfg.mu, &cfg.r})
        worst = std::max(worst, std::abs(f->evaluate(x + 1.0, th) - f->evaluate(x, th)));
    }
    rep.add("coeffs.periodicity", worst <= 1e-13, 1e-13 - worst);
  }
  {  // analytic x-derivative vs central finite difference
    const double h = 1e-5;
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = ux(rng), th = ux(rng);
      for (const CoefficientField* f : {&cfg.a, &cfg.mu, &cfg.r}) {
        const double fd = (f->evaluate(x + h, th) - f->evaluate(x - h, th)) / (2 * h);
        const double an = f->evaluate_dx(x, th);
        worst = std::max(worst, std::abs(an - fd) / (1.0 + std::abs(an)));
      }
    }
    rep.add("coeffs.dx_matches_fd", worst <= 1e-6, 1e-6 - worst);
  }
  {  // harmonic mean <= arithmetic mean for the positive fields
    const auto ah = mean_x_harm(cfg.a);
    const auto aa = mean_x_arith(cfg.a);
    const auto mh = mean_x_harm(cfg.mu);
    const auto ma = mean_x_arith(cfg.mu);
    double worst = -1e300;
    for (int j = 0; j <= 32; ++j) {
      const double th = j / 32.0;
      worst = std::max(worst, ah(th) - aa(th));
      worst = std::max(worst, mh(th) - ma(th));
    }
    rep.add("coeffs.am_hm", worst <= 1e-12, 1e-12 - worst);
  }
  {  // parse -> serialize -> parse round trip
    ModelConfig back = parse_config(serialize_config(cfg));
    const bool same = back.a == cfg.a && back.mu == cfg.mu && back.r == cfg.r &&
                      back.m == cfg.m && back.L == cfg.L;
    rep.add("coeffs.roundtrip", same, same ? 1.0 : -1.0);
  }

  const CellOperator op0 = assemble_cell(cfg, 0.0);
  {  // self-adjoint divergence form at lambda = 0
    Eigen::SparseMatrix<double> diff = Eigen::SparseMatrix<double>(op0.matrix.transpose()) - op0.matrix;
    double worst = 0.0;
    for (int k = 0; k < diff.outerSize(); ++k)
      for (Eigen::SparseMatrix<double>::InnerIterator it(diff, k); it; ++it)
        worst = std::max(worst, std::abs(it.value()));
    rep.add("discretize.symmetric_at_lambda0", worst <= 1e-11 * (1.0 + cfg.a_bounds.max),
            1e-11 * (1.0 + cfg.a_bounds.max) - worst);
  }
  {  // discrete divergence theorem: diffusion columns sum to zero
    const Grid& g = op0.grid;
    Eigen::VectorXd colsum = Eigen::VectorXd::Ones(op0.matrix.rows()).transpose() * op0.matrix;
    double worst = 0.0;
    for (int i = 0; i < g.nx; ++i)
      for (int j = 0; j < g.ntheta; ++j)
        worst = std::max(worst, std::abs(colsum[g.idx(i, j)] -
                                         cfg.r.evaluate(g.x(i), g.theta(j))));
    const double scale = 1e-9 * (1.0 + cfg.a_bounds.max / (cfg.L * cfg.L) /
                                           (g.hx * g.hx));
    rep.add("discretize.flux_conservation", worst <= scale, scale - worst);
  }

  const EigenPair pair0 = principal_eigenpair(op0, cfg.tol.eigen);
  {  // positive principal eigenfunction
    rep.add("eigen.positivity", pair0.phi.minCoeff() > 0.0, pair0.phi.minCoeff());
  }
  {  // eigenvalue symmetry in lambda
    double worst = 0.0;
    for (double lam : {0.3, 1.0, 2.5}) {
      const double kp = principal_eigenpair(assemble_cell(cfg, lam), cfg.tol.eigen).k;
      const double km = principal_eigenpair(assemble_cell(cfg, -lam), cfg.tol.eigen).k;
      worst = std::max(worst, std::abs(kp - km));
    }
    rep.add("eigen.lambda_symmetry", worst <= 1e-8, 1e-8 - worst);
  }
  {  // convexity of the eigencurve on random pairs
    std::uniform_real_distribution<double> ul(-2.0, 2.0);
    double worst = 1e300;
    for (int trial = 0; trial < 4; ++trial) {
      const double l1 = ul(rng), l2 = ul(rng);
      const double k1 = principal_eigenpair(assemble_cell(cfg, l1), cfg.tol.eigen).k;
      const double k2 = principal_eigenpair(assemble_cell(cfg, l2), cfg.tol.eigen).k;
      const double km = principal_eigenpair(assemble_cell(cfg, 0.5 * (l1 + l2)), cfg.tol.eigen).k;
      worst = std::min(worst, k1 + k2 - 2.0 * km);
    }
    rep.add("eigen.lambda_convexity", worst >= -4.0 * cfg.tol.eigen, worst + 4.0 * cfg.tol.eigen);
  }
  {  // eigenvalue bounds with discretization slack
    const Grid g = op0.grid;
    const double slack = 10.0 * (g.hx * g.hx + g.htheta * g.htheta) *
                         (cfg.a_bounds.max * 5.0 + cfg.a_bounds.max_abs_dx + std::abs(cfg.r_bounds.max) +
                          std::abs(cfg.r_bounds.min));
    double worst = 1e300;
    for (double lam : {0.5, 1.5}) {
      const double k = principal_eigenpair(assemble_cell(cfg, lam), cfg.tol.eigen).k;
      const double up = lam * lam * cfg.a_bounds.max + lam * cfg.a_bounds.max_abs_dx / cfg.L +
                        cfg.r_bounds.max;
      const double dn = lam * lam * cfg.a_bounds.min - lam * cfg.a_bounds.max_abs_dx / cfg.L +
                        cfg.r_bounds.min;
      worst = std::min({worst, up + slack - k, k - (dn - slack)});
    }
    rep.add("eigen.klambda_bounds", worst >= 0.0, worst);
  }
  {  // Rayleigh quotient is maximized by the principal pair at lambda = 0
    std::normal_distribution<double> gauss;
    double worst = -1e300;
    for (int trial = 0; trial < 100; ++trial) {
      Eigen::VectorXd v(op0.matrix.rows());
      for (int i = 0; i < v.size(); ++i) v[i] = gauss(rng);
      worst = std::max(worst, rayleigh_value(op0, v) - pair0.k);
    }
    rep.add("eigen.rayleigh_max", worst <= 1e-8, 1e-8 - worst);
    const double at_phi = std::abs(rayleigh_value(op0, pair0.phi) - pair0.k);
    rep.add("eigen.rayleigh_at_phi", at_phi <= 1e-9, 1e-9 - at_phi);
  }

  const SpeedResult sp = fg_speed(cfg);
  if (sp.persistent) {
    {  // ratio identity at the minimizer
      const double err = std::abs(sp.c * sp.lambda_star - sp.k_at_lambda_star);
      const double tol = 10.0 * cfg.tol.lambda * (1.0 + std::abs(sp.k_at_lambda_star));
      rep.add("speed.ratio_identity", err <= tol, tol - err);
    }
    {  // c is the infimum of k^lambda / lambda
      double worst = 1e300;
      for (double f : {0.5, 1.5, 3.0}) {
        const double lam = f * sp.lambda_star;
        const double k = principal_eigenpair(assemble_cell(cfg, lam), cfg.tol.eigen).k;
        worst = std::min(worst, k / lam - sp.c);
      }
      rep.add("speed.infimum", worst >= -1e-9, worst + 1e-9);
    }
    {  // monotone in L
      ModelConfig c2 = cfg;
      c2.L = 2.0 * cfg.L;
      const SpeedResult sp2 = fg_speed(c2);
      rep.add("speed.monotone_L", sp2.persistent && sp2.c >= sp.c - 2e-6,
              sp2.persistent ? sp2.c - sp.c + 2e-6 : -1.0);
      double worst = 1e300;
      for (double lam : {0.5, 1.0}) {
        const double kL = principal_eigenpair(assemble_cell(cfg, lam), cfg.tol.eigen).k;
        const double kL2 = principal_eigenpair(assemble_cell(c2, lam), cfg.tol.eigen).k;
        worst = std::min(worst, kL2 - kL);
      }
      rep.add("speed.monotone_kL", worst >= -1e-8, worst + 1e-8);
    }
  } else {
    rep.add("speed.not_persistent", true, 0.0, "k0 <= 0; speed checks skipped");
  }
  {  // k^0 nonincreasing in the mutation coefficient
    double prev = 1e300;
    double worst = 1e300;
    for (double mm : {0.1 * cfg.m, cfg.m, 10.0 * cfg.m}) {
      ModelConfig cm = cfg;
      cm.m = mm;
      const double k0 = principal_eigenpair(assemble_cell(cm, 0.0), cfg.tol.eigen).k;
      if (prev < 1e300) worst = std::min(worst, prev - k0);
      prev = k0;
    }
    rep.add("speed.k0_nonincreasing_m", worst >= -1e-8, worst + 1e-8);
  }
  if (cfg.mu.x_independent()) {  // H_m pointwise nonincreasing in m
    ModelConfig c1 = cfg, c2 = cfg;
    c2.m = 10.0 * cfg.m;
    const LocalEigCurve h1 = local_eig_curve(c1, 33);
    const LocalEigCurve h2 = local_eig_curve(c2, 33);
    double worst = 1e300;
    for (size_t i = 0; i < h1.H.size(); ++i) worst = std::min(worst, h1.H[i] - h2.H[i]);
    rep.add("asymptotics.H_monotone_m", worst >= -1e-8, worst + 1e-8);
  }
  return rep;
}

}  // namespace kppspread
