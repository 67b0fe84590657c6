#pragma once

#include <Eigen/Sparse>
#include <functional>
#include <vector>

#include "kppspread/coeffs.hpp"
#include "kppspread/errors.hpp"

namespace kppspread {

/// Unit-cell grid.  x is periodic with nodes i/nx; theta is cell-centered,
/// nodes (j+1/2)/ntheta, so the Neumann condition is a zero-flux boundary
/// face (ghost mirror across the face).  Index convention: idx(i,j) = i*ntheta + j.
struct Grid {
  int nx = 1;
  int ntheta = 1;
  double hx = 1.0;
  double htheta = 1.0;

  static Grid make(int nx, int ntheta) {
    return Grid{nx, ntheta, 1.0 / nx, 1.0 / ntheta};
  }
  int size() const { return nx * ntheta; }
  int idx(int i, int j) const { return i * ntheta + j; }
  double x(int i) const { return i * hx; }
  double theta(int j) const { return (j + 0.5) * htheta; }
};

/// Discretized operator on the rescaled unit cell:
///
///   (1/L^2) d_x(a d_x .) + m d_th(mu d_th .) - (lam/L)[a d_x + d_x(a .)]
///   + (r + lam^2 a) .
///
/// whose principal eigenvalue equals the tilted periodic eigenvalue of the
/// physical L-periodic operator.  The first-order part is kept in skew form
/// (it equals -2 lam a d_x - lam d_x a), so transposing the matrix flips the
/// sign of lambda exactly.
struct CellOperator {
  Grid grid;
  double m = 0.0;
  double L = 1.0;
  double lambda = 0.0;
  double shift_bound = 0.0;  // real upper bound on the spectrum, plus margin 1
  Eigen::SparseMatrix<double> matrix;
};

namespace detail {

using Coeff2 = std::function<double(double, double)>;

/// Shared 5-point assembly.  Conservative flux differences with
/// face-evaluated coefficients; centered skew drift; zero-flux theta faces.
inline Eigen::SparseMatrix<double> assemble_matrix(const Grid& g, double m, double L,
                                                   double lambda, const Coeff2& a,
                                                   const Coeff2& mu, const Coeff2& r) {
  const int n = g.size();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(n) * 5);
  const double ax_scale = 1.0 / (L * L * g.hx * g.hx);
  const double drift_scale = lambda / (2.0 * L * g.hx);
  const double th_scale = m / (g.htheta * g.htheta);

  for (int i = 0; i < g.nx; ++i) {
    const double xi = g.x(i);
    const int ip = (i + 1) % g.nx;
    const int im = (i - 1 + g.nx) % g.nx;
    for (int j = 0; j < g.ntheta; ++j) {
      const double tj = g.theta(j);
      double diag = r(xi, tj) + lambda * lambda * a(xi, tj);
      if (g.nx > 1) {
        const double ae = a(xi + 0.5 * g.hx, tj) * ax_scale;
        const double aw = a(xi - 0.5 * g.hx, tj) * ax_scale;
        // skew drift couples only the x-neighbours
        const double de = drift_scale * (a(xi, tj) + a(g.x(ip), tj));
        const double dw = drift_scale * (a(xi, tj) + a(g.x(im), tj));
        trip.emplace_back(g.idx(i, j), g.idx(ip, j), ae - de);
        trip.emplace_back(g.idx(i, j), g.idx(im, j), aw + dw);
        diag -= ae + aw;
      }
      if (g.ntheta > 1) {
        if (j + 1 < g.ntheta) {
          const double mn = mu(xi, tj + 0.5 * g.htheta) * th_scale;
          trip.emplace_back(g.idx(i, j), g.idx(i, j + 1), mn);
          diag -= mn;
        }
        if (j > 0) {
          const double ms = mu(xi, tj - 0.5 * g.htheta) * th_scale;
          trip.emplace_back(g.idx(i, j), g.idx(i, j - 1), ms);
          diag -= ms;
        }
      }
      trip.emplace_back(g.idx(i, j), g.idx(i, j), diag);
    }
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

inline double shift_from_bounds(double lambda, double sup_a, double sup_dax, double sup_r,
                                double L) {
  return lambda * lambda * sup_a + std::abs(lambda) * sup_dax / L + sup_r + 1.0;
}

}  // namespace detail

/// Full cell operator for a validated config.
inline CellOperator assemble_cell(const ModelConfig& cfg, double lambda) {
  if (cfg.a_bounds.min < kEllipticityFloor || cfg.mu_bounds.min < kEllipticityFloor)
    throw ValidationError("assemble_cell: config has not passed validation");
  CellOperator op;
  op.grid = Grid::make(cfg.grid.nx, cfg.grid.ntheta);
  op.m = cfg.m;
  op.L = cfg.L;
  op.lambda = lambda;
  op.shift_bound = detail::shift_from_bounds(lambda, cfg.a_bounds.max,
                                             cfg.a_bounds.max_abs_dx, cfg.r_bounds.max, cfg.L);
  op.matrix = detail::assemble_matrix(
      op.grid, cfg.m, cfg.L, lambda,
      [&](double x, double t) { return cfg.a.evaluate(x, t); },
      [&](double x, double t) { return cfg.mu.evaluate(x, t); },
      [&](double x, double t) { return cfg.r.evaluate(x, t); });
  return op;
}

/// 1D periodic operator for the phenotype-free eigenvalue kappa^1:
/// (1/L^2)(A p')' - (lam/L)[A d_x + d_x(A .)] + (R + lam^2 A) p.
inline CellOperator assemble_x(const XField& A, const XField& R, double lambda, int nx,
                               double L = 1.0) {
  CellOperator op;
  op.grid = Grid::make(nx, 1);
  op.m = 0.0;
  op.L = L;
  op.lambda = lambda;
  double sup_a = -1e300, sup_r = -1e300, min_a = 1e300, sup_dax = 0.0;
  for (int i = 0; i < 2 * nx; ++i) {
    const double x = 0.5 * i / nx;
    sup_a = std::max(sup_a, A(x));
    min_a = std::min(min_a, A(x));
    sup_r = std::max(sup_r, R(x));
    sup_dax = std::max(sup_dax, std::abs(A.deriv(x)));
  }
  if (min_a <= 0.0) throw NonPositiveField("assemble_x: diffusion field A is not positive");
  op.shift_bound = detail::shift_from_bounds(lambda, sup_a, sup_dax, sup_r, L);
  op.matrix = detail::assemble_matrix(
      op.grid, 0.0, L, lambda, [&](double x, double) { return A(x); },
      [](double, double) { return 1.0; }, [&](double x, double) { return R(x); });
  return op;
}

/// 1D Neumann operator m (mu psi')' + pot psi on the theta interval.
/// The potential may carry an extra theta-dependent term (e.g. lam^2 a~^H).
inline CellOperator assemble_theta(const std::function<double(double)>& mu_slice,
                                   const std::function<double(double)>& pot, double m,
                                   int ntheta) {
  CellOperator op;
  op.grid = Grid::make(1, ntheta);
  op.m = m;
  op.L = 1.0;
  op.lambda = 0.0;
  double sup_pot = -1e300, min_mu = 1e300;
  for (int j = 0; j <= 2 * ntheta; ++j) {
    const double t = 0.5 * j / ntheta;
    sup_pot = std::max(sup_pot, pot(t));
    min_mu = std::min(min_mu, mu_slice(t));
  }
  if (min_mu <= 0.0) throw NonPositiveField("assemble_theta: mu slice is not positive");
  op.shift_bound = sup_pot + 1.0;
  op.matrix = detail::assemble_matrix(
      op.grid, m, 1.0, 0.0, [](double, double) { return 1.0; },
      [&](double, double t) { return mu_slice(t); }, [&](double, double t) { return pot(t); });
  return op;
}

inline CellOperator assemble_theta(const ThetaField& mu_slice, const ThetaField& r_slice,
                                   double m, double extra_const, int ntheta) {
  return assemble_theta([&](double t) { return mu_slice(t); },
                        [&, extra_const](double t) { return r_slice(t) + extra_const; }, m,
                        ntheta);
}

}  // namespace kppspread
