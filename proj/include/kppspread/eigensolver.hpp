#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <limits>

#include "kppspread/discretize.hpp"
#include "kppspread/errors.hpp"

namespace kppspread {

/// Principal (Krein-Rutman) eigenpair of a cell operator.
/// phi is strictly positive on the grid and normalized to unit 2-norm.
struct EigenPair {
  double k = 0.0;
  Eigen::VectorXd phi;
  double residual = 0.0;
  int iterations = 0;
};

/// Shifted-inverse power iteration on (sI - A)^-1.
///
/// The initial shift is the operator's shift_bound, which lies strictly above
/// the spectrum, so the resolvent is positivity-improving and the iteration
/// converges to the Perron eigenpair from the all-ones start vector.  When the
/// operator has spectral clusters (large L), the fixed shift contracts too
/// slowly; once the Rayleigh estimate has settled, the shift is pulled toward
/// it and the LU is refactored.  The eigenvalue is extracted as the
/// residual-minimizing quotient k = phi^T A phi / phi^T phi.
inline EigenPair principal_eigenpair(const CellOperator& op, double tol = 1e-10,
                                     int max_iter = 500) {
  const auto& A = op.matrix;
  const int n = static_cast<int>(A.rows());
  Eigen::SparseMatrix<double> I(n, n);
  I.setIdentity();

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  double s = op.shift_bound;
  auto factor = [&](double shift) {
    Eigen::SparseMatrix<double> M = shift * I - A;
    lu.compute(M);
    return lu.info() == Eigen::Success;
  };
  {
    int bumps = 0;
    while (!factor(s)) {
      s += 1.0 + 1e-6 * std::abs(s);
      if (++bumps > 3) throw SingularShift("could not factor the shifted operator");
    }
  }

  Eigen::VectorXd v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
  double k = 0.0, k_prev = std::numeric_limits<double>::quiet_NaN();
  double res = std::numeric_limits<double>::infinity();
  int it = 0;
  bool refined_shift = false;

  auto iterate = [&](int remaining, bool allow_refine) {
    for (int step = 0; step < remaining; ++step) {
      ++it;
      Eigen::VectorXd w = lu.solve(v);
      if (!w.allFinite()) throw SingularShift("resolvent solve produced non-finite values");
      w.normalize();
      v = w;
      Eigen::VectorXd Av = A * v;
      k_prev = k;
      k = v.dot(Av);
      res = (Av - k * v).norm();
      if (res <= tol * (1.0 + std::abs(k))) return true;
      const bool settled = std::isfinite(k_prev) && std::abs(k - k_prev) < 0.01 * (s - k);
      if (allow_refine && it >= 8 && it % 4 == 0 && settled &&
          s - k > 1e3 * tol * (1.0 + std::abs(k))) {
        const double snew = k + std::max(1e-10, 0.05 * (s - k));
        if (factor(snew)) {
          s = snew;
          refined_shift = true;
        } else {
          factor(s);  // restore
        }
      }
    }
    return false;
  };

  bool ok = iterate(max_iter, true);
  if (ok && refined_shift) {
    // certify the Perron pair: the principal eigenvector has one sign
    const double vmax = v.maxCoeff(), vmin = v.minCoeff();
    if (vmin < -1e-6 * std::max(std::abs(vmax), 1e-300) && vmax > 1e-6 * std::abs(vmin)) {
      // refined shift locked onto a non-principal pair; redo conservatively
      factor(op.shift_bound);
      s = op.shift_bound;
      v = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
      it = 0;
      ok = iterate(8 * max_iter, false);
    }
  }
  if (!ok)
    throw NoConvergence("principal eigenpair: no convergence after " + std::to_string(it) +
                        " iterations (residual " + std::to_string(res) + ")");
  if (v.sum() < 0.0) v = -v;
  return EigenPair{k, std::move(v), res, it};
}

/// Rayleigh quotient v^T A v / v^T v.  Only meaningful for the self-adjoint
/// divergence form, i.e. lambda = 0.
inline double rayleigh_value(const CellOperator& op, const Eigen::VectorXd& v) {
  if (op.lambda != 0.0) throw NotSymmetric("rayleigh_value requires lambda = 0");
  const double vv = v.squaredNorm();
  if (vv == 0.0) throw Error("rayleigh_value: zero vector");
  return v.dot(op.matrix * v) / vv;
}

}  // namespace kppspread
