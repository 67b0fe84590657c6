// Test-only oracles: independent dense assembly, full-spectrum dense
// eigendecomposition, high-resolution quadrature, and closed forms.  These
// deliberately do not share code with the library's sparse assembly or
// iterative solver so the two paths can check each other.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <stdexcept>

#include "kppspread/coeffs.hpp"

namespace oracle {

using kppspread::CoefficientField;
using kppspread::ModelConfig;

// Dense assembly of the rescaled unit-cell operator by plain loops.
// x periodic with nodes i/nx, theta cell-centered (j+1/2)/nt with zero-flux
// boundary faces; conservative fluxes; first-order part in the skew form
// -(lam/L)[a d_x + d_x(a .)] discretized with centered differences.
inline Eigen::MatrixXd dense_cell_matrix(const ModelConfig& cfg, double lam, int nx, int nt) {
  const double hx = 1.0 / nx;
  const double ht = 1.0 / nt;
  const int n = nx * nt;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  auto id = [&](int i, int j) { return ((i % nx + nx) % nx) * nt + j; };
  for (int i = 0; i < nx; ++i) {
    const double x = i * hx;
    for (int j = 0; j < nt; ++j) {
      const double th = (j + 0.5) * ht;
      const int row = id(i, j);
      A(row, row) += cfg.r.evaluate(x, th) + lam * lam * cfg.a.evaluate(x, th);
      if (nx > 1) {
        const double ae = cfg.a.evaluate(x + 0.5 * hx, th) / (cfg.L * cfg.L * hx * hx);
        const double aw = cfg.a.evaluate(x - 0.5 * hx, th) / (cfg.L * cfg.L * hx * hx);
        A(row, id(i + 1, j)) += ae;
        A(row, id(i - 1, j)) += aw;
        A(row, row) -= ae + aw;
        const double s = lam / (2.0 * cfg.L * hx);
        A(row, id(i + 1, j)) -= s * (cfg.a.evaluate(x, th) + cfg.a.evaluate((i + 1) * hx, th));
        A(row, id(i - 1, j)) += s * (cfg.a.evaluate(x, th) + cfg.a.evaluate((i - 1) * hx, th));
      }
      if (nt > 1) {
        if (j + 1 < nt) {
          const double mn = cfg.m * cfg.mu.evaluate(x, th + 0.5 * ht) / (ht * ht);
          A(row, id(i, j + 1)) += mn;
          A(row, row) -= mn;
        }
        if (j > 0) {
          const double ms = cfg.m * cfg.mu.evaluate(x, th - 0.5 * ht) / (ht * ht);
          A(row, id(i, j - 1)) += ms;
          A(row, row) -= ms;
        }
      }
    }
  }
  return A;
}

// Principal eigenvalue = eigenvalue of maximal real part, from the full dense
// spectrum.  The principal eigenvalue of these operators is real and simple;
// a noticeable imaginary part signals a bug.
inline double dense_principal_eigenvalue(const Eigen::MatrixXd& A) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) throw std::runtime_error("dense eigensolver failed");
  const auto& vals = es.eigenvalues();
  int best = 0;
  for (int i = 1; i < vals.size(); ++i)
    if (vals[i].real() > vals[best].real()) best = i;
  if (std::abs(vals[best].imag()) > 1e-7 * (1.0 + std::abs(vals[best].real())))
    throw std::runtime_error("principal dense eigenvalue has an imaginary part");
  return vals[best].real();
}

inline double dense_principal_eigenvalue(const ModelConfig& cfg, double lam, int nx, int nt) {
  return dense_principal_eigenvalue(dense_cell_matrix(cfg, lam, nx, nt));
}

// High-resolution trapezoid quadrature of g over one x-period.
template <class F>
double periodic_quadrature(const F& g, int n = 1 << 16) {
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += g(static_cast<double>(i) / n);
  return acc / n;
}

// Logistic growth rho' = rho (1 - rho) from rho0 at t = 0.
inline double logistic(double t, double rho0) {
  return rho0 / (rho0 + (1.0 - rho0) * std::exp(-t));
}

// Random smooth elliptic configs for property and equivalence tests.
inline ModelConfig random_config(std::mt19937_64& rng, int nx = 16, int nt = 12) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  using kppspread::SeparableTerm;
  using kppspread::ThetaBasis;
  using kppspread::XBasis;
  auto field = [&](double base, double amp) {
    CoefficientField f;
    f.terms.push_back({base, XBasis::One, 0, ThetaBasis::One, 0});
    f.terms.push_back({amp * u(rng), XBasis::Cos, 1, ThetaBasis::One, 0});
    f.terms.push_back({amp * u(rng), XBasis::Sin, 1, ThetaBasis::NCos, 1});
    f.terms.push_back({amp * u(rng), XBasis::One, 0, ThetaBasis::NCos, 2});
    return f;
  };
  ModelConfig cfg;
  cfg.a = field(1.2, 0.25);
  cfg.mu = field(1.0, 0.2);
  cfg.r = field(0.9, 0.45);
  cfg.m = std::exp(u(rng));
  cfg.L = std::exp(u(rng));
  cfg.grid = {nx, nt};
  kppspread::validate(cfg);
  return cfg;
}

}  // namespace oracle
