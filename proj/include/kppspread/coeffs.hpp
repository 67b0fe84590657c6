#pragma once

#include <algorithm>
#include <cassert>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "kppspread/errors.hpp"

namespace kppspread {

inline constexpr double kPi = 3.14159265358979323846;

// x-basis: 1, cos(2*pi*n*x), sin(2*pi*n*x) -- 1-periodic by construction.
enum class XBasis { One, Cos, Sin };
// theta-basis: 1, cos(pi*n*theta) -- zero theta-derivative at theta = 0 and 1.
enum class ThetaBasis { One, NCos };

/// One separable term weight * X(x) * T(theta) of a coefficient field.
struct SeparableTerm {
  double weight = 0.0;
  XBasis xb = XBasis::One;
  int xn = 0;  // frequency index, >= 1 for Cos/Sin
  ThetaBasis tb = ThetaBasis::One;
  int tn = 0;  // frequency index, >= 1 for NCos

  double x_value(double x) const {
    switch (xb) {
      case XBasis::One: return 1.0;
      case XBasis::Cos: return std::cos(2.0 * kPi * xn * x);
      case XBasis::Sin: return std::sin(2.0 * kPi * xn * x);
    }
    return 0.0;
  }
  double x_deriv(double x) const {
    switch (xb) {
      case XBasis::One: return 0.0;
      case XBasis::Cos: return -2.0 * kPi * xn * std::sin(2.0 * kPi * xn * x);
      case XBasis::Sin: return 2.0 * kPi * xn * std::cos(2.0 * kPi * xn * x);
    }
    return 0.0;
  }
  double theta_value(double th) const {
    return tb == ThetaBasis::One ? 1.0 : std::cos(kPi * tn * th);
  }
  // exact integrals of the basis over one period / over [0,1]
  double x_mean() const { return xb == XBasis::One ? 1.0 : 0.0; }
  double theta_mean() const { return tb == ThetaBasis::One ? 1.0 : 0.0; }

  bool operator==(const SeparableTerm&) const = default;
};

inline double reduce_mod1(double x) {
  double y = x - std::floor(x);
  return y < 1.0 ? y : 0.0;
}

/// Coefficient field on the unit cell [0,1) x [0,1], 1-periodic in x.
/// Immutable after construction; evaluation is pure.
struct CoefficientField {
  std::vector<SeparableTerm> terms;

  double operator()(double x, double th) const { return evaluate(x, th); }

  double evaluate(double x, double th) const {
    assert(th >= -0.5 && th <= 1.5);  // faces of boundary cells may poke outside [0,1]
    const double xr = reduce_mod1(x);
    double s = 0.0;
    for (const auto& t : terms) s += t.weight * t.x_value(xr) * t.theta_value(th);
    return s;
  }

  /// Exact analytic x-derivative of the basis sum.
  double evaluate_dx(double x, double th) const {
    const double xr = reduce_mod1(x);
    double s = 0.0;
    for (const auto& t : terms) s += t.weight * t.x_deriv(xr) * t.theta_value(th);
    return s;
  }

  bool x_independent() const {
    return std::all_of(terms.begin(), terms.end(),
                       [](const SeparableTerm& t) { return t.xb == XBasis::One; });
  }
  bool theta_independent() const {
    return std::all_of(terms.begin(), terms.end(),
                       [](const SeparableTerm& t) { return t.tb == ThetaBasis::One; });
  }

  bool operator==(const CoefficientField&) const = default;
};

/// 1D field over the periodic x cell (a theta-slice or theta-average).
struct XField {
  struct Term {
    double weight;
    XBasis xb;
    int xn;
  };
  std::vector<Term> terms;

  double operator()(double x) const {
    const double xr = reduce_mod1(x);
    double s = 0.0;
    for (const auto& t : terms) {
      SeparableTerm b{t.weight, t.xb, t.xn, ThetaBasis::One, 0};
      s += t.weight * b.x_value(xr);
    }
    return s;
  }
  double deriv(double x) const {
    const double xr = reduce_mod1(x);
    double s = 0.0;
    for (const auto& t : terms) {
      SeparableTerm b{t.weight, t.xb, t.xn, ThetaBasis::One, 0};
      s += t.weight * b.x_deriv(xr);
    }
    return s;
  }
};

/// 1D field over the theta interval (an x-average).
struct ThetaField {
  struct Term {
    double weight;
    ThetaBasis tb;
    int tn;
  };
  std::vector<Term> terms;

  double operator()(double th) const {
    double s = 0.0;
    for (const auto& t : terms)
      s += t.weight * (t.tb == ThetaBasis::One ? 1.0 : std::cos(kPi * t.tn * th));
    return s;
  }
};

/// Arithmetic x-mean, exact from the basis (Cos/Sin integrate to zero).
inline ThetaField mean_x_arith(const CoefficientField& f) {
  ThetaField out;
  for (const auto& t : f.terms)
    if (t.xb == XBasis::One) out.terms.push_back({t.weight, t.tb, t.tn});
  return out;
}

/// Arithmetic theta-mean, exact from the basis (NCos integrates to zero).
inline XField mean_theta_arith(const CoefficientField& f) {
  XField out;
  for (const auto& t : f.terms)
    if (t.tb == ThetaBasis::One) out.terms.push_back({t.weight, t.xb, t.xn});
  return out;
}

/// Harmonic x-mean (integral of 1/f)^-1 by composite trapezoid quadrature,
/// which on smooth periodic integrands converges past machine precision well
/// before the default node count.
inline std::function<double(double)> mean_x_harm(const CoefficientField& f,
                                                 int quad_points = 2048) {
  return [f, quad_points](double th) {
    double acc = 0.0;
    const double h = 1.0 / quad_points;
    for (int i = 0; i < quad_points; ++i) {
      const double v = f.evaluate(i * h, th);
      if (v <= 0.0) throw NonPositiveField("harmonic mean of a non-positive field");
      acc += 1.0 / v;
    }
    return 1.0 / (acc * h);
  };
}

/// Slice at fixed theta, exact: theta factors collapse into the weights.
inline XField x_slice(const CoefficientField& f, double theta) {
  XField out;
  for (const auto& t : f.terms)
    out.terms.push_back({t.weight * t.theta_value(theta), t.xb, t.xn});
  return out;
}

/// Reinterpret a theta-independent field as 1D.
inline XField to_xfield(const CoefficientField& f) {
  if (!f.theta_independent())
    throw AssumptionViolated("field depends on theta, cannot reduce to 1D");
  XField out;
  for (const auto& t : f.terms) out.terms.push_back({t.weight, t.xb, t.xn});
  return out;
}

/// Reinterpret an x-independent field as a function of theta only.
inline ThetaField to_thetafield(const CoefficientField& f) {
  if (!f.x_independent())
    throw AssumptionViolated("field depends on x, cannot reduce to theta-only");
  ThetaField out;
  for (const auto& t : f.terms) out.terms.push_back({t.weight, t.tb, t.tn});
  return out;
}

struct GridSpec {
  int nx = 64;
  int ntheta = 32;
};

struct Tolerances {
  double eigen = 1e-10;   // relative eigen-residual
  double lambda = 1e-6;   // golden-section bracket width
};

/// Sampled sup/inf bounds of a field, used for ellipticity checks and the
/// spectral shift bound.
struct FieldBounds {
  double min = 0.0;
  double max = 0.0;
  double max_abs_dx = 0.0;
};

inline FieldBounds sample_bounds(const CoefficientField& f, int nx = 256, int nt = 256) {
  FieldBounds b;
  b.min = std::numeric_limits<double>::infinity();
  b.max = -b.min;
  for (int i = 0; i < nx; ++i) {
    const double x = static_cast<double>(i) / nx;
    for (int j = 0; j < nt; ++j) {
      const double th = nt == 1 ? 0.5 : static_cast<double>(j) / (nt - 1);
      const double v = f.evaluate(x, th);
      b.min = std::min(b.min, v);
      b.max = std::max(b.max, v);
      b.max_abs_dx = std::max(b.max_abs_dx, std::abs(f.evaluate_dx(x, th)));
    }
  }
  return b;
}

struct ModelConfig {
  CoefficientField a, mu, r;
  double m = 1.0;
  double L = 1.0;
  GridSpec grid;
  Tolerances tol;
  // filled by validate()
  FieldBounds a_bounds, mu_bounds, r_bounds;
};

inline constexpr double kEllipticityFloor = 1e-8;

/// Sample bounds and enforce the config invariants.
inline void validate(ModelConfig& cfg) {
  if (!(cfg.m > 0.0)) throw ValidationError("m must be positive");
  if (!(cfg.L > 0.0)) throw ValidationError("L must be positive");
  if (cfg.grid.nx < 8) throw ValidationError("Nx must be at least 8");
  if (cfg.grid.ntheta < 4) throw ValidationError("Ntheta must be at least 4");
  if (!(cfg.tol.eigen > 0.0) || !(cfg.tol.lambda > 0.0))
    throw ValidationError("tolerances must be positive");
  cfg.a_bounds = sample_bounds(cfg.a);
  cfg.mu_bounds = sample_bounds(cfg.mu);
  cfg.r_bounds = sample_bounds(cfg.r);
  if (cfg.a_bounds.min < kEllipticityFloor)
    throw ValidationError("a is not uniformly elliptic on the sample grid");
  if (cfg.mu_bounds.min < kEllipticityFloor)
    throw ValidationError("mu is not uniformly elliptic on the sample grid");
}

namespace detail {

inline bool parse_basis_token(const std::string& tok, const std::string& prefix, int& n) {
  if (tok.size() <= prefix.size() || tok.compare(0, prefix.size(), prefix) != 0) return false;
  n = 0;
  for (size_t i = prefix.size(); i < tok.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
    n = n * 10 + (tok[i] - '0');
  }
  return n >= 1;
}

inline double parse_number(const std::string& tok, int line, const char* what) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + tok + "'");
  }
  if (pos != tok.size())
    throw ParseError("line " + std::to_string(line) + ": bad " + what + " '" + tok + "'");
  return v;
}

}  // namespace detail

/// Parse the line-oriented key/value config format.
///
/// Scalar keys: m, L, Nx, Ntheta, tol_eigen, tol_lambda.  Coefficient blocks
/// `a:`, `mu:`, `r:` are followed by lines `term <weight> <xbasis> <thetabasis>`
/// with xbasis in {one, cos<n>, sin<n>} and thetabasis in {one, ncos<n>}.
/// `#` starts a comment.  Unknown keys are errors.
inline ModelConfig parse_config(const std::string& text) {
  ModelConfig cfg;
  CoefficientField* block = nullptr;
  bool seen_m = false, seen_L = false;
  bool seen_a = false, seen_mu = false, seen_r = false;

  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;

    if (key == "a:" || key == "mu:" || key == "r:") {
      block = key == "a:" ? &cfg.a : key == "mu:" ? &cfg.mu : &cfg.r;
      (key == "a:" ? seen_a : key == "mu:" ? seen_mu : seen_r) = true;
      std::string extra;
      if (ls >> extra) throw ParseError("line " + std::to_string(lineno) + ": trailing tokens after block header");
      continue;
    }
    if (key == "term") {
      if (!block) throw ParseError("line " + std::to_string(lineno) + ": term outside a coefficient block");
      std::string wtok, xtok, ttok, extra;
      if (!(ls >> wtok >> xtok >> ttok))
        throw ParseError("line " + std::to_string(lineno) + ": term needs <weight> <xbasis> <thetabasis>");
      if (ls >> extra) throw ParseError("line " + std::to_string(lineno) + ": trailing tokens after term");
      SeparableTerm t;
      t.weight = detail::parse_number(wtok, lineno, "weight");
      int n = 0;
      if (xtok == "one") {
        t.xb = XBasis::One;
      } else if (detail::parse_basis_token(xtok, "cos", n)) {
        t.xb = XBasis::Cos;
        t.xn = n;
      } else if (detail::parse_basis_token(xtok, "sin", n)) {
        t.xb = XBasis::Sin;
        t.xn = n;
      } else {
        throw ParseError("line " + std::to_string(lineno) + ": bad x-basis '" + xtok + "'");
      }
      if (ttok == "one") {
        t.tb = ThetaBasis::One;
      } else if (detail::parse_basis_token(ttok, "ncos", n)) {
        t.tb = ThetaBasis::NCos;
        t.tn = n;
      } else {
        throw ParseError("line " + std::to_string(lineno) + ": bad theta-basis '" + ttok + "'");
      }
      block->terms.push_back(t);
      continue;
    }

    // scalar key: ends any open block
    block = nullptr;
    std::string vtok, extra;
    if (!(ls >> vtok)) throw ParseError("line " + std::to_string(lineno) + ": key '" + key + "' needs a value");
    if (ls >> extra) throw ParseError("line " + std::to_string(lineno) + ": trailing tokens after value");
    const double v = detail::parse_number(vtok, lineno, "value");
    if (key == "m") {
      cfg.m = v;
      seen_m = true;
    } else if (key == "L") {
      cfg.L = v;
      seen_L = true;
    } else if (key == "Nx") {
      cfg.grid.nx = static_cast<int>(v);
    } else if (key == "Ntheta") {
      cfg.grid.ntheta = static_cast<int>(v);
    } else if (key == "tol_eigen") {
      cfg.tol.eigen = v;
    } else if (key == "tol_lambda") {
      cfg.tol.lambda = v;
    } else {
      throw ParseError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  if (!seen_m) throw ParseError("missing required key 'm'");
  if (!seen_L) throw ParseError("missing required key 'L'");
  if (!seen_a) throw ParseError("missing coefficient block 'a:'");
  if (!seen_mu) throw ParseError("missing coefficient block 'mu:'");
  if (!seen_r) throw ParseError("missing coefficient block 'r:'");
  validate(cfg);
  return cfg;
}

inline std::string serialize_config(const ModelConfig& cfg) {
  std::ostringstream out;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  out << "m " << num(cfg.m) << "\n";
  out << "L " << num(cfg.L) << "\n";
  out << "Nx " << cfg.grid.nx << "\n";
  out << "Ntheta " << cfg.grid.ntheta << "\n";
  out << "tol_eigen " << num(cfg.tol.eigen) << "\n";
  out << "tol_lambda " << num(cfg.tol.lambda) << "\n";
  auto put_block = [&](const char* name, const CoefficientField& f) {
    out << name << "\n";
    for (const auto& t : f.terms) {
      out << "term " << num(t.weight) << ' ';
      switch (t.xb) {
        case XBasis::One: out << "one"; break;
        case XBasis::Cos: out << "cos" << t.xn; break;
        case XBasis::Sin: out << "sin" << t.xn; break;
      }
      out << ' ';
      if (t.tb == ThetaBasis::One)
        out << "one";
      else
        out << "ncos" << t.tn;
      out << "\n";
    }
  };
  put_block("a:", cfg.a);
  put_block("mu:", cfg.mu);
  put_block("r:", cfg.r);
  return out.str();
}

}  // namespace kppspread
