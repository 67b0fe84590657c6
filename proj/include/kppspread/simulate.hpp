#pragma once

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <vector>

#include "kppspread/coeffs.hpp"
#include "kppspread/errors.hpp"

namespace kppspread {

/// Simulation parameters.  Zero-valued fields are filled automatically by
/// run_front from the config and the predicted speed.
struct SimSpec {
  double x_min = 0.0;
  double x_max = 0.0;       // 0 => sized from c_predicted * t_final * 1.5
  int nx = 0;               // 0 => >= 32 points per period and >= 2048 total
  int ntheta = 0;           // 0 => config grid
  double t_final = 40.0;
  double dt = 0.0;          // 0 => from the reaction stability bound
  double dt_record = 0.5;
  double delta_front = 0.0; // 0 => 0.01 * max rho at t_final/2
  double c_predicted = 0.0; // used for domain sizing and reporting
};

struct SimState {
  int nx = 0, ntheta = 0;
  double x_min = 0.0, hx = 0.0, htheta = 0.0;
  double t = 0.0, dt = 0.0;
  Eigen::VectorXd u;  // row-major: idx = i*ntheta + j, theta cell-centered
  double clipped_mass = 0.0;

  double x(int i) const { return x_min + (i + 0.5) * hx; }
  double theta(int j) const { return (j + 0.5) * htheta; }
  int idx(int i, int j) const { return i * ntheta + j; }
};

struct FrontRecord {
  double t = 0.0;
  double X = 0.0;
  double rho_at_front = 0.0;
};

/// Time series of front positions plus the fitted empirical speed.
struct FrontTrace {
  std::vector<FrontRecord> records;
  double c_hat = 0.0;
  double fit_r2 = 0.0;
  double delta_front = 0.0;
};

/// Largest x where rho >= delta, linearly interpolated between grid nodes.
inline double front_position(const std::vector<double>& rho, double x_min, double hx,
                             double delta) {
  const int n = static_cast<int>(rho.size());
  for (int i = n - 1; i >= 0; --i) {
    if (rho[i] >= delta) {
      const double xi = x_min + (i + 0.5) * hx;
      if (i + 1 < n && rho[i] > rho[i + 1]) {
        const double frac = (rho[i] - delta) / (rho[i] - rho[i + 1]);
        return xi + hx * std::min(frac, 1.0);
      }
      return xi;
    }
  }
  throw NoFront("rho is below the front threshold everywhere");
}

inline double front_position(const SimState& s, double delta) {
  std::vector<double> rho(s.nx);
  for (int i = 0; i < s.nx; ++i) {
    double acc = 0.0;
    for (int j = 0; j < s.ntheta; ++j) acc += s.u[s.idx(i, j)];
    rho[i] = acc * s.htheta;
  }
  return front_position(rho, s.x_min, s.hx, delta);
}

/// IMEX integrator for the truncated Cauchy problem: Crank-Nicolson for the
/// diffusion (true L-periodic coefficients at physical x, zero-flux box
/// boundaries), explicit Strang half-steps for the reaction u (r_L - rho).
class Simulator {
 public:
  Simulator(const ModelConfig& cfg, double x_min, double x_max, int nx, int ntheta,
            double dt)
      : cfg_(cfg) {
    state_.nx = nx;
    state_.ntheta = ntheta;
    state_.x_min = x_min;
    state_.hx = (x_max - x_min) / nx;
    state_.htheta = 1.0 / ntheta;
    state_.dt = dt;
    state_.u = Eigen::VectorXd::Zero(nx * ntheta);
    r_max_ = cfg.r_bounds.max;

    rvals_.resize(nx * ntheta);
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ntheta; ++j)
        rvals_[state_.idx(i, j)] = cfg.r.evaluate(state_.x(i) / cfg.L, state_.theta(j));
    build_cn(dt);
  }

  SimState& state() { return state_; }
  const SimState& state() const { return state_; }

  std::vector<double> rho() const {
    std::vector<double> out(state_.nx);
    for (int i = 0; i < state_.nx; ++i) {
      double acc = 0.0;
      for (int j = 0; j < state_.ntheta; ++j) acc += state_.u[state_.idx(i, j)];
      out[i] = acc * state_.htheta;
    }
    return out;
  }

  double total_mass() const { return state_.u.sum() * state_.hx * state_.htheta; }

  /// One IMEX step.  Checks the reaction stability bound against the current
  /// rho, clips negative values (tracking the clipped mass) and guards
  /// against blow-up.
  void step() {
    const std::vector<double> rho0 = rho();
    double rho_max = 0.0;
    for (double v : rho0) rho_max = std::max(rho_max, v);
    if (state_.dt > 0.25 / (std::max(r_max_, 0.0) + rho_max + 1.0))
      throw StabilityViolation("dt exceeds the reaction stability bound");

    Eigen::VectorXd w = state_.u;
    react_half(w, rho0);
    Eigen::VectorXd v = lu_.solve(rhs_ * w);
    if (!v.allFinite()) throw BlowUp("diffusion solve produced non-finite values");
    const std::vector<double> rho1 = column_rho(v);
    react_half(v, rho1);

    // clip transport undershoots; the clipped mass must stay negligible
    double clipped = 0.0;
    for (int k = 0; k < v.size(); ++k)
      if (v[k] < 0.0) {
        clipped -= v[k];
        v[k] = 0.0;
      }
    state_.clipped_mass += clipped * state_.hx * state_.htheta;
    const double ucap = 10.0 * (1.0 + std::max(r_max_, 0.0));
    if (v.maxCoeff() > ucap) throw BlowUp("u exceeded the blow-up guard");
    state_.u.swap(v);
    state_.t += state_.dt;
  }

 private:
  void build_cn(double dt) {
    const int nx = state_.nx, nt = state_.ntheta;
    const int n = nx * nt;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(n) * 5);
    const double sx = 1.0 / (state_.hx * state_.hx);
    const double st = cfg_.m / (state_.htheta * state_.htheta);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < nt; ++j) {
        const int row = state_.idx(i, j);
        double diag = 0.0;
        if (i + 1 < nx) {
          const double ae = cfg_.a.evaluate((state_.x(i) + 0.5 * state_.hx) / cfg_.L,
                                            state_.theta(j)) * sx;
          trip.emplace_back(row, state_.idx(i + 1, j), ae);
          diag -= ae;
        }
        if (i > 0) {
          const double aw = cfg_.a.evaluate((state_.x(i) - 0.5 * state_.hx) / cfg_.L,
                                            state_.theta(j)) * sx;
          trip.emplace_back(row, state_.idx(i - 1, j), aw);
          diag -= aw;
        }
        if (j + 1 < nt) {
          const double mn = cfg_.mu.evaluate(state_.x(i) / cfg_.L,
                                             state_.theta(j) + 0.5 * state_.htheta) * st;
          trip.emplace_back(row, state_.idx(i, j + 1), mn);
          diag -= mn;
        }
        if (j > 0) {
          const double ms = cfg_.mu.evaluate(state_.x(i) / cfg_.L,
                                             state_.theta(j) - 0.5 * state_.htheta) * st;
          trip.emplace_back(row, state_.idx(i, j - 1), ms);
          diag -= ms;
        }
        trip.emplace_back(row, row, diag);
      }
    }
    Eigen::SparseMatrix<double> D(n, n);
    D.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseMatrix<double> I(n, n);
    I.setIdentity();
    Eigen::SparseMatrix<double> lhs = I - (0.5 * dt) * D;
    rhs_ = I + (0.5 * dt) * D;
    lhs.makeCompressed();
    rhs_.makeCompressed();
    lu_.compute(lhs);
    if (lu_.info() != Eigen::Success) throw Error("Crank-Nicolson factorization failed");
  }

  std::vector<double> column_rho(const Eigen::VectorXd& u) const {
    std::vector<double> out(state_.nx);
    for (int i = 0; i < state_.nx; ++i) {
      double acc = 0.0;
      for (int j = 0; j < state_.ntheta; ++j) acc += u[state_.idx(i, j)];
      out[i] = acc * state_.htheta;
    }
    return out;
  }

  void react_half(Eigen::VectorXd& u, const std::vector<double>& rho) const {
    const double hdt = 0.5 * state_.dt;
    for (int i = 0; i < state_.nx; ++i)
      for (int j = 0; j < state_.ntheta; ++j) {
        const int k = state_.idx(i, j);
        u[k] += hdt * u[k] * (rvals_[k] - rho[i]);
      }
  }

  ModelConfig cfg_;
  SimState state_;
  std::vector<double> rvals_;
  double r_max_ = 0.0;
  Eigen::SparseMatrix<double> rhs_;
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

/// Run the truncated Cauchy problem from a compact bump at the left edge,
/// record the front position, and fit the empirical speed on the second half
/// of the run.
inline FrontTrace run_front(const ModelConfig& cfg, const SimSpec& spec_in) {
  SimSpec spec = spec_in;
  if (spec.c_predicted <= 0.0)
    throw Error("run_front: spec.c_predicted must be set (fg_speed of the config)");
  if (spec.x_max <= spec.x_min)
    spec.x_max = spec.x_min + std::ceil(spec.c_predicted * spec.t_final * 1.5 + 12.0);
  const double span = spec.x_max - spec.x_min;
  if (span < spec.c_predicted * spec.t_final * 1.5)
    throw Error("run_front: domain is shorter than 1.5 * c * T");
  if (spec.nx == 0) {
    const double per_period = 32.0 * span / cfg.L;
    spec.nx = static_cast<int>(std::max(2048.0, std::min(per_period, 32768.0)));
  }
  if (spec.ntheta == 0) spec.ntheta = cfg.grid.ntheta;

  if (spec.dt <= 0.0) {
    const double rho_cap = 2.0 * (1.0 + std::max(cfg.r_bounds.max, 0.0));
    spec.dt = 0.2 / (std::max(cfg.r_bounds.max, 0.0) + rho_cap + 1.0);
  }
  const int per_record = std::max(1, static_cast<int>(std::ceil(spec.dt_record / spec.dt)));
  const double dt = spec.dt_record / per_record;

  Simulator sim(cfg, spec.x_min, spec.x_max, spec.nx, spec.ntheta, dt);
  SimState& st = sim.state();
  for (int i = 0; i < st.nx; ++i)
    for (int j = 0; j < st.ntheta; ++j)
      if (st.x(i) <= spec.x_min + 2.0) st.u[st.idx(i, j)] = 0.5;

  const int n_records = static_cast<int>(std::round(spec.t_final / spec.dt_record));
  std::vector<double> times;
  std::vector<std::vector<double>> rhos;
  times.reserve(n_records + 1);
  times.push_back(0.0);
  rhos.push_back(sim.rho());
  for (int rec = 1; rec <= n_records; ++rec) {
    for (int s = 0; s < per_record; ++s) sim.step();
    times.push_back(st.t);
    rhos.push_back(sim.rho());
  }

  // front threshold from the local mass scale at mid-run
  FrontTrace trace;
  double delta = spec.delta_front;
  if (delta <= 0.0) {
    const auto& mid = rhos[rhos.size() / 2];
    double rho_scale = 0.0;
    for (double v : mid) rho_scale = std::max(rho_scale, v);
    if (rho_scale <= 0.0) throw NoFront("population vanished before t_final/2");
    delta = 0.01 * rho_scale;
  }
  trace.delta_front = delta;

  for (size_t rec = 0; rec < rhos.size(); ++rec) {
    double X;
    try {
      X = front_position(rhos[rec], spec.x_min, st.hx, delta);
    } catch (const NoFront&) {
      continue;  // pre-transient records may sit below the threshold
    }
    if (X >= spec.x_max - 10.0 * st.hx)
      throw FrontEscaped("front reached the right boundary; extend the domain");
    trace.records.push_back({times[rec], X, delta});
  }

  // least-squares fit on [t_final/2, t_final]
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  int nfit = 0;
  for (const auto& r : trace.records) {
    if (r.t < 0.5 * spec.t_final) continue;
    sx += r.t;
    sy += r.X;
    sxx += r.t * r.t;
    sxy += r.t * r.X;
    syy += r.X * r.X;
    ++nfit;
  }
  if (nfit < 3) throw NoFront("not enough front records in the fit window");
  const double det = nfit * sxx - sx * sx;
  trace.c_hat = (nfit * sxy - sx * sy) / det;
  const double ss_tot = syy - sy * sy / nfit;
  const double intercept = (sy - trace.c_hat * sx) / nfit;
  double ss_res = 0.0;
  for (const auto& r : trace.records) {
    if (r.t < 0.5 * spec.t_final) continue;
    const double e = r.X - (intercept + trace.c_hat * r.t);
    ss_res += e * e;
  }
  trace.fit_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return trace;
}

/// Snapshot of rho as CSV rows (t, x, rho).
inline void write_snapshot_csv(std::ostream& out, const SimState& s) {
  std::vector<double> rho(s.nx);
  for (int i = 0; i < s.nx; ++i) {
    double acc = 0.0;
    for (int j = 0; j < s.ntheta; ++j) acc += s.u[s.idx(i, j)];
    rho[i] = acc * s.htheta;
  }
  out << "t,x,rho\n";
  char buf[96];
  for (int i = 0; i < s.nx; ++i) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", s.t, s.x(i), rho[i]);
    out << buf;
  }
}

/// Full field in the flat binary layout: int64 nx, int64 ntheta, then
/// doubles x_min, hx, htheta, t, then nx*ntheta field values in idx order.
/// Little-endian, as on every platform this builds for.
inline void write_snapshot_bin(std::ostream& out, const SimState& s) {
  const std::int64_t dims[2] = {s.nx, s.ntheta};
  out.write(reinterpret_cast<const char*>(dims), sizeof dims);
  const double header[4] = {s.x_min, s.hx, s.htheta, s.t};
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(s.u.data()),
            static_cast<std::streamsize>(sizeof(double)) * s.u.size());
}

}  // namespace kppspread
