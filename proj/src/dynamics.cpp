#include "memoc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "memoc/errors.hpp"

namespace memoc {

namespace {

constexpr double kBlowup = 1e12;

int checked_steps(double T, double h) {
  if (!(h > 0.0)) throw DomainError("step must be positive");
  if (!(T > 0.0)) throw DomainError("horizon must be positive");
  const double n = T / h;
  const double rn = std::round(n);
  if (std::abs(n - rn) > 1e-6)
    throw DomainError("horizon is not a multiple of the step");
  return static_cast<int>(rn);
}

void check_breakpoints(const ControlLaw& u, double h) {
  for (double b : u.breakpoints()) {
    const double n = b / h;
    if (std::abs(n - std::round(n)) > 1e-6)
      throw DomainError("control breakpoint " + std::to_string(b) +
                        " is off the step grid");
  }
}

}  // namespace

ControlLaw::ControlLaw(std::vector<double> breakpoints,
                       std::vector<double> values)
    : breaks_(std::move(breakpoints)), values_(std::move(values)) {
  if (breaks_.size() < 2 || values_.size() + 1 != breaks_.size())
    throw DomainError("control law needs m+1 breakpoints for m values");
  if (breaks_.front() != 0.0)
    throw DomainError("control law must start at t = 0");
  for (size_t i = 0; i + 1 < breaks_.size(); ++i)
    if (!(breaks_[i] < breaks_[i + 1]))
      throw DomainError("control breakpoints must increase");
}

ControlLaw ControlLaw::constant(double u, double horizon) {
  return ControlLaw({0.0, horizon}, {u});
}

double ControlLaw::at(double t) const {
  if (t <= 0.0) return values_.front();
  const auto it = std::upper_bound(breaks_.begin(), breaks_.end(), t);
  size_t i = static_cast<size_t>(it - breaks_.begin());
  if (i >= breaks_.size()) return values_.back();
  return values_[i - 1];
}

Eigen::VectorXd Trajectory::at(double t) const {
  if (t < 0.0 || t > T + 1e-12)
    throw DomainError("trajectory evaluated outside [0, T]");
  const double pos = std::min(t, T) / h;
  int i = static_cast<int>(pos);
  if (i > steps() - 1) i = steps() - 1;
  const double theta = pos - i;
  return ((1.0 - theta) * y.row(i) + theta * y.row(i + 1)).transpose();
}

namespace {

// Stage memory value for tabulated kernels: trapezoid over the completed
// nodes plus the partial interval [m h, t*] using the stage prediction.
Eigen::VectorXd stage_memory(const Kernel& a, const Eigen::MatrixXd& y,
                             int m, double h, double t_star,
                             const Eigen::VectorXd* y_star,
                             const Eigen::VectorXd& hist_piece) {
  Eigen::VectorXd out = hist_piece;
  for (int j = 0; j <= m; ++j) {
    const double w = (j == 0 || j == m) ? 0.5 : 1.0;
    out += (w * h) * (a.at(t_star - j * h) * y.row(j).transpose());
  }
  const double dt = t_star - m * h;
  if (dt > 0.0 && y_star != nullptr)
    out += 0.5 * dt *
           (a.at(dt) * y.row(m).transpose() + a.at(0.0) * (*y_star));
  return out;
}

Trajectory solve_exponential(const Dynamics& dyn, const Kernel& a,
                             const HistoryState& alpha, const ControlLaw& u,
                             double T, double h, int n) {
  const int d = dyn.d;
  const auto& terms = a.exp_terms();
  const int nt = static_cast<int>(terms.size());

  Eigen::MatrixXd y(n + 1, d), g(n + 1, a.rows());
  y.row(0) = alpha.x.transpose();

  // channels m_i with m_i' = y - delta_i m_i; G = sum coef_i m_i
  Eigen::MatrixXd m(nt, d);
  for (int i = 0; i < nt; ++i)
    m.row(i) = exp_moment(alpha.z, terms[i].rate).transpose();

  auto channel_sum = [&](const Eigen::MatrixXd& chan) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(a.rows());
    for (int i = 0; i < nt; ++i)
      acc += terms[i].coef * chan.row(i).transpose();
    return acc;
  };

  Eigen::VectorXd amem(a.rows());
  // stage slopes for (y, m)
  Eigen::VectorXd ky1(d), ky2(d), ky3(d), ky4(d);
  Eigen::MatrixXd km1(nt, d), km2(nt, d), km3(nt, d), km4(nt, d);

  auto stage = [&](const Eigen::VectorXd& ys, const Eigen::MatrixXd& ms,
                   double uval, Eigen::VectorXd& ky, Eigen::MatrixXd& km) {
    amem = channel_sum(ms);
    dyn.F(ys, uval, amem, ky);
    for (int i = 0; i < nt; ++i)
      km.row(i) = ys.transpose() - terms[i].rate * ms.row(i);
  };

  g.row(0) = channel_sum(m).transpose();
  for (int step = 0; step < n; ++step) {
    const double t = step * h;
    const double uval = u.at(t + 0.5 * h);  // mid-step: the governing interval
    const Eigen::VectorXd y0 = y.row(step).transpose();

    stage(y0, m, uval, ky1, km1);
    stage(y0 + 0.5 * h * ky1, m + 0.5 * h * km1, uval, ky2, km2);
    stage(y0 + 0.5 * h * ky2, m + 0.5 * h * km2, uval, ky3, km3);
    stage(y0 + h * ky3, m + h * km3, uval, ky4, km4);

    const Eigen::VectorXd y1 =
        y0 + h / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
    m += h / 6.0 * (km1 + 2.0 * km2 + 2.0 * km3 + km4);
    if (!y1.allFinite() || y1.lpNorm<Eigen::Infinity>() > kBlowup)
      throw BlowupError((step + 1) * h, "state blew up at t = " +
                                            std::to_string((step + 1) * h));
    y.row(step + 1) = y1.transpose();
    g.row(step + 1) = channel_sum(m).transpose();
  }
  return Trajectory{h, T, std::move(y), std::move(g), alpha, u};
}

Trajectory solve_tabulated(const Dynamics& dyn, const Kernel& a,
                           const HistoryState& alpha, const ControlLaw& u,
                           double T, double h, int n) {
  const int d = dyn.d;
  Eigen::MatrixXd y(n + 1, d), g(n + 1, a.rows());
  y.row(0) = alpha.x.transpose();

  Eigen::VectorXd ky1(d), ky2(d), ky3(d), ky4(d);
  for (int step = 0; step < n; ++step) {
    const double t = step * h;
    const double uval = u.at(t + 0.5 * h);
    const Eigen::VectorXd y0 = y.row(step).transpose();
    const Eigen::VectorXd hist_t = memory_history_piece(a, alpha.z, t);
    const Eigen::VectorXd hist_half =
        memory_history_piece(a, alpha.z, t + 0.5 * h);
    const Eigen::VectorXd hist_full = memory_history_piece(a, alpha.z, t + h);

    Eigen::VectorXd gmem = stage_memory(a, y, step, h, t, nullptr, hist_t);
    g.row(step) = gmem.transpose();
    dyn.F(y0, uval, gmem, ky1);

    Eigen::VectorXd ys = y0 + 0.5 * h * ky1;
    gmem = stage_memory(a, y, step, h, t + 0.5 * h, &ys, hist_half);
    dyn.F(ys, uval, gmem, ky2);

    ys = y0 + 0.5 * h * ky2;
    gmem = stage_memory(a, y, step, h, t + 0.5 * h, &ys, hist_half);
    dyn.F(ys, uval, gmem, ky3);

    ys = y0 + h * ky3;
    gmem = stage_memory(a, y, step, h, t + h, &ys, hist_full);
    dyn.F(ys, uval, gmem, ky4);

    const Eigen::VectorXd y1 =
        y0 + h / 6.0 * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
    if (!y1.allFinite() || y1.lpNorm<Eigen::Infinity>() > kBlowup)
      throw BlowupError((step + 1) * h, "state blew up at t = " +
                                            std::to_string((step + 1) * h));
    y.row(step + 1) = y1.transpose();
  }
  g.row(n) = stage_memory(a, y, n, h, T, nullptr,
                          memory_history_piece(a, alpha.z, T))
                 .transpose();
  return Trajectory{h, T, std::move(y), std::move(g), alpha, u};
}

}  // namespace

Trajectory solve_cauchy(const Dynamics& dyn, const Kernel& a,
                        const HistoryState& alpha, const ControlLaw& u,
                        double T, double h) {
  const int n = checked_steps(T, h);
  check_breakpoints(u, h);
  if (alpha.dim() != dyn.d) throw DomainError("state dimension mismatch");
  if (a.cols() != dyn.d || a.rows() != dyn.k)
    throw DomainError("kernel shape does not match the dynamics");
  if (a.is_exponential()) return solve_exponential(dyn, a, alpha, u, T, h, n);
  return solve_tabulated(dyn, a, alpha, u, T, h, n);
}

PicardResult picard_solve(const Dynamics& dyn, const Kernel& a,
                          const HistoryState& alpha, const ControlLaw& u,
                          double T, double h, double theta, int max_iter,
                          double tol) {
  const int n = checked_steps(T, h);
  check_breakpoints(u, h);
  const int d = dyn.d;

  // The history half of G does not change across iterations.
  std::vector<Eigen::VectorXd> hist(n + 1);
  for (int j = 0; j <= n; ++j)
    hist[j] = memory_history_piece(a, alpha.z, j * h);

  Eigen::MatrixXd y = alpha.x.transpose().replicate(n + 1, 1);
  Eigen::MatrixXd y_next(n + 1, d), g(n + 1, a.rows());
  Eigen::VectorXd f_left(d), f_right(d), gj(a.rows());

  PicardResult out{Trajectory{h, T, y, g, alpha, u}, {}, 0, false};
  const double floor = 1e3 * std::numeric_limits<double>::epsilon() *
                       (1.0 + alpha.x.lpNorm<Eigen::Infinity>());

  for (int it = 0; it < max_iter; ++it) {
    // memory of the current iterate at every node
    for (int j = 0; j <= n; ++j) {
      gj = hist[j];
      for (int l = 0; l <= j; ++l) {
        const double w = (l == 0 || l == j) ? 0.5 : 1.0;
        gj += (w * h) * (a.at((j - l) * h) * y.row(l).transpose());
      }
      g.row(j) = gj.transpose();
    }
    // trapezoid of the integral map, split per control interval so the
    // integrand jump at a breakpoint never straddles a panel
    y_next.row(0) = alpha.x.transpose();
    Eigen::VectorXd cum = alpha.x;
    for (int j = 0; j < n; ++j) {
      const double uval = u.at((j + 0.5) * h);
      dyn.F(y.row(j).transpose(), uval, g.row(j).transpose(), f_left);
      dyn.F(y.row(j + 1).transpose(), uval, g.row(j + 1).transpose(), f_right);
      cum += 0.5 * h * (f_left + f_right);
      y_next.row(j + 1) = cum.transpose();
    }

    double dist = 0.0;
    for (int j = 0; j <= n; ++j)
      dist = std::max(dist, std::exp(-theta * j * h) *
                                (y_next.row(j) - y.row(j)).norm());
    out.distances.push_back(dist);
    out.iterations = it + 1;
    y.swap(y_next);

    if (!y.allFinite())
      throw BlowupError(T, "Picard iterate left the finite range");
    if (dist <= tol) {
      out.converged = true;
      break;
    }
    // three consecutive non-contracting ratios on meaningful distances
    const auto& ds = out.distances;
    if (ds.size() >= 4) {
      bool bad = true;
      std::vector<double> ratios;
      for (size_t i = ds.size() - 3; i < ds.size(); ++i) {
        if (ds[i - 1] <= floor || ds[i] / ds[i - 1] < 1.0) bad = false;
        ratios.push_back(ds[i - 1] > 0 ? ds[i] / ds[i - 1] : 0.0);
      }
      if (bad)
        throw NonContractionError(
            ratios, "Picard iteration is not contracting at theta = " +
                        std::to_string(theta));
    }
  }

  // memory record of the returned iterate, not of the one before it
  for (int j = 0; j <= n; ++j) {
    gj = hist[j];
    for (int l = 0; l <= j; ++l) {
      const double w = (l == 0 || l == j) ? 0.5 : 1.0;
      gj += (w * h) * (a.at((j - l) * h) * y.row(l).transpose());
    }
    g.row(j) = gj.transpose();
  }
  out.trajectory.y = y;
  out.trajectory.g = g;
  return out;
}

double picard_contraction_bound(const Dynamics& dyn, const Kernel& a,
                                double theta) {
  const KernelNorms norms = kernel_norms(a);
  const double c = dyn.C1 * std::max(1.0, norms.l2);
  return c * (1.0 / theta + 1.0 / (std::sqrt(2.0) * std::pow(theta, 1.5)));
}

double picard_default_theta(const Dynamics& dyn, const Kernel& a) {
  const KernelNorms norms = kernel_norms(a);
  const double c = dyn.C1 * std::max(1.0, norms.l2);
  return 2.0 * c + 1.0;
}

double growth_rate_estimate(const Dynamics& dyn, const Kernel& a) {
  const KernelNorms norms = kernel_norms(a);
  return dyn.C1 * (1.0 + norms.l1 + norms.l2) + 1.0;
}

HistoryState shift_history(const Trajectory& traj, double t) {
  const double h = traj.h;
  const double pos = t / h;
  if (t < 0.0 || t > traj.T + 1e-12 ||
      std::abs(pos - std::round(pos)) > 1e-6)
    throw DomainError("shift time must sit on the step grid inside [0, T]");
  const GridFunction& z = traj.initial.z;
  const int nz = z.nodes();
  const double hz = z.step();

  Eigen::MatrixXd samples(nz, z.dim());
  for (int i = 0; i < nz; ++i) {
    const double s = i * hz;
    if (s <= t + 1e-15)
      samples.row(i) = traj.at(t - std::min(s, t)).transpose();
    else
      samples.row(i) = z.value(s - t).transpose();
  }
  // The window drops the oldest t seconds of the original past; whatever
  // tail policy described the old history keeps describing the new one.
  return HistoryState(traj.at(t), GridFunction(hz, std::move(samples),
                                               z.tail()));
}

double continuity_ratio(const Dynamics& dyn, const Kernel& a,
                        const HistoryState& a0, const HistoryState& a1,
                        const ControlLaw& u, double T, double h,
                        double theta) {
  const double dx = (a0.x - a1.x).norm();
  const double dz =
      GridFunction::linear_combination(1.0, a0.z, -1.0, a1.z).l2_norm();
  const double delta = dx + dz;
  if (delta == 0.0) return 0.0;

  const Trajectory t0 = solve_cauchy(dyn, a, a0, u, T, h);
  const Trajectory t1 = solve_cauchy(dyn, a, a1, u, T, h);
  double sup = 0.0;
  for (int j = 0; j <= t0.steps(); ++j)
    sup = std::max(sup, std::exp(-theta * j * h) *
                            (t0.y.row(j) - t1.y.row(j)).norm());
  return sup / delta;
}

double weak_continuity_probe(const Dynamics& dyn, const Kernel& a,
                             const HistoryState& alpha, double freq,
                             const ControlLaw& u, double T, double h) {
  const GridFunction& z = alpha.z;
  Eigen::MatrixXd pert = z.samples();
  // last node untouched so the tail continuation is the original one
  for (int i = 0; i + 1 < z.nodes(); ++i)
    pert.row(i).array() += std::sin(freq * i * z.step());
  const HistoryState shaken(alpha.x, GridFunction(z.step(), std::move(pert),
                                                  z.tail()));
  const Trajectory base = solve_cauchy(dyn, a, alpha, u, T, h);
  const Trajectory moved = solve_cauchy(dyn, a, shaken, u, T, h);
  double sup = 0.0;
  for (int j = 0; j <= base.steps(); ++j)
    sup = std::max(sup, (base.y.row(j) - moved.y.row(j)).norm());
  return sup;
}

}  // namespace memoc
