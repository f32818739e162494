#include "memoc/reduced.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "memoc/errors.hpp"

namespace memoc {

double ReducedValueGrid::at(double x, double y) const {
  const double eps_x = 1e-12 * (x_max - x_min);
  const double eps_y = 1e-12 * (y_max - y_min);
  if (x < x_min - eps_x || x > x_max + eps_x || y < y_min - eps_y ||
      y > y_max + eps_y)
    throw DomainError("reduced-grid lookup at (" + std::to_string(x) + ", " +
                      std::to_string(y) + ") falls outside the box");
  const double px =
      std::clamp((x - x_min) / dx(), 0.0, static_cast<double>(nx() - 1));
  const double py =
      std::clamp((y - y_min) / dy(), 0.0, static_cast<double>(ny() - 1));
  int i = std::min(static_cast<int>(px), nx() - 2);
  int j = std::min(static_cast<int>(py), ny() - 2);
  const double tx = px - i, ty = py - j;
  return (1 - tx) * (1 - ty) * w(i, j) + tx * (1 - ty) * w(i + 1, j) +
         (1 - tx) * ty * w(i, j + 1) + tx * ty * w(i + 1, j + 1);
}

double moment(const GridFunction& z, double delta) {
  if (z.dim() != 1) throw DomainError("moment expects a scalar grid function");
  return exp_moment(z, delta)(0);
}

double reduced_drift(double x, double y, double delta) {
  return x - delta * y;
}

ReducedValueGrid solve_reduced_hjb(const ReducedProblem& prob, double dt,
                                   double tol, int max_iter) {
  if (!(dt > 0.0)) throw DomainError("semi-Lagrangian step must be positive");
  if (!(prob.cost.lambda > 0.0))
    throw DomainError("discount rate must be positive: e^{-lambda dt} < 1 "
                      "is what makes the operator contract");
  if (prob.nx < 3 || prob.ny < 3) throw DomainError("grid sizes must be >= 3");
  if (prob.K.empty()) throw DomainError("reduced problem needs controls");
  const int nx = prob.nx, ny = prob.ny;
  const int nu = static_cast<int>(prob.K.size());
  const double lam = prob.cost.lambda;
  const double gamma = std::exp(-lam * dt);
  const double cost_w = (1.0 - gamma) / lam;  // exact discount of one step
  const double dx = (prob.x_max - prob.x_min) / (nx - 1);
  const double dy = (prob.y_max - prob.y_min) / (ny - 1);

  // Feet and interpolation weights do not change across sweeps.
  struct Foot {
    int i, j;
    double tx, ty;
    double run;  // discounted one-step running cost
  };
  std::vector<Foot> feet(static_cast<size_t>(nx) * ny * nu);
  Eigen::VectorXd xv(1);
  for (int i = 0; i < nx; ++i) {
    const double x = prob.x_min + i * dx;
    xv(0) = x;
    for (int j = 0; j < ny; ++j) {
      const double y = prob.y_min + j * dy;
      for (int l = 0; l < nu; ++l) {
        const double u = prob.K[l];
        double xf = x + dt * prob.F(x, u, y);
        double yf = y + dt * reduced_drift(x, y, prob.delta);
        xf = std::clamp(xf, prob.x_min, prob.x_max);
        yf = std::clamp(yf, prob.y_min, prob.y_max);
        Foot f;
        const double px = (xf - prob.x_min) / dx;
        const double py = (yf - prob.y_min) / dy;
        f.i = std::min(static_cast<int>(px), nx - 2);
        f.j = std::min(static_cast<int>(py), ny - 2);
        f.tx = px - f.i;
        f.ty = py - f.j;
        f.run = cost_w * prob.cost.L(xv, u);
        feet[(static_cast<size_t>(i) * ny + j) * nu + l] = f;
      }
    }
  }

  ReducedValueGrid grid;
  grid.x_min = prob.x_min;
  grid.x_max = prob.x_max;
  grid.y_min = prob.y_min;
  grid.y_max = prob.y_max;
  grid.w = Eigen::MatrixXd::Zero(nx, ny);
  Eigen::MatrixXd next(nx, ny);

  const double ball = prob.cost.sup_bound / lam + 1e-9;
  for (int it = 0; it < max_iter; ++it) {
    double update = 0.0;
    for (int i = 0; i < nx; ++i)
      for (int j = 0; j < ny; ++j) {
        double best = std::numeric_limits<double>::infinity();
        const size_t base = (static_cast<size_t>(i) * ny + j) * nu;
        for (int l = 0; l < nu; ++l) {
          const Foot& f = feet[base + l];
          const double interp =
              (1 - f.tx) * (1 - f.ty) * grid.w(f.i, f.j) +
              f.tx * (1 - f.ty) * grid.w(f.i + 1, f.j) +
              (1 - f.tx) * f.ty * grid.w(f.i, f.j + 1) +
              f.tx * f.ty * grid.w(f.i + 1, f.j + 1);
          best = std::min(best, f.run + gamma * interp);
        }
        next(i, j) = best;
        update = std::max(update, std::abs(best - grid.w(i, j)));
      }
    grid.w.swap(next);
    grid.update_history.push_back(update);
    grid.iterations = it + 1;
    grid.final_update = update;
    if (grid.w.lpNorm<Eigen::Infinity>() > ball)
      throw ConsistencyError(
          "value iteration left the ||L||/lambda ball, sup = " +
          std::to_string(grid.w.lpNorm<Eigen::Infinity>()));
    if (update <= tol) return grid;
  }
  throw IterationLimitError(
      grid.update_history,
      "value iteration did not reach tol " + std::to_string(tol) + " in " +
          std::to_string(max_iter) + " sweeps (last update " +
          std::to_string(grid.final_update) + ")");
}

CrossValidation cross_validate(const Dynamics& dyn, const CostModel& cost,
                               double delta, const HistoryState& alpha,
                               const ReducedValueGrid& grid,
                               const ControlFamily& family, double T,
                               double h) {
  if (dyn.d != 1 || dyn.k != 1)
    throw DomainError("cross_validate expects the scalar reduced setting");
  const Kernel a = Kernel::exponential(delta, 1.0);
  CrossValidation out;
  const double y0 = moment(alpha.z, delta);
  out.w_reduced = grid.at(alpha.x(0), y0);  // throws when outside the box
  out.v_direct = value_estimate(dyn, a, cost, alpha, family, T, h).value;
  out.gap = std::abs(out.v_direct - out.w_reduced);
  return out;
}

double reduced_pde_residual(const ReducedValueGrid& grid,
                            const ReducedProblem& prob) {
  const int nx = grid.nx(), ny = grid.ny();
  const double dx = grid.dx(), dy = grid.dy();
  double worst = 0.0;
  Eigen::VectorXd xv(1);
  for (int i = 1; i + 1 < nx; ++i) {
    const double x = grid.x_min + i * dx;
    xv(0) = x;
    for (int j = 1; j + 1 < ny; ++j) {
      const double y = grid.y_min + j * dy;
      const double wx = (grid.w(i + 1, j) - grid.w(i - 1, j)) / (2 * dx);
      const double wy = (grid.w(i, j + 1) - grid.w(i, j - 1)) / (2 * dy);
      double h0 = -std::numeric_limits<double>::infinity();
      for (double u : prob.K)
        h0 = std::max(h0, -prob.cost.L(xv, u) - wx * prob.F(x, u, y));
      const double res = prob.cost.lambda * grid.w(i, j) + h0 -
                         wy * reduced_drift(x, y, prob.delta);
      worst = std::max(worst, std::abs(res));
    }
  }
  return worst;
}

}  // namespace memoc
