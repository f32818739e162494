#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "memoc/kernel.hpp"
#include "memoc/value.hpp"

namespace memoc {

// Exponential-kernel reduction (d = k = 1): the value depends on the past
// only through the moment y(z) = int e^{-delta s} z(s) ds, and the value
// function w(x, y) solves the stationary 2D equation
//   lambda w + H0(x, y, dw/dx) - dw/dy (x - delta y) = 0.
struct ReducedProblem {
  double delta = 1.0;
  std::function<double(double x, double u, double y)> F;
  CostModel cost;  // scalar running cost through a length-1 vector
  std::vector<double> K;
  double x_min = -1.0, x_max = 1.0;
  double y_min = -1.0, y_max = 1.0;
  int nx = 3, ny = 3;
};

struct ReducedValueGrid {
  double x_min = 0, x_max = 0, y_min = 0, y_max = 0;
  Eigen::MatrixXd w;  // nx rows (x), ny cols (y)
  int iterations = 0;
  double final_update = 0.0;
  std::vector<double> update_history;

  int nx() const { return static_cast<int>(w.rows()); }
  int ny() const { return static_cast<int>(w.cols()); }
  double dx() const { return (x_max - x_min) / (nx() - 1); }
  double dy() const { return (y_max - y_min) / (ny() - 1); }
  // Bilinear read; the point must lie inside the box.
  double at(double x, double y) const;
};

// int_0^inf e^{-delta s} z(s) ds for scalar z (trapezoid + tail).
double moment(const GridFunction& z, double delta);

// Drift of the moment along trajectories: d/dt y_t = x(t) - delta y_t.
double reduced_drift(double x, double y, double delta);

// Value iteration of the semi-Lagrangian operator
//   w <- min_u { (1-e^{-lambda dt})/lambda L(x,u)
//                + e^{-lambda dt} w(x + dt F(x,u,y), y + dt (x - delta y)) }
// with bilinear interpolation and feet clamped to the box. The operator is an
// e^{-lambda dt} contraction, so the iteration count is ~ log tol / log gamma.
// Throws IterationLimitError (carrying the update history) past max_iter.
ReducedValueGrid solve_reduced_hjb(const ReducedProblem& prob, double dt,
                                   double tol, int max_iter);

struct CrossValidation {
  double v_direct = 0.0;
  double w_reduced = 0.0;
  double gap = 0.0;
};

// Full-problem value estimate (kernel e^{-delta s}) against the reduced-grid
// read at (x, y(z)). The moment must land inside the reduced box.
CrossValidation cross_validate(const Dynamics& dyn, const CostModel& cost,
                               double delta, const HistoryState& alpha,
                               const ReducedValueGrid& grid,
                               const ControlFamily& family, double T,
                               double h);

// Centered-difference residual of the reduced equation over interior nodes.
double reduced_pde_residual(const ReducedValueGrid& grid,
                            const ReducedProblem& prob);

}  // namespace memoc
