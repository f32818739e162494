#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace memoc {

// Continuation policy beyond the sampled window [0, s_max].
// ExponentialDecay with rate 0 continues the last sample as a constant;
// such a function is no longer square integrable and reports an infinite
// L2 norm.
struct Tail {
  enum class Kind { Zero, ExponentialDecay };
  Kind kind = Kind::Zero;
  double rate = 0.0;

  static Tail zero() { return {}; }
  static Tail exponential(double rate);
};

// One term a * exp(-rate s) of a closed-form exponential sum.
struct ExpTerm {
  Eigen::VectorXd amplitude;
  double rate;
};

// Function on [0, +inf) with values in R^d, represented by uniform samples
// on [0, s_max] read as a piecewise-linear interpolant, plus a tail policy.
// Functions constructed from exponential closed forms also keep the exact
// term list so that callers that can integrate exponentials analytically
// (hilbert_ops, tail integrals) do not pay the sampling error.
class GridFunction {
 public:
  GridFunction(double step, Eigen::MatrixXd samples, Tail tail = Tail::zero());

  static GridFunction zero(double step, int nodes, int dim = 1);
  static GridFunction from_function(
      double step, int nodes,
      const std::function<Eigen::VectorXd(double)>& f, Tail tail = Tail::zero());
  static GridFunction from_scalar(double step, int nodes,
                                  const std::function<double(double)>& f,
                                  Tail tail = Tail::zero());
  // Samples sum_i a_i exp(-rate_i s) on the grid and keeps the exact form.
  // Single-term sums default to the matching exponential tail.
  static GridFunction exponential(double step, int nodes,
                                  std::vector<ExpTerm> terms);
  static GridFunction exponential(double step, int nodes, double amplitude,
                                  double rate);

  // a*f + b*g on a shared grid; exact forms combine when both carry one.
  static GridFunction linear_combination(double a, const GridFunction& f,
                                         double b, const GridFunction& g);

  double step() const { return step_; }
  int nodes() const { return static_cast<int>(samples_.rows()); }
  int dim() const { return static_cast<int>(samples_.cols()); }
  double s_max() const { return step_ * (nodes() - 1); }
  const Tail& tail() const { return tail_; }

  const Eigen::MatrixXd& samples() const { return samples_; }
  Eigen::VectorXd node(int i) const { return samples_.row(i).transpose(); }
  double node1(int i) const { return samples_(i, 0); }

  // Piecewise-linear value; tail policy beyond s_max. s must be >= 0.
  Eigen::VectorXd value(double s) const;
  double value1(double s) const { return value(s)(0); }

  // Trapezoid on [0, s_max] plus the closed-form tail contribution.
  double l2_norm_sq() const;
  double l2_norm() const;
  double sup_norm() const;

  bool same_grid(const GridFunction& other) const;

  const std::optional<std::vector<ExpTerm>>& exp_form() const {
    return exp_form_;
  }

 private:
  double step_;
  Eigen::MatrixXd samples_;  // row i = value at s = i*step
  Tail tail_;
  std::optional<std::vector<ExpTerm>> exp_form_;
};

// Composite trapezoid of nodal values f_i on a uniform grid with step h.
double trapezoid(const Eigen::VectorXd& f, double h);

}  // namespace memoc
