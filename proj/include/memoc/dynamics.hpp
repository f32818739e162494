#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

#include "memoc/kernel.hpp"

namespace memoc {

// Right-hand side F(x, u, a) with its declared Lipschitz constant C1
// (|F(x,u,a) - F(y,u,b)| <= C1 (|x-y| + |a-b|)) and the finite control set.
struct Dynamics {
  using Rhs = std::function<void(const Eigen::VectorXd& x, double u,
                                 const Eigen::VectorXd& a,
                                 Eigen::VectorXd& out)>;
  Rhs F;
  double C1 = 0.0;
  std::vector<double> K;
  int d = 1;  // state dimension
  int k = 1;  // memory-channel dimension
};

// Piecewise-constant control: value values[i] on [breaks[i], breaks[i+1]).
class ControlLaw {
 public:
  ControlLaw(std::vector<double> breakpoints, std::vector<double> values);
  static ControlLaw constant(double u, double horizon);

  double at(double t) const;
  double horizon() const { return breaks_.back(); }
  const std::vector<double>& breakpoints() const { return breaks_; }
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> breaks_;
  std::vector<double> values_;
};

struct Trajectory {
  double h = 0.0;
  double T = 0.0;
  Eigen::MatrixXd y;  // (steps+1) x d
  Eigen::MatrixXd g;  // (steps+1) x k, recorded memory channel
  HistoryState initial;
  ControlLaw control;

  int steps() const { return static_cast<int>(y.rows()) - 1; }
  Eigen::VectorXd at(double t) const;  // piecewise-linear in t
};

// Classical fourth-order one-step integration of y' = F(y, u, G). For
// exponential kernels the memory integral rides along as the exact channel
// system m_i' = y - delta_i m_i (one channel per term); for tabulated
// kernels G is evaluated at every stage by trapezoid over the past record
// extended with the stage prediction. Control breakpoints must sit on the
// step grid. Throws BlowupError when the state leaves the finite range.
Trajectory solve_cauchy(const Dynamics& dyn, const Kernel& a,
                        const HistoryState& alpha, const ControlLaw& u,
                        double T, double h);

struct PicardResult {
  Trajectory trajectory;
  std::vector<double> distances;  // ||y_{n+1} - y_n||_theta per iteration
  int iterations = 0;
  bool converged = false;
};

// Grid Picard iteration of the integral map Ty(t) = x + int_0^t F(y,u,G_y),
// trapezoid in time, memory by quadrature. Independent of solve_cauchy.
// theta is the weight of the sup norm; the iteration must contract
// (ratio < 1), otherwise NonContractionError carries the measured ratios.
PicardResult picard_solve(const Dynamics& dyn, const Kernel& a,
                          const HistoryState& alpha, const ControlLaw& u,
                          double T, double h, double theta, int max_iter = 200,
                          double tol = 1e-13);

// Contraction factor bound of the integral map at weight theta,
// C (1/theta + 1/(sqrt(2) theta^{3/2})) with C = C1 max(1, ||A||_L2).
double picard_contraction_bound(const Dynamics& dyn, const Kernel& a,
                                double theta);
// Weight sufficient for contraction (theta >= 2C + 1).
double picard_default_theta(const Dynamics& dyn, const Kernel& a);

// State after flowing for time t: (y(t), s -> y(t-s)), resampled on the
// original history grid; t must sit on the step grid.
HistoryState shift_history(const Trajectory& traj, double t);

// sup_t e^{-theta t} |y(t) - y0(t)| / (|x - x0| + ||z - z0||_L2); 0 when the
// two states coincide.
double continuity_ratio(const Dynamics& dyn, const Kernel& a,
                        const HistoryState& a0, const HistoryState& a1,
                        const ControlLaw& u, double T, double h, double theta);

// sup_[0,T] |y_pert - y| where the history is perturbed by sin(freq s) on
// the sampled window (weakly null as freq grows).
double weak_continuity_probe(const Dynamics& dyn, const Kernel& a,
                             const HistoryState& alpha, double freq,
                             const ControlLaw& u, double T, double h);

// Growth-rate overestimate used by tests: C1 (1 + ||A||_L1 + ||A||_L2) + 1.
double growth_rate_estimate(const Dynamics& dyn, const Kernel& a);

}  // namespace memoc
