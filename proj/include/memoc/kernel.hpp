#pragma once

#include <Eigen/Dense>

#include <istream>
#include <optional>
#include <utility>
#include <vector>

#include "memoc/grid_function.hpp"

namespace memoc {

// Memory weight A : (0, +inf) -> R^{k x d}. Exponential sums are kept in
// closed form; tabulated kernels are piecewise linear on their own grid and
// vanish beyond it.
class Kernel {
 public:
  struct Term {
    double rate;            // > 0
    Eigen::MatrixXd coef;   // k x d
  };

  static Kernel exponential(double rate, Eigen::MatrixXd coef);
  static Kernel exponential(double rate, double coef = 1.0);  // d = k = 1
  static Kernel sum_of_exponentials(std::vector<Term> terms);
  static Kernel tabulated(double step, std::vector<Eigen::MatrixXd> samples,
                          bool smooth);
  static Kernel zero(int k = 1, int d = 1);  // tabulated zero kernel

  bool is_exponential() const { return !terms_.empty(); }
  const std::vector<Term>& exp_terms() const { return terms_; }
  bool tabulated_smooth() const { return smooth_; }
  double tab_step() const { return tab_step_; }
  const std::vector<Eigen::MatrixXd>& tab_samples() const { return tab_; }

  int rows() const { return k_; }  // memory-channel dimension k
  int cols() const { return d_; }  // state dimension d

  Eigen::MatrixXd at(double s) const;
  // End of the support for tabulated kernels, +inf for exponential ones.
  double support() const;

 private:
  Kernel() = default;
  std::vector<Term> terms_;
  std::vector<Eigen::MatrixXd> tab_;
  double tab_step_ = 0.0;
  bool smooth_ = false;
  int k_ = 0, d_ = 0;
};

// Two-column (s, entries of A(s) row-major) CSV, uniform s grid starting at 0.
Kernel load_tabulated_kernel_csv(std::istream& in, int k, int d, bool smooth);

struct KernelNorms {
  double l1 = 0.0;
  double l2 = 0.0;
  std::optional<double> dl2;  // absent for tabulated kernels not flagged smooth
};

// ||A||_L1, ||A||_L2 and ||A'||_L2 (Frobenius norm pointwise). Closed forms
// for exponential kernels, grid quadrature for tabulated ones.
KernelNorms kernel_norms(const Kernel& a);

// State of the controlled system: current point x and past z (z(s) = x(-s)).
struct HistoryState {
  Eigen::VectorXd x;
  GridFunction z;

  HistoryState(Eigen::VectorXd x_, GridFunction z_);

  int dim() const { return static_cast<int>(x.size()); }
  // |x - z(0)| <= tol, the computable part of membership in E0.
  bool in_E0(double tol) const;
  double z_l2_norm() const { return z.l2_norm(); }
};

// G(t) = int_0^t A(s) y(t-s) ds + int_0^inf A(t+s) z(s) ds by composite
// trapezoid on the trajectory and history grids, with the closed-form tail
// dictated by the tail policy. traj holds y(0), y(h), ... and must cover t.
Eigen::VectorXd memory_integral(const Kernel& a, const HistoryState& alpha,
                                const Eigen::MatrixXd& traj, double h,
                                double t);

// The history half of the memory integral, int_0^inf A(t+s) z(s) ds.
Eigen::VectorXd memory_history_piece(const Kernel& a, const GridFunction& z,
                                     double t);

// int_0^inf e^{-delta s} z(s) ds from the samples plus the tail term.
Eigen::VectorXd exp_moment(const GridFunction& z, double delta);

// Integrates m' = x(t) - delta m with x piecewise linear on the grid
// (per-interval exact update). Returns the channel at every node.
Eigen::MatrixXd exp_memory_channel_path(double delta,
                                        const Eigen::MatrixXd& x_path,
                                        double h, const Eigen::VectorXd& m0);
// Final value m(t_end) of the channel.
Eigen::VectorXd exp_memory_channel(double delta, const Eigen::MatrixXd& x_path,
                                   double h, const Eigen::VectorXd& m0);

}  // namespace memoc
