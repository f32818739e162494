#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <vector>

#include "memoc/dynamics.hpp"
#include "memoc/kernel.hpp"

namespace memoc {

// Running cost L(x, u), bounded by sup_bound and Lipschitz in x with
// constant C2, plus the discount rate.
struct CostModel {
  std::function<double(const Eigen::VectorXd&, double)> L;
  double sup_bound = 0.0;
  double C2 = 0.0;
  double lambda = 1.0;
};

// Piecewise-constant control family: `intervals` equal pieces of the horizon,
// values drawn from `values`.
struct ControlFamily {
  int intervals = 1;
  std::vector<double> values;
};

struct OptimizerTrace {
  long evaluations = 0;
  int sweeps = 0;       // coordinate-descent passes (improvement mode)
  bool exhaustive = true;
};

struct ValueEstimate {
  double value = 0.0;
  double horizon = 0.0;
  double tail_bound = 0.0;  // ||L||_inf e^{-lambda T} / lambda
  ControlFamily family;
  OptimizerTrace trace;
  std::vector<double> best_controls;  // per family interval
};

// Trapezoid of e^{-lambda s} L(y(s), u(s)) over [0, T], split at the control
// breakpoints so the integrand jump never straddles a panel.
double discounted_cost(const Trajectory& traj, const CostModel& cost,
                       double T);

// Slack the trapezoid rule can add on top of ||L||_inf / lambda + tail.
double quadrature_slack(const CostModel& cost, double h);

enum class ValueMode { Exhaustive, Improve };

// Infimum of the discounted cost over the family. Exhaustive mode enumerates
// every control sequence (error when the family exceeds max_evals, no silent
// fallback); improvement mode runs coordinate descent from the best constant
// control and never ends above that baseline. Deterministic: ties keep the
// first candidate in declared order.
ValueEstimate value_estimate(const Dynamics& dyn, const Kernel& a,
                             const CostModel& cost, const HistoryState& alpha,
                             const ControlFamily& family, double T, double h,
                             ValueMode mode = ValueMode::Exhaustive,
                             long max_evals = 2000000);

// |v(alpha) - inf_outer {segment cost + e^{-lambda t} v(flowed state)}| with
// the same family on the outer [0, t] segment and on the inner horizon T - t.
double dpp_residual(const Dynamics& dyn, const Kernel& a,
                    const CostModel& cost, const HistoryState& alpha,
                    double split_t, const ControlFamily& family, double T,
                    double h);

// H(x, z, p) = max_{u in K} { -L(x,u) - p . F(x, u, int A z) }; exact over
// the finite control set, first maximizer wins ties.
double hamiltonian(const CostModel& cost, const Dynamics& dyn, const Kernel& a,
                   const HistoryState& alpha, const Eigen::VectorXd& p);

struct RegularitySample {
  HistoryState a;
  HistoryState b;
  Eigen::VectorXd p;
  Eigen::VectorXd q;
};

// Max over samples of (|H difference| - C * modulus); all must come out <= 0.
// C per bound from the declared C1, C2 and the kernel norms. The dual-norm
// bound needs the kernel derivative norm and is absent when the kernel does
// not provide one.
struct RegularityGaps {
  double state_bound = 0.0;     // C (|x-y| + ||z-w||_L2)(1 + |p|)
  double momentum_bound = 0.0;  // C |p-q| (1 + |x| + ||z||_L2)
  std::optional<double> dual_bound;  // L2 modulus replaced by (H1)'
};

RegularityGaps hamiltonian_regularity_gap(
    const CostModel& cost, const Dynamics& dyn, const Kernel& a,
    const std::vector<RegularitySample>& samples);

}  // namespace memoc
