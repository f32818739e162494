#pragma once

#include <Eigen/Dense>

#include <iosfwd>

#include "memoc/grid_function.hpp"
#include "memoc/kernel.hpp"

namespace memoc {

// Points of E = R^d x L2(0,inf): same data as a history state.
using EPoint = HistoryState;

// B = (I + T*T)^{-1} applied to (x, z): w solves the Robin boundary value
// problem -w'' + w = z on (0,inf), -2 w'(0) + w(0) = x, and y = (x + w(0))/2.
// Solved in closed form per component: w = p + c e^{-s} with
// p(s) = 1/2 int_0^inf e^{-|s-t|} z(t) dt and c = (x + p(0))/3. Inputs that
// carry an exponential closed form are handled with exact exponential
// integrals over the full half line; sampled inputs are treated as their
// piecewise-linear interpolants (zero beyond s_max), for which the
// convolution recursions below are also exact. A second-order
// finite-difference solve of the same boundary value problem runs as an
// independent route and the two must agree.
struct BResult {
  Eigen::VectorXd y;
  GridFunction w;    // solution sampled on the z grid
  GridFunction dw;   // w' (closed form, not finite differences)
  GridFunction ddw;  // w'' = w - z
  Eigen::VectorXd w0;
  Eigen::VectorXd dw0;
  // sup over interior nodes of |-w'' + w - z| with w'' from a fourth-order
  // stencil on the w samples (independent of the construction).
  double interior_residual = 0.0;
  double robin_residual = 0.0;  // |-2 w'(0) + w(0) - x|
  double route_gap = 0.0;       // sup node gap against the FD solve
};

BResult apply_B(const EPoint& alpha);

// T(y,w) = (y - w(0), -w'), derivative by centered differences.
EPoint apply_T(const Eigen::VectorXd& y, const GridFunction& w);

// T*(x,z) = (x, z') on E0; rejects points with |x - z(0)| > tol_e0.
EPoint apply_Tstar(const EPoint& alpha, double tol_e0 = 1e-8);

// ||alpha||_B^2 = <B(alpha), alpha> = y.x + int w z, guarded against
// negative values (B is nonnegative).
double b_norm_sq(const EPoint& alpha);
// Right-hand side of the norm identity: |x|^2/2 + |w(0)|^2/2 + ||w||_H1^2.
double b_norm_sq_identity(const EPoint& alpha);
// <B(alpha), beta> for the self-adjointness checks.
double b_inner(const EPoint& alpha, const EPoint& beta);
// <T B(alpha), alpha>; for alpha in E0 the closed form
// 3/8 |x-w(0)|^2 + x.w(0)/2 is evaluated as a cross-check.
double tb_form(const EPoint& alpha);
// ||B(alpha)|| in E, for the contraction bound ||B a|| <= ||a||_B.
double b_image_norm(const EPoint& alpha);

// (H1)' dual norm: ||z||_(H1)' = ||r||_H1 where -r'' + r = z, r'(0) = 0,
// r decaying (Neumann Green's function 1/2 (e^{-|s-t|} + e^{-(s+t)})).
double dual_h1_norm(const GridFunction& z);

// ||.||_E of a point: (|x|^2 + ||z||_L2^2)^{1/2} with the exact
// piecewise-linear L2 norm (tail included).
double e_norm(const EPoint& alpha);
// Exact L2 norm of the piecewise-linear interpolant (sharper than the
// nodal trapezoid, which over-counts kinks).
double pl_l2_norm_sq(const GridFunction& z);

// Grid-function H1 norm: trapezoid L2 part plus centered-difference
// derivative part (one-sided at the ends).
double h1_norm_sq(const GridFunction& w);

// CSV export of a solve for plotting: s, w, w', and the per-node plug-back
// residual -w'' + w - z (fourth-order stencil, zero at the window edges).
void write_bresult_csv(const BResult& b, const GridFunction& z,
                       std::ostream& out);

}  // namespace memoc
