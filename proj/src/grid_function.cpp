#include "memoc/grid_function.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "memoc/errors.hpp"

namespace memoc {

Tail Tail::exponential(double rate) {
  if (rate < 0.0) throw DomainError("tail decay rate must be >= 0");
  return {Kind::ExponentialDecay, rate};
}

GridFunction::GridFunction(double step, Eigen::MatrixXd samples, Tail tail)
    : step_(step), samples_(std::move(samples)), tail_(tail) {
  if (!(step_ > 0.0)) throw DomainError("grid step must be positive");
  if (samples_.rows() < 2) throw DomainError("grid needs at least two nodes");
  if (samples_.cols() < 1) throw DomainError("grid dimension must be >= 1");
}

GridFunction GridFunction::zero(double step, int nodes, int dim) {
  return GridFunction(step, Eigen::MatrixXd::Zero(nodes, dim));
}

GridFunction GridFunction::from_function(
    double step, int nodes, const std::function<Eigen::VectorXd(double)>& f,
    Tail tail) {
  Eigen::VectorXd first = f(0.0);
  Eigen::MatrixXd samples(nodes, first.size());
  samples.row(0) = first.transpose();
  for (int i = 1; i < nodes; ++i) samples.row(i) = f(i * step).transpose();
  return GridFunction(step, std::move(samples), tail);
}

GridFunction GridFunction::from_scalar(double step, int nodes,
                                       const std::function<double(double)>& f,
                                       Tail tail) {
  Eigen::MatrixXd samples(nodes, 1);
  for (int i = 0; i < nodes; ++i) samples(i, 0) = f(i * step);
  return GridFunction(step, std::move(samples), tail);
}

GridFunction GridFunction::exponential(double step, int nodes,
                                       std::vector<ExpTerm> terms) {
  if (terms.empty()) throw DomainError("exponential form needs >= 1 term");
  const auto dim = terms.front().amplitude.size();
  for (const auto& t : terms) {
    if (t.rate <= 0.0) throw DomainError("exponential rate must be positive");
    if (t.amplitude.size() != dim)
      throw DomainError("exponential term dimensions differ");
  }
  Eigen::MatrixXd samples = Eigen::MatrixXd::Zero(nodes, dim);
  for (int i = 0; i < nodes; ++i) {
    const double s = i * step;
    for (const auto& t : terms)
      samples.row(i) += (t.amplitude * std::exp(-t.rate * s)).transpose();
  }
  Tail tail =
      terms.size() == 1 ? Tail::exponential(terms.front().rate) : Tail::zero();
  GridFunction g(step, std::move(samples), tail);
  g.exp_form_ = std::move(terms);
  return g;
}

GridFunction GridFunction::exponential(double step, int nodes,
                                       double amplitude, double rate) {
  Eigen::VectorXd a(1);
  a << amplitude;
  return exponential(step, nodes, {ExpTerm{a, rate}});
}

GridFunction GridFunction::linear_combination(double a, const GridFunction& f,
                                              double b, const GridFunction& g) {
  if (!f.same_grid(g))
    throw DomainError("linear_combination requires matching grids");
  GridFunction out(f.step_, a * f.samples_ + b * g.samples_, Tail::zero());
  if (f.tail_.kind == Tail::Kind::Zero && g.tail_.kind == Tail::Kind::Zero)
    out.tail_ = Tail::zero();
  else if (f.tail_.kind == g.tail_.kind && f.tail_.rate == g.tail_.rate)
    out.tail_ = f.tail_;
  if (f.exp_form_ && g.exp_form_) {
    std::vector<ExpTerm> terms;
    for (const auto& t : *f.exp_form_)
      terms.push_back({a * t.amplitude, t.rate});
    for (const auto& t : *g.exp_form_)
      terms.push_back({b * t.amplitude, t.rate});
    out.exp_form_ = std::move(terms);
  }
  return out;
}

Eigen::VectorXd GridFunction::value(double s) const {
  if (s < 0.0) throw DomainError("grid function evaluated at negative s");
  const int n = nodes();
  if (s >= s_max()) {
    Eigen::VectorXd last = samples_.row(n - 1).transpose();
    switch (tail_.kind) {
      case Tail::Kind::Zero:
        if (s > s_max()) return Eigen::VectorXd::Zero(dim());
        return last;
      case Tail::Kind::ExponentialDecay:
        return last * std::exp(-tail_.rate * (s - s_max()));
    }
  }
  const double pos = s / step_;
  int i = static_cast<int>(pos);
  if (i > n - 2) i = n - 2;
  const double theta = pos - i;
  return ((1.0 - theta) * samples_.row(i) + theta * samples_.row(i + 1))
      .transpose();
}

double GridFunction::l2_norm_sq() const {
  const int n = nodes();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    acc += w * samples_.row(i).squaredNorm();
  }
  acc *= step_;
  if (tail_.kind == Tail::Kind::ExponentialDecay) {
    const double last = samples_.row(n - 1).squaredNorm();
    if (last > 0.0) {
      if (tail_.rate == 0.0) return std::numeric_limits<double>::infinity();
      acc += last / (2.0 * tail_.rate);
    }
  }
  return acc;
}

double GridFunction::l2_norm() const { return std::sqrt(l2_norm_sq()); }

double GridFunction::sup_norm() const {
  double m = 0.0;
  for (int i = 0; i < nodes(); ++i)
    m = std::max(m, samples_.row(i).lpNorm<Eigen::Infinity>());
  return m;
}

bool GridFunction::same_grid(const GridFunction& other) const {
  return step_ == other.step_ && nodes() == other.nodes() &&
         dim() == other.dim();
}

double trapezoid(const Eigen::VectorXd& f, double h) {
  const auto n = f.size();
  if (n < 2) return 0.0;
  return h * (f.sum() - 0.5 * (f(0) + f(n - 1)));
}

}  // namespace memoc
