#include "memoc/problems.hpp"

#include <algorithm>
#include <cmath>

#include "memoc/errors.hpp"

namespace memoc {

namespace {

double take(const std::map<std::string, double>& overrides,
            const std::string& key, double fallback) {
  const auto it = overrides.find(key);
  return it == overrides.end() ? fallback : it->second;
}

void check_keys(const std::map<std::string, double>& overrides,
                std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : overrides) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end())
      throw ConfigError("problem.overrides." + key,
                        "unknown problem override '" + key + "'");
  }
}

double positive(double v, const std::string& field) {
  if (!(v > 0.0)) throw ConfigError(field, field + " must be positive");
  return v;
}

}  // namespace

Problem make_problem(const std::string& name,
                     const std::map<std::string, double>& overrides,
                     const std::vector<double>* control_grid) {
  Problem p;
  p.name = name;
  const auto finish_controls = [&](Problem& prob) {
    if (control_grid != nullptr) {
      if (control_grid->empty())
        throw ConfigError("problem.control_grid",
                          "control grid must not be empty");
      prob.dynamics.K = *control_grid;
    }
  };

  if (name == "constant_cost") {
    check_keys(overrides, {"lambda"});
    const double lambda = positive(take(overrides, "lambda", 1.0), "lambda");
    p.summary = "unit running cost, frozen dynamics: v = 1/lambda everywhere";
    p.dynamics.F = [](const Eigen::VectorXd&, double, const Eigen::VectorXd&,
                      Eigen::VectorXd& out) { out.setZero(); };
    p.dynamics.C1 = 0.0;
    p.dynamics.K = {0.0};
    finish_controls(p);
    p.cost.L = [](const Eigen::VectorXd&, double) { return 1.0; };
    p.cost.sup_bound = 1.0;
    p.cost.C2 = 0.0;
    p.cost.lambda = lambda;
    p.kernel = Kernel::exponential(1.0, 1.0);
    p.kernel_rate = 1.0;
    p.reducible = true;
    p.reduced_F = [](double, double, double) { return 0.0; };
    return p;
  }

  if (name == "uncontrolled_lq") {
    check_keys(overrides, {"lambda", "cost_cap"});
    const double lambda = positive(take(overrides, "lambda", 1.0), "lambda");
    const double cap = positive(take(overrides, "cost_cap", 25.0), "cost_cap");
    p.summary = "F = -x, L = min(x^2, cap): v(x) = x^2/(2 + lambda) closed form";
    p.dynamics.F = [](const Eigen::VectorXd& x, double, const Eigen::VectorXd&,
                      Eigen::VectorXd& out) { out = -x; };
    p.dynamics.C1 = 1.0;
    p.dynamics.K = {0.0};
    finish_controls(p);
    p.cost.L = [cap](const Eigen::VectorXd& x, double) {
      return std::min(x.squaredNorm(), cap);
    };
    p.cost.sup_bound = cap;
    p.cost.C2 = 2.0 * std::sqrt(cap);
    p.cost.lambda = lambda;
    p.kernel = Kernel::exponential(1.0, 1.0);
    p.kernel_rate = 1.0;
    p.reducible = true;
    p.reduced_F = [](double x, double, double) { return -x; };
    return p;
  }

  if (name == "memory_lq") {
    check_keys(overrides,
               {"lambda", "cost_cap", "control_weight", "kernel_rate"});
    const double lambda = positive(take(overrides, "lambda", 1.0), "lambda");
    const double cap = positive(take(overrides, "cost_cap", 4.0), "cost_cap");
    const double weight = take(overrides, "control_weight", 0.1);
    const double rate =
        positive(take(overrides, "kernel_rate", 1.0), "kernel_rate");
    p.summary = "F = u + memory, quadratic cost: the controlled smoke problem";
    p.dynamics.F = [](const Eigen::VectorXd&, double u,
                      const Eigen::VectorXd& a, Eigen::VectorXd& out) {
      out = a;
      out.array() += u;
    };
    p.dynamics.C1 = 1.0;
    p.dynamics.K = {-1.0, 0.0, 1.0};
    finish_controls(p);
    p.cost.L = [cap, weight](const Eigen::VectorXd& x, double u) {
      return std::min(x.squaredNorm(), cap) + weight * u * u;
    };
    double umax = 0.0;
    for (double u : p.dynamics.K) umax = std::max(umax, std::abs(u));
    p.cost.sup_bound = cap + std::abs(weight) * umax * umax;
    p.cost.C2 = 2.0 * std::sqrt(cap);
    p.cost.lambda = lambda;
    p.kernel = Kernel::exponential(rate, 1.0);
    p.kernel_rate = rate;
    p.reducible = true;
    p.reduced_F = [](double, double u, double y) { return u + y; };
    return p;
  }

  if (name == "bang_bang") {
    check_keys(overrides, {"lambda", "cost_cap"});
    const double lambda = positive(take(overrides, "lambda", 1.0), "lambda");
    const double cap = positive(take(overrides, "cost_cap", 1.0), "cost_cap");
    p.summary = "F = u with K = {-1, 1}: switching-control smoke problem";
    p.dynamics.F = [](const Eigen::VectorXd& x, double u,
                      const Eigen::VectorXd&, Eigen::VectorXd& out) {
      out.setConstant(x.size(), u);
    };
    p.dynamics.C1 = 0.0;
    p.dynamics.K = {-1.0, 1.0};
    finish_controls(p);
    p.cost.L = [cap](const Eigen::VectorXd& x, double) {
      return std::min(x.lpNorm<1>(), cap);
    };
    p.cost.sup_bound = cap;
    p.cost.C2 = 1.0;
    p.cost.lambda = lambda;
    p.kernel = Kernel::exponential(1.0, 1.0);
    p.kernel_rate = 1.0;
    p.reducible = true;
    p.reduced_F = [](double, double u, double) { return u; };
    return p;
  }

  if (name == "expander") {
    check_keys(overrides, {"lambda", "growth"});
    const double lambda = positive(take(overrides, "lambda", 1.0), "lambda");
    const double growth = positive(take(overrides, "growth", 10.0), "growth");
    p.summary =
        "F = growth x (saturated far above the cost cap), L = min(|x|, 1): "
        "value is Hoelder with exponent lambda/growth below the Lipschitz "
        "regime";
    // saturation keeps trajectories finite without touching the value:
    // the running cost is already capped at |x| = 1
    p.dynamics.F = [growth](const Eigen::VectorXd& x, double,
                            const Eigen::VectorXd&, Eigen::VectorXd& out) {
      out = growth * x.cwiseMax(-5.0).cwiseMin(5.0);
    };
    p.dynamics.C1 = growth;
    p.dynamics.K = {0.0};
    finish_controls(p);
    p.cost.L = [](const Eigen::VectorXd& x, double) {
      return std::min(x.lpNorm<1>(), 1.0);
    };
    p.cost.sup_bound = 1.0;
    p.cost.C2 = 1.0;
    p.cost.lambda = lambda;
    p.kernel = Kernel::zero(1, 1);
    p.kernel_rate = 1.0;
    p.reducible = false;
    return p;
  }

  throw ConfigError("problem.name", "unknown problem '" + name + "'");
}

const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names = {
      "constant_cost", "uncontrolled_lq", "memory_lq", "bang_bang",
      "expander"};
  return names;
}

}  // namespace memoc
