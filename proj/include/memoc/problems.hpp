#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "memoc/dynamics.hpp"
#include "memoc/kernel.hpp"
#include "memoc/value.hpp"

namespace memoc {

// A named problem: full dynamics F(x,u,a), cost, kernel, and (when the
// memory enters through one exponential channel) the reduced F(x,u,y).
struct Problem {
  std::string name;
  std::string summary;
  Dynamics dynamics;
  CostModel cost;
  Kernel kernel = Kernel::zero(1, 1);
  double kernel_rate = 1.0;
  bool reducible = false;
  std::function<double(double x, double u, double y)> reduced_F;
};

// Built-in library. Coefficient overrides by key; unknown names or keys are
// rejected.
//   constant_cost    L = 1, F = 0                   (lambda)
//   uncontrolled_lq  F = -x, L = min(x^2, cap)      (lambda, cost_cap)
//   memory_lq        F = u + a, L = min(x^2, cap) + weight u^2
//                                                   (lambda, cost_cap,
//                                                    control_weight,
//                                                    kernel_rate)
//   bang_bang        F = u, L = min(|x|, cap)       (lambda, cost_cap)
//   expander         F = growth x, L = min(|x|, 1), zero kernel
//                                                   (lambda, growth)
Problem make_problem(const std::string& name,
                     const std::map<std::string, double>& overrides = {},
                     const std::vector<double>* control_grid = nullptr);

const std::vector<std::string>& problem_names();

}  // namespace memoc
