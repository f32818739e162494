#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace memoc {

// Trajectory left the finite range; carries the first bad time.
class BlowupError : public std::runtime_error {
 public:
  BlowupError(double time, const std::string& what)
      : std::runtime_error(what), time_(time) {}
  double time() const { return time_; }

 private:
  double time_;
};

// Picard iteration stopped contracting; carries the measured distance ratios.
class NonContractionError : public std::runtime_error {
 public:
  NonContractionError(std::vector<double> ratios, const std::string& what)
      : std::runtime_error(what), ratios_(std::move(ratios)) {}
  const std::vector<double>& ratios() const { return ratios_; }

 private:
  std::vector<double> ratios_;
};

// Two independent evaluation routes disagreed beyond tolerance.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input outside an operator's domain (e.g. not in E0, point outside a grid box).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Fixed-point iteration ran out of iterations; carries the update history.
class IterationLimitError : public std::runtime_error {
 public:
  IterationLimitError(std::vector<double> history, const std::string& what)
      : std::runtime_error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

// Configuration rejected; carries the offending field path.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::invalid_argument(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace memoc
