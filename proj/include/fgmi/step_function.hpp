#pragma once

#include <span>
#include <vector>

namespace fgmi {

// Right-continuous step function on [0, inf). Carries the estimated cumulative
// hazards, survival and incidence curves used throughout the library.
class StepFunction {
 public:
  StepFunction() = default;
  explicit StepFunction(double initial_value) : initial_(initial_value) {}
  // jump_times must be strictly increasing and positive; values.size() == jump_times.size().
  StepFunction(std::vector<double> jump_times, std::vector<double> values, double initial_value);

  // Value at the largest jump time <= t.
  double operator()(double t) const;
  // Value at the largest jump time < t.
  double left_limit(double t) const;

  std::span<const double> jump_times() const { return times_; }
  std::span<const double> values() const { return values_; }
  double initial_value() const { return initial_; }
  double terminal_value() const { return values_.empty() ? initial_ : values_.back(); }
  std::size_t size() const { return times_.size(); }
  bool empty() const { return times_.empty(); }

  std::vector<double> evaluate(std::span<const double> ts) const;

  bool is_nondecreasing() const;
  bool is_nonincreasing() const;

 private:
  std::vector<double> times_;
  std::vector<double> values_;
  double initial_ = 0.0;
};

}  // namespace fgmi
