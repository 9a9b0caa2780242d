#include "fgmi/step_function.hpp"

#include <algorithm>
#include <cmath>

#include "fgmi/errors.hpp"

namespace fgmi {

StepFunction::StepFunction(std::vector<double> jump_times, std::vector<double> values,
                           double initial_value)
    : times_(std::move(jump_times)), values_(std::move(values)), initial_(initial_value) {
  if (times_.size() != values_.size()) {
    throw DataError("step function: jump_times and values differ in length");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!(times_[i] > 0.0) || !std::isfinite(times_[i])) {
      throw DataError("step function: jump times must be positive and finite");
    }
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw DataError("step function: jump times must be strictly increasing");
    }
  }
}

double StepFunction::operator()(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

double StepFunction::left_limit(double t) const {
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return initial_;
  return values_[static_cast<std::size_t>(it - times_.begin()) - 1];
}

std::vector<double> StepFunction::evaluate(std::span<const double> ts) const {
  std::vector<double> out;
  out.reserve(ts.size());
  for (double t : ts) out.push_back((*this)(t));
  return out;
}

bool StepFunction::is_nondecreasing() const {
  double prev = initial_;
  for (double v : values_) {
    if (v < prev) return false;
    prev = v;
  }
  return true;
}

bool StepFunction::is_nonincreasing() const {
  double prev = initial_;
  for (double v : values_) {
    if (v > prev) return false;
    prev = v;
  }
  return true;
}

}  // namespace fgmi
