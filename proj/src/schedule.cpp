#include "pf/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pf/errors.hpp"

namespace pf {

void AlphaSchedule::validate() const {
  if (num_epochs < 0) throw ValidationError("alpha schedule: num_epochs must be >= 0");
  if (!(alpha_start >= 0.0)) throw ValidationError("alpha schedule: alpha_start must be >= 0");
  if (!(alpha_end >= alpha_start)) throw ValidationError("alpha schedule: alpha_end must be >= alpha_start");
  if (!(linear_increment >= 0.0)) throw ValidationError("alpha schedule: linear_increment must be >= 0");
  if (steepness && !(*steepness > 0.0)) throw ValidationError("alpha schedule: steepness must be positive");
}

double AlphaSchedule::k() const {
  if (steepness) return *steepness;
  const int span = num_epochs - linear_epochs();
  return span > 0 ? 10.0 / span : 1.0;
}

double alpha_at(const AlphaSchedule& s, int epoch) {
  s.validate();
  if (epoch < 0 || epoch > s.num_epochs)
    throw ValidationError("alpha schedule: epoch " + std::to_string(epoch) + " outside [0, " +
                          std::to_string(s.num_epochs) + "]");
  const int e1 = s.linear_epochs();
  auto linear = [&](int e) { return std::min(s.alpha_start + s.linear_increment * e, s.alpha_end); };
  if (epoch < e1) return linear(epoch);
  const double a1 = linear(e1);
  const double t = 2.0 / (1.0 + std::exp(-s.k() * (epoch - e1))) - 1.0;
  return a1 + (s.alpha_end - a1) * t;
}

}  // namespace pf
