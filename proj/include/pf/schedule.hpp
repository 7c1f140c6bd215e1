#pragma once
// Alpha annealing: a linear warm-up over the first third of training, then a
// logistic approach to alpha_end.

#include <optional>

namespace pf {

struct AlphaSchedule {
  int num_epochs = 0;
  double alpha_start = 0.0;
  double alpha_end = 0.0;
  double linear_increment = 0.0;
  // Logistic steepness; defaults to 10 / (num_epochs - E1).
  std::optional<double> steepness;

  void validate() const;
  int linear_epochs() const { return num_epochs / 3; }
  double k() const;
};

// Throws ValidationError for epoch outside [0, num_epochs].
double alpha_at(const AlphaSchedule& s, int epoch);

}  // namespace pf
