#include "pf/tensor.hpp"

#include <string>

namespace pf {

Matrix one_hot(std::span<const int> labels, std::size_t num_classes) {
  Matrix out(labels.size(), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int s = labels[i];
    if (s < 0 || static_cast<std::size_t>(s) >= num_classes)
      throw ValidationError("one_hot: label " + std::to_string(s) + " out of range");
    out(i, static_cast<std::size_t>(s)) = 1.0f;
  }
  return out;
}

}  // namespace pf
