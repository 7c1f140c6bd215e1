#pragma once
// MINE: a critic T(x, y) trained to maximize the Donsker-Varadhan bound
//   E_joint[T] - log E_marginal[exp T]
// with the moving-average correction of the log-partition gradient.

#include <cstdint>
#include <functional>
#include <vector>

#include "pf/nn.hpp"
#include "pf/tensor.hpp"

namespace pf::mine {

struct MineConfig {
  std::size_t dim_x = 1;
  std::size_t dim_y = 1;
  std::size_t hidden_size = 64;
  std::size_t batch_size = 512;
  long n_iterations = 4000;
  long n_window = 200;
  long n_verbose = 0;  // 0 = silent
  double moving_average_rate = 0.01;
  double learning_rate = 1e-3;
  // Multiplicative decay applied every lr_decay_every iterations.
  double lr_decay = 0.98;
  long lr_decay_every = 500;
  std::uint64_t seed = 0;

  void validate() const;
};

class MineEstimator {
 public:
  MineEstimator() = default;
  explicit MineEstimator(const MineConfig& cfg);

  const MineConfig& config() const { return cfg_; }
  double moving_average_exp_t() const { return ma_exp_t_; }
  // Per-iteration DV values on the training batches, in nats.
  const std::vector<double>& history() const { return history_; }
  // Mean of the last n_window history entries.
  double windowed_mi() const;

  // Critic outputs, one per row of [x | y].
  std::vector<double> critic(const Matrix& x, const Matrix& y) const;
  // dv_value of the critic on a joint batch and a marginal batch sharing x.
  double dv_on_batch(const Matrix& x, const Matrix& y, const Matrix& y_marginal) const;

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  friend MineEstimator train_mine(const MineConfig&, const Matrix&, const Matrix&,
                                  const std::function<void(long, double)>&);
  MineConfig cfg_;
  nn::Mlp net_;
  double ma_exp_t_ = 1.0;
  std::vector<double> history_;
};

// Throws ValidationError on too few rows or mismatched dims, NumericError on a
// non-finite loss. progress(iteration, mi) fires every n_verbose iterations.
MineEstimator train_mine(const MineConfig& cfg, const Matrix& x, const Matrix& y,
                         const std::function<void(long, double)>& progress = {});

// Permutation used to form the marginal batch for evaluation batch `batch`.
std::vector<std::size_t> marginal_permutation(std::uint64_t seed, std::size_t batch, std::size_t n);

// Mean of per-batch DV values over consecutive batches of config().batch_size
// rows (a trailing batch with fewer than 2 rows is dropped).
double estimate_mi(const MineEstimator& est, const Matrix& x, const Matrix& y, std::uint64_t seed);

}  // namespace pf::mine
