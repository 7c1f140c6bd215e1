#include "pf/mine.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "pf/infotheory.hpp"

namespace pf::mine {

void MineConfig::validate() const {
  if (dim_x == 0 || dim_y == 0) throw ValidationError("mine: dimensions must be >= 1");
  if (hidden_size == 0) throw ValidationError("mine: hidden_size must be >= 1");
  if (batch_size < 2) throw ValidationError("mine: batch_size must be >= 2");
  if (n_iterations < 1) throw ValidationError("mine: n_iterations must be >= 1");
  if (n_window < 1 || n_window > n_iterations) throw ValidationError("mine: n_window must be in [1, n_iterations]");
  if (!(moving_average_rate > 0.0 && moving_average_rate <= 1.0))
    throw ValidationError("mine: moving_average_rate must be in (0, 1]");
  if (!(learning_rate > 0.0)) throw ValidationError("mine: learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0) || lr_decay_every < 1)
    throw ValidationError("mine: invalid learning-rate decay");
}

MineEstimator::MineEstimator(const MineConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng init(derive_seed(cfg_.seed, "mine-init"));
  nn::MlpSpec spec;
  spec.input_dim = cfg_.dim_x + cfg_.dim_y;
  spec.hidden = {cfg_.hidden_size, cfg_.hidden_size};
  spec.output_dim = 1;
  spec.activation = nn::Activation::elu;
  net_ = nn::Mlp(spec, init);
}

double MineEstimator::windowed_mi() const {
  if (history_.empty()) throw ValidationError("mine: estimator has not been trained");
  const std::size_t w = std::min<std::size_t>(history_.size(), static_cast<std::size_t>(cfg_.n_window));
  return std::accumulate(history_.end() - static_cast<std::ptrdiff_t>(w), history_.end(), 0.0) /
         static_cast<double>(w);
}

std::vector<double> MineEstimator::critic(const Matrix& x, const Matrix& y) const {
  if (x.cols() != cfg_.dim_x || y.cols() != cfg_.dim_y || x.rows() != y.rows())
    throw ValidationError("mine: sample dimensions do not match the estimator");
  const Matrix t = net_.forward(hconcat(x, y));
  return {t.flat().begin(), t.flat().end()};
}

double MineEstimator::dv_on_batch(const Matrix& x, const Matrix& y, const Matrix& y_marginal) const {
  return info::dv_value(critic(x, y), critic(x, y_marginal));
}

MineEstimator train_mine(const MineConfig& cfg, const Matrix& x, const Matrix& y,
                         const std::function<void(long, double)>& progress) {
  MineEstimator est(cfg);
  if (x.rows() != y.rows()) throw ValidationError("mine: x and y have different row counts");
  if (x.cols() != cfg.dim_x || y.cols() != cfg.dim_y) throw ValidationError("mine: sample dimensions do not match config");
  if (x.rows() < 2 * cfg.batch_size)
    throw ValidationError("mine: need at least 2*batch_size = " + std::to_string(2 * cfg.batch_size) +
                          " rows, got " + std::to_string(x.rows()));

  Rng rng(derive_seed(cfg.seed, "mine-train"));
  nn::Adam opt(est.net_.parameters(), {.learning_rate = cfg.learning_rate});
  const std::size_t m = cfg.batch_size;
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<std::size_t> idx(m), idx_marg(m);
  est.history_.reserve(static_cast<std::size_t>(cfg.n_iterations));

  for (long it = 0; it < cfg.n_iterations; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      idx[i] = rng.index(x.rows());
      idx_marg[i] = rng.index(x.rows());
    }
    const Matrix xb = gather_rows(x, std::span<const std::size_t>(idx));
    const Matrix joint = hconcat(xb, gather_rows(y, std::span<const std::size_t>(idx)));
    const Matrix marg = hconcat(xb, gather_rows(y, std::span<const std::size_t>(idx_marg)));

    nn::Mlp::Trace tj, tm;
    const Matrix t_joint = est.net_.forward(joint, nn::Mode::train, &rng, &tj);
    const Matrix t_marg = est.net_.forward(marg, nn::Mode::train, &rng, &tm);

    std::vector<double> tjv(t_joint.flat().begin(), t_joint.flat().end());
    std::vector<double> tmv(t_marg.flat().begin(), t_marg.flat().end());
    const double mi = info::dv_value(tjv, tmv);
    double mean_exp = 0.0;
    for (double t : tmv) mean_exp += std::exp(t);
    mean_exp *= inv_m;
    if (!std::isfinite(mi) || !std::isfinite(mean_exp))
      throw NumericError("mine: non-finite loss at iteration " + std::to_string(it), 0, it);

    est.ma_exp_t_ = (1.0 - cfg.moving_average_rate) * est.ma_exp_t_ + cfg.moving_average_rate * mean_exp;

    // loss = -(mean T_joint - mean exp(T_marg) / ma), ma held constant
    Matrix dj(m, 1, static_cast<float>(-inv_m));
    Matrix dm(m, 1);
    for (std::size_t i = 0; i < m; ++i) dm(i, 0) = static_cast<float>(std::exp(tmv[i]) * inv_m / est.ma_exp_t_);
    opt.zero_grad();
    est.net_.backward(tj, dj);
    est.net_.backward(tm, dm);
    if (!nn::grads_finite(opt.params()))
      throw NumericError("mine: non-finite gradient at iteration " + std::to_string(it), 0, it);
    opt.step();

    est.history_.push_back(mi);
    if ((it + 1) % cfg.lr_decay_every == 0) opt.set_learning_rate(opt.learning_rate() * cfg.lr_decay);
    if (progress && cfg.n_verbose > 0 && (it + 1) % cfg.n_verbose == 0) progress(it + 1, mi);
  }
  return est;
}

std::vector<std::size_t> marginal_permutation(std::uint64_t seed, std::size_t batch, std::size_t n) {
  Rng rng(derive_seed(seed, "mine-eval-" + std::to_string(batch)));
  return rng.permutation(n);
}

double estimate_mi(const MineEstimator& est, const Matrix& x, const Matrix& y, std::uint64_t seed) {
  if (x.rows() != y.rows()) throw ValidationError("mine: x and y have different row counts");
  if (x.cols() != est.config().dim_x || y.cols() != est.config().dim_y)
    throw ValidationError("mine: sample dimensions do not match the estimator");
  const std::size_t bs = est.config().batch_size;
  double acc = 0.0;
  std::size_t batches = 0;
  for (std::size_t start = 0; start + 2 <= x.rows(); start += bs) {
    const std::size_t n = std::min(bs, x.rows() - start);
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), start);
    std::vector<std::size_t> perm = marginal_permutation(seed, batches, n);
    for (auto& p : perm) p += start;
    acc += est.dv_on_batch(gather_rows(x, std::span<const std::size_t>(rows)),
                           gather_rows(y, std::span<const std::size_t>(rows)),
                           gather_rows(y, std::span<const std::size_t>(perm)));
    ++batches;
  }
  if (batches == 0) throw ValidationError("mine: need at least 2 evaluation rows");
  return acc / static_cast<double>(batches);
}

}  // namespace pf::mine
