#pragma once
// Loss assembly for the six training steps. The scalar functions implement
// the documented formulas; the *_grad helpers return the same quantities for
// a minibatch together with their gradient w.r.t. network outputs, averaged
// over the batch.

#include <map>
#include <optional>
#include <span>
#include <string>

#include "pf/models.hpp"
#include "pf/tensor.hpp"

namespace pf::objectives {

// Scores are clamped to this interval before taking logs.
inline constexpr double kScoreFloor = 1e-7;
inline constexpr double kProbFloor = 1e-12;

enum class Distortion {
  bernoulli,  // mean per-pixel binary cross-entropy, output holds logits
  mse,        // mean squared error per coordinate
};

Distortion parse_distortion(std::string_view name);
std::string_view distortion_name(Distortion d);

struct LossBreakdown {
  double reconstruction = 0.0;
  std::optional<double> kl_prior;  // GenPF only
  double uncertainty_term = 0.0;
  std::map<std::string, double> adversarial_terms;
  double alpha = 0.0;
  double total = 0.0;
  bool clamped = false;  // a probability was floored at kProbFloor

  // reconstruction + alpha * (kl_prior + uncertainty_term)
  double recombined() const;
};

// dis(x, output) for one sample.
double distortion(Distortion d, std::span<const float> x, std::span<const float> output);

// Mean distortion over the batch; adds d(mean)/d(output) * scale into grad.
double distortion_grad(Distortion d, const Matrix& x, const Matrix& output, Matrix* grad,
                       double scale = 1.0);

// DisPF step-1 objective (minimized): dis + alpha * log q(s_true | z).
LossBreakdown p1_step1_loss(double dis, double p_true, double alpha);
// Batched: mean over rows, s_pmf rows are softmax outputs.
LossBreakdown p1_step1_loss(Distortion d, const Matrix& x, const Matrix& x_hat,
                            std::span<const int> s_true, const Matrix& s_pmf, double alpha);

// GenPF step-1 objective (minimized): dis(x, x_hat) + alpha * KL + alpha * dis(x, x_tilde).
LossBreakdown p2_step1_loss(double dis_hat, double kl, double dis_tilde, double alpha);
LossBreakdown p2_step1_loss(Distortion d, const Matrix& x, const Matrix& x_hat,
                            const Matrix& x_tilde, const info::GaussianDiag& posterior,
                            const info::GaussianDiag& prior, double alpha);

// mean(-log real) + mean(-log(1 - fake)), scores clamped to [1e-7, 1 - 1e-7].
double discriminator_loss(std::span<const float> real_scores, std::span<const float> fake_scores);

// Non-saturating generator loss mean(-log score), where score is the
// discriminator's probability for the label the generator wants.
double generator_adversarial_loss(std::span<const float> fake_scores);

// Mean binary cross-entropy of logits against a constant target (1 or 0),
// computed in logit space. Adds scale * gradient into grad when non-null.
double bce_with_logits(const Matrix& logits, float target, Matrix* grad, double scale = 1.0);

// Mean log q(s_true | z) from logits; adds scale * d/dlogits into grad.
// Probabilities below kProbFloor are floored and reported via `clamped`.
double mean_log_likelihood(const Matrix& logits, std::span<const int> s_true, Matrix* grad,
                           double scale = 1.0, bool* clamped = nullptr);

// Mean over rows of KL(post_r || prior_r); gradients (times scale) go into
// whichever output pointers are non-null.
double kl_gaussian_batch(const models::Posterior& post, const models::Posterior& prior,
                         double scale, Matrix* dpost_mean, Matrix* dpost_logvar,
                         Matrix* dprior_mean = nullptr, Matrix* dprior_logvar = nullptr);

}  // namespace pf::objectives
