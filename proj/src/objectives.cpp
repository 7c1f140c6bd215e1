#include "pf/objectives.hpp"

#include <algorithm>
#include <cmath>

namespace pf::objectives {

namespace {

// log(1 + exp(v)) without overflow.
double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

double clamp_score(double s) { return std::clamp(s, kScoreFloor, 1.0 - kScoreFloor); }

void require_alpha(double alpha) {
  if (!(alpha >= 0.0)) throw ValidationError("alpha must be non-negative");
}

}  // namespace

Distortion parse_distortion(std::string_view name) {
  if (name == "bernoulli") return Distortion::bernoulli;
  if (name == "mse") return Distortion::mse;
  throw ValidationError("unknown distortion: " + std::string(name));
}

std::string_view distortion_name(Distortion d) { return d == Distortion::bernoulli ? "bernoulli" : "mse"; }

double LossBreakdown::recombined() const {
  return reconstruction + alpha * (kl_prior.value_or(0.0) + uncertainty_term);
}

double distortion(Distortion d, std::span<const float> x, std::span<const float> output) {
  if (x.size() != output.size() || x.empty()) throw ValidationError("distortion: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = x[i], o = output[i];
    if (d == Distortion::bernoulli) acc += t * softplus(-o) + (1.0 - t) * softplus(o);
    else acc += (t - o) * (t - o);
  }
  return acc / static_cast<double>(x.size());
}

double distortion_grad(Distortion d, const Matrix& x, const Matrix& output, Matrix* grad,
                       double scale) {
  if (!x.same_shape(output) || x.empty()) throw ValidationError("distortion: shape mismatch");
  const double per = scale / static_cast<double>(x.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) acc += distortion(d, x.row(r), output.row(r));
  if (grad) {
    for (std::size_t k = 0; k < x.size(); ++k) {
      const double t = x.flat()[k], o = output.flat()[k];
      const double g = d == Distortion::bernoulli ? sigmoid(o) - t : 2.0 * (o - t);
      grad->flat()[k] += static_cast<float>(per * g);
    }
  }
  return acc / static_cast<double>(x.rows());
}

LossBreakdown p1_step1_loss(double dis, double p_true, double alpha) {
  require_alpha(alpha);
  if (!(p_true >= 0.0 && p_true <= 1.0)) throw ValidationError("p1 loss: probability outside [0, 1]");
  LossBreakdown out;
  out.alpha = alpha;
  out.reconstruction = dis;
  if (p_true < kProbFloor) {
    p_true = kProbFloor;
    out.clamped = true;
  }
  out.uncertainty_term = std::log(p_true);
  out.total = out.reconstruction + alpha * out.uncertainty_term;
  return out;
}

LossBreakdown p1_step1_loss(Distortion d, const Matrix& x, const Matrix& x_hat,
                            std::span<const int> s_true, const Matrix& s_pmf, double alpha) {
  require_alpha(alpha);
  if (s_true.size() != x.rows() || s_pmf.rows() != x.rows())
    throw ValidationError("p1 loss: batch sizes differ");
  LossBreakdown out;
  out.alpha = alpha;
  out.reconstruction = distortion_grad(d, x, x_hat, nullptr);
  double acc = 0.0;
  for (std::size_t r = 0; r < s_true.size(); ++r) {
    const auto row = s_pmf.row(r);
    double sum = 0.0;
    for (float p : row) {
      if (!(p >= 0.0f)) throw ValidationError("p1 loss: s_pmf has a negative entry");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-4) throw ValidationError("p1 loss: s_pmf row is not a pmf");
    double p = row[static_cast<std::size_t>(s_true[r])];
    if (p < kProbFloor) {
      p = kProbFloor;
      out.clamped = true;
    }
    acc += std::log(p);
  }
  out.uncertainty_term = acc / static_cast<double>(s_true.size());
  out.total = out.reconstruction + alpha * out.uncertainty_term;
  return out;
}

LossBreakdown p2_step1_loss(double dis_hat, double kl, double dis_tilde, double alpha) {
  require_alpha(alpha);
  LossBreakdown out;
  out.alpha = alpha;
  out.reconstruction = dis_hat;
  out.kl_prior = kl;
  out.uncertainty_term = dis_tilde;
  out.total = dis_hat + alpha * kl + alpha * dis_tilde;
  return out;
}

LossBreakdown p2_step1_loss(Distortion d, const Matrix& x, const Matrix& x_hat,
                            const Matrix& x_tilde, const info::GaussianDiag& posterior,
                            const info::GaussianDiag& prior, double alpha) {
  return p2_step1_loss(distortion_grad(d, x, x_hat, nullptr), info::kl_gaussian_diag(posterior, prior),
                       distortion_grad(d, x, x_tilde, nullptr), alpha);
}

double discriminator_loss(std::span<const float> real_scores, std::span<const float> fake_scores) {
  if (real_scores.empty() || fake_scores.empty()) throw ValidationError("discriminator loss: empty batch");
  double real = 0.0, fake = 0.0;
  for (float s : real_scores) real -= std::log(clamp_score(s));
  for (float s : fake_scores) fake -= std::log(1.0 - clamp_score(s));
  return real / static_cast<double>(real_scores.size()) + fake / static_cast<double>(fake_scores.size());
}

double generator_adversarial_loss(std::span<const float> fake_scores) {
  if (fake_scores.empty()) throw ValidationError("generator loss: empty batch");
  double acc = 0.0;
  for (float s : fake_scores) acc -= std::log(clamp_score(s));
  return acc / static_cast<double>(fake_scores.size());
}

double bce_with_logits(const Matrix& logits, float target, Matrix* grad, double scale) {
  if (logits.empty()) throw ValidationError("bce: empty batch");
  const double n = static_cast<double>(logits.size());
  double acc = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double l = logits.flat()[k];
    acc += target * softplus(-l) + (1.0 - target) * softplus(l);
    if (grad) grad->flat()[k] += static_cast<float>(scale * (sigmoid(l) - target) / n);
  }
  return acc / n;
}

double mean_log_likelihood(const Matrix& logits, std::span<const int> s_true, Matrix* grad,
                           double scale, bool* clamped) {
  if (logits.rows() != s_true.size()) throw ValidationError("log-likelihood: batch sizes differ");
  const Matrix p = models::softmax_rows(logits);
  const double n = static_cast<double>(s_true.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < s_true.size(); ++r) {
    const auto s = static_cast<std::size_t>(s_true[r]);
    double pt = p(r, s);
    if (pt < kProbFloor) {
      pt = kProbFloor;
      if (clamped) *clamped = true;
    }
    acc += std::log(pt);
    if (grad) {
      for (std::size_t c = 0; c < logits.cols(); ++c) {
        const double g = (c == s ? 1.0 : 0.0) - p(r, c);
        (*grad)(r, c) += static_cast<float>(scale * g / n);
      }
    }
  }
  return acc / n;
}

double kl_gaussian_batch(const models::Posterior& post, const models::Posterior& prior,
                         double scale, Matrix* dpost_mean, Matrix* dpost_logvar,
                         Matrix* dprior_mean, Matrix* dprior_logvar) {
  if (!post.mean.same_shape(prior.mean)) throw ValidationError("kl: posterior and prior shapes differ");
  const double n = static_cast<double>(post.batch());
  double acc = 0.0;
  for (std::size_t k = 0; k < post.mean.size(); ++k) {
    const double lp = std::clamp(post.logvar.flat()[k], -models::kMaxLogVar, models::kMaxLogVar);
    const double lq = std::clamp(prior.logvar.flat()[k], -models::kMaxLogVar, models::kMaxLogVar);
    const double vp = std::exp(lp), vq = std::exp(lq);
    const double dm = static_cast<double>(post.mean.flat()[k]) - prior.mean.flat()[k];
    acc += 0.5 * ((lq - lp) + (vp + dm * dm) / vq - 1.0);
    const double w = scale / n;
    if (dpost_mean) dpost_mean->flat()[k] += static_cast<float>(w * dm / vq);
    if (dpost_logvar) dpost_logvar->flat()[k] += static_cast<float>(w * 0.5 * (vp / vq - 1.0));
    if (dprior_mean) dprior_mean->flat()[k] -= static_cast<float>(w * dm / vq);
    if (dprior_logvar) dprior_logvar->flat()[k] += static_cast<float>(w * 0.5 * (1.0 - (vp + dm * dm) / vq));
  }
  return acc / n;
}

}  // namespace pf::objectives
