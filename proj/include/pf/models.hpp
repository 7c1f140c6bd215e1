#pragma once
// The networks of the two funnel architectures and the stochastic sampling
// primitives they share.
//
//   Encoder            x -> (mean, log-variance) of a diagonal Gaussian
//   UtilityDecoder     z -> reconstruction (Bernoulli logits or real vector)
//   SensitiveClassifier z -> logits over the sensitive attribute
//   FilmGenerator      (z, one-hot s) -> conditional reconstruction
//   PriorGenerator     standard-normal noise -> Gaussian prior sample
//   Discriminator      input -> logit of "came from the first distribution"

#include <cstddef>
#include <span>
#include <vector>

#include "pf/infotheory.hpp"
#include "pf/nn.hpp"

namespace pf::models {

using nn::Mode;

// Log-variances are clamped to this range before exponentiating.
inline constexpr float kMaxLogVar = 30.0f;

struct Posterior {
  Matrix mean;
  Matrix logvar;

  std::size_t batch() const { return mean.rows(); }
  std::size_t dim() const { return mean.cols(); }
  float variance(std::size_t r, std::size_t c) const;
  info::GaussianDiag row(std::size_t r) const;
};

struct LatentSample {
  std::vector<double> z;
};

struct ReparamGrad {
  std::vector<double> mean;
  std::vector<double> stddev;
};

// z = mean + sqrt(variance) * eps
LatentSample reparameterize(const info::GaussianDiag& g, std::span<const double> eps);
// Chain rule through reparameterize for an upstream gradient dL/dz.
ReparamGrad reparameterize_backward(const info::GaussianDiag& g, std::span<const double> eps,
                                    std::span<const double> dz);

// Batched form used during training; eps has the posterior's shape.
Matrix reparameterize(const Posterior& p, const Matrix& eps);
// dL/dz -> (dL/dmean, dL/dlogvar), added into dmean/dlogvar.
void reparameterize_backward(const Posterior& p, const Matrix& eps, const Matrix& dz,
                             Matrix& dmean, Matrix& dlogvar);

// Adds N(0, 1/(2 pi e)) noise per coordinate when enabled.
LatentSample inject_latent_noise(const LatentSample& z, bool enabled, Rng& rng);
void inject_latent_noise(Matrix& z, bool enabled, Rng& rng);

Matrix sigmoid(const Matrix& logits);
Matrix softmax_rows(const Matrix& logits);

struct NetConfig {
  std::vector<std::size_t> hidden{256, 256};
  nn::Activation activation = nn::Activation::relu;
  double dropout = 0.1;
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(std::size_t input_dim, std::size_t latent_dim, const NetConfig& cfg, Rng& init_rng);

  std::size_t input_dim() const { return net_.spec().input_dim; }
  std::size_t latent_dim() const { return latent_dim_; }

  Posterior forward(const Matrix& x, Mode mode = Mode::eval, Rng* rng = nullptr,
                    nn::Mlp::Trace* trace = nullptr) const;
  Matrix backward(const nn::Mlp::Trace& trace, const Matrix& dmean, const Matrix& dlogvar);

  // Eval-mode posterior for a single input.
  info::GaussianDiag encode(std::span<const float> x) const;

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  std::size_t latent_dim_ = 0;
  nn::Mlp net_;
};

class UtilityDecoder {
 public:
  UtilityDecoder() = default;
  UtilityDecoder(std::size_t latent_dim, std::size_t output_dim, const NetConfig& cfg,
                 Rng& init_rng);

  std::size_t latent_dim() const { return net_.spec().input_dim; }
  std::size_t output_dim() const { return net_.spec().output_dim; }

  // Bernoulli logits in image mode, the reconstruction itself in embedding mode.
  Matrix forward(const Matrix& z, Mode mode = Mode::eval, Rng* rng = nullptr,
                 nn::Mlp::Trace* trace = nullptr) const;
  Matrix backward(const nn::Mlp::Trace& trace, const Matrix& dy) { return net_.backward(trace, dy); }

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  nn::Mlp net_;
};

class SensitiveClassifier {
 public:
  SensitiveClassifier() = default;
  SensitiveClassifier(std::size_t latent_dim, std::size_t num_classes, const NetConfig& cfg,
                      Rng& init_rng);

  std::size_t num_classes() const { return net_.spec().output_dim; }

  Matrix logits(const Matrix& z, Mode mode = Mode::eval, Rng* rng = nullptr,
                nn::Mlp::Trace* trace = nullptr) const;
  // Softmax rows; each row is a pmf over the sensitive attribute.
  Matrix classify(const Matrix& z) const { return softmax_rows(logits(z)); }
  Matrix backward(const nn::Mlp::Trace& trace, const Matrix& dlogits) {
    return net_.backward(trace, dlogits);
  }

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  nn::Mlp net_;
};

// Per-layer scale/shift pairs generated from a one-hot attribute.
struct FiLMParams {
  std::vector<std::vector<float>> gamma;
  std::vector<std::vector<float>> beta;
};

// A decoder whose hidden activations h are replaced by gamma(s) * h + beta(s).
// gamma and beta come from one linear head per layer fed with one-hot s; with
// a one-hot input a linear head can emit any per-class vector.
class FilmGenerator {
 public:
  struct Trace {
    Matrix s_onehot;
    std::vector<Matrix> inputs;  // input to each trunk layer
    std::vector<Matrix> pre;
    std::vector<Matrix> post;     // activation before modulation
    std::vector<Matrix> gamma;    // batch x width, per hidden layer
    std::vector<Matrix> masks;
  };

  FilmGenerator() = default;
  FilmGenerator(std::size_t latent_dim, std::size_t num_classes, std::size_t output_dim,
                const NetConfig& cfg, Rng& init_rng);

  std::size_t latent_dim() const { return trunk_.front().in_dim(); }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t output_dim() const { return trunk_.back().out_dim(); }

  // Throws ValidationError unless every row of s_onehot is a one-hot vector.
  Matrix forward(const Matrix& z, const Matrix& s_onehot, Mode mode = Mode::eval,
                 Rng* rng = nullptr, Trace* trace = nullptr) const;
  // Returns dL/dz; gradients accumulate into trunk and heads.
  Matrix backward(const Trace& trace, const Matrix& dy);

  FiLMParams film_params(std::span<const float> s_onehot) const;

  // Zero head weights, gamma bias 1, beta bias 0.
  void set_identity_modulation();

  std::vector<nn::Dense>& trunk() { return trunk_; }
  const std::vector<nn::Dense>& trunk() const { return trunk_; }
  nn::ParamList parameters();
  std::vector<const nn::Parameter*> parameters() const;
  const NetConfig& config() const { return cfg_; }

 private:
  NetConfig cfg_;
  std::size_t num_classes_ = 0;
  std::vector<nn::Dense> trunk_;
  std::vector<nn::Dense> gamma_heads_;
  std::vector<nn::Dense> beta_heads_;
};

enum class PriorMode { fixed_standard, learned };

struct PriorSample {
  Posterior gaussian;  // per-row prior parameters
  Matrix z;
};

class PriorGenerator {
 public:
  PriorGenerator() = default;
  PriorGenerator(std::size_t latent_dim, PriorMode mode, const NetConfig& cfg, Rng& init_rng);

  PriorMode mode() const { return mode_; }
  std::size_t latent_dim() const { return latent_dim_; }

  // Fixed mode returns N(0, I) parameters and z = noise. Learned mode maps the
  // noise through the network and reparameterizes with eps.
  PriorSample sample(const Matrix& noise, const Matrix& eps, Mode mode = Mode::eval,
                     Rng* rng = nullptr, nn::Mlp::Trace* trace = nullptr) const;
  // Backprop dL/dz (and optional direct parameter gradients) into the network.
  void backward(const nn::Mlp::Trace& trace, const PriorSample& s, const Matrix& eps,
                const Matrix& dz, const Matrix* dmean = nullptr, const Matrix* dlogvar = nullptr);

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  PriorMode mode_ = PriorMode::fixed_standard;
  std::size_t latent_dim_ = 0;
  nn::Mlp net_;
};

class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::size_t input_dim, const NetConfig& cfg, Rng& init_rng);

  std::size_t input_dim() const { return net_.spec().input_dim; }

  // batch x 1 logits
  Matrix logits(const Matrix& x, Mode mode = Mode::eval, Rng* rng = nullptr,
                nn::Mlp::Trace* trace = nullptr) const;
  // Sigmoid scores, one per row, strictly inside (0, 1) for finite logits.
  std::vector<float> discriminate(const Matrix& x) const;
  Matrix backward(const nn::Mlp::Trace& trace, const Matrix& dlogits) {
    return net_.backward(trace, dlogits);
  }

  nn::Mlp& net() { return net_; }
  const nn::Mlp& net() const { return net_; }

 private:
  nn::Mlp net_;
};

}  // namespace pf::models
