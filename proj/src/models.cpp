#include "pf/models.hpp"

#include <algorithm>
#include <cmath>

namespace pf::models {

namespace {

float clamp_logvar(float v) { return std::clamp(v, -kMaxLogVar, kMaxLogVar); }

nn::MlpSpec make_spec(std::size_t in, std::size_t out, const NetConfig& cfg) {
  nn::MlpSpec spec;
  spec.input_dim = in;
  spec.hidden = cfg.hidden;
  spec.output_dim = out;
  spec.activation = cfg.activation;
  spec.dropout = cfg.dropout;
  return spec;
}

void split_gaussian_head(const Matrix& out, std::size_t d, Posterior& p) {
  p.mean = Matrix(out.rows(), d);
  p.logvar = Matrix(out.rows(), d);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    const auto o = out.row(r);
    std::copy(o.begin(), o.begin() + static_cast<std::ptrdiff_t>(d), p.mean.row(r).begin());
    std::copy(o.begin() + static_cast<std::ptrdiff_t>(d), o.end(), p.logvar.row(r).begin());
  }
}

Matrix join_gaussian_grad(const Matrix& dmean, const Matrix& dlogvar) {
  return hconcat(dmean, dlogvar);
}

}  // namespace

float Posterior::variance(std::size_t r, std::size_t c) const {
  return std::exp(clamp_logvar(logvar(r, c)));
}

info::GaussianDiag Posterior::row(std::size_t r) const {
  std::vector<double> m(dim()), v(dim());
  for (std::size_t c = 0; c < dim(); ++c) {
    m[c] = mean(r, c);
    v[c] = std::exp(static_cast<double>(clamp_logvar(logvar(r, c))));
  }
  return info::GaussianDiag(std::move(m), std::move(v));
}

LatentSample reparameterize(const info::GaussianDiag& g, std::span<const double> eps) {
  if (eps.size() != g.dim()) throw ValidationError("reparameterize: eps dimension mismatch");
  LatentSample out;
  out.z.resize(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i)
    out.z[i] = g.mean()[i] + std::sqrt(g.variance()[i]) * eps[i];
  return out;
}

ReparamGrad reparameterize_backward(const info::GaussianDiag& g, std::span<const double> eps,
                                    std::span<const double> dz) {
  if (eps.size() != g.dim() || dz.size() != g.dim())
    throw ValidationError("reparameterize_backward: dimension mismatch");
  ReparamGrad out;
  out.mean.assign(dz.begin(), dz.end());
  out.stddev.resize(g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i) out.stddev[i] = dz[i] * eps[i];
  return out;
}

Matrix reparameterize(const Posterior& p, const Matrix& eps) {
  if (!eps.same_shape(p.mean)) throw ValidationError("reparameterize: eps shape mismatch");
  Matrix z(p.batch(), p.dim());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const float sd = std::exp(0.5f * clamp_logvar(p.logvar.flat()[k]));
    z.flat()[k] = p.mean.flat()[k] + sd * eps.flat()[k];
  }
  return z;
}

void reparameterize_backward(const Posterior& p, const Matrix& eps, const Matrix& dz,
                             Matrix& dmean, Matrix& dlogvar) {
  for (std::size_t k = 0; k < dz.size(); ++k) {
    const float sd = std::exp(0.5f * clamp_logvar(p.logvar.flat()[k]));
    dmean.flat()[k] += dz.flat()[k];
    dlogvar.flat()[k] += dz.flat()[k] * eps.flat()[k] * 0.5f * sd;
  }
}

LatentSample inject_latent_noise(const LatentSample& z, bool enabled, Rng& rng) {
  if (!enabled) return z;
  LatentSample out = z;
  const double sd = std::sqrt(info::kUnitEntropyNoiseVariance);
  for (double& v : out.z) v += rng.normal() * sd;
  return out;
}

void inject_latent_noise(Matrix& z, bool enabled, Rng& rng) {
  if (!enabled) return;
  const double sd = std::sqrt(info::kUnitEntropyNoiseVariance);
  for (float& v : z.flat()) v += static_cast<float>(rng.normal() * sd);
}

Matrix sigmoid(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t k = 0; k < logits.size(); ++k)
    out.flat()[k] = static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(logits.flat()[k]))));
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto l = logits.row(r);
    auto o = out.row(r);
    const float peak = *std::max_element(l.begin(), l.end());
    double total = 0.0;
    for (std::size_t c = 0; c < l.size(); ++c) total += std::exp(static_cast<double>(l[c] - peak));
    for (std::size_t c = 0; c < l.size(); ++c)
      o[c] = static_cast<float>(std::exp(static_cast<double>(l[c] - peak)) / total);
  }
  return out;
}

// ---------------------------------------------------------------------------

Encoder::Encoder(std::size_t input_dim, std::size_t latent_dim, const NetConfig& cfg, Rng& init_rng)
    : latent_dim_(latent_dim), net_(make_spec(input_dim, 2 * latent_dim, cfg), init_rng) {}

Posterior Encoder::forward(const Matrix& x, Mode mode, Rng* rng, nn::Mlp::Trace* trace) const {
  Posterior p;
  split_gaussian_head(net_.forward(x, mode, rng, trace), latent_dim_, p);
  return p;
}

Matrix Encoder::backward(const nn::Mlp::Trace& trace, const Matrix& dmean, const Matrix& dlogvar) {
  return net_.backward(trace, join_gaussian_grad(dmean, dlogvar));
}

info::GaussianDiag Encoder::encode(std::span<const float> x) const {
  Matrix in(1, x.size(), std::vector<float>(x.begin(), x.end()));
  return forward(in).row(0);
}

UtilityDecoder::UtilityDecoder(std::size_t latent_dim, std::size_t output_dim, const NetConfig& cfg,
                               Rng& init_rng)
    : net_(make_spec(latent_dim, output_dim, cfg), init_rng) {}

Matrix UtilityDecoder::forward(const Matrix& z, Mode mode, Rng* rng, nn::Mlp::Trace* trace) const {
  return net_.forward(z, mode, rng, trace);
}

SensitiveClassifier::SensitiveClassifier(std::size_t latent_dim, std::size_t num_classes,
                                         const NetConfig& cfg, Rng& init_rng)
    : net_(make_spec(latent_dim, num_classes, cfg), init_rng) {
  if (num_classes < 2) throw ValidationError("classifier: need at least two classes");
}

Matrix SensitiveClassifier::logits(const Matrix& z, Mode mode, Rng* rng,
                                   nn::Mlp::Trace* trace) const {
  return net_.forward(z, mode, rng, trace);
}

// ---------------------------------------------------------------------------

FilmGenerator::FilmGenerator(std::size_t latent_dim, std::size_t num_classes,
                             std::size_t output_dim, const NetConfig& cfg, Rng& init_rng)
    : cfg_(cfg), num_classes_(num_classes) {
  make_spec(latent_dim, output_dim, cfg).validate();
  if (num_classes < 1) throw ValidationError("film: need at least one class");
  std::size_t in = latent_dim;
  for (std::size_t h : cfg.hidden) {
    trunk_.emplace_back(in, h);
    gamma_heads_.emplace_back(num_classes, h);
    beta_heads_.emplace_back(num_classes, h);
    in = h;
  }
  trunk_.emplace_back(in, output_dim);
  for (auto& l : trunk_) l.init_xavier(init_rng);
  for (std::size_t i = 0; i < gamma_heads_.size(); ++i) {
    gamma_heads_[i].init_xavier(init_rng);
    beta_heads_[i].init_xavier(init_rng);
    gamma_heads_[i].bias().value.fill(1.0f);
  }
}

namespace {

void require_one_hot(const Matrix& s, std::size_t classes) {
  if (s.cols() != classes) throw ValidationError("film: one-hot width differs from class count");
  for (std::size_t r = 0; r < s.rows(); ++r) {
    int ones = 0;
    for (float v : s.row(r)) {
      if (v == 1.0f) ++ones;
      else if (v != 0.0f) throw ValidationError("film: attribute row is not one-hot");
    }
    if (ones != 1) throw ValidationError("film: attribute row is not one-hot");
  }
}

}  // namespace

Matrix FilmGenerator::forward(const Matrix& z, const Matrix& s_onehot, Mode mode, Rng* rng,
                              Trace* trace) const {
  require_one_hot(s_onehot, num_classes_);
  if (z.rows() != s_onehot.rows()) throw ValidationError("film: batch sizes of z and s differ");
  const bool drop = mode == Mode::train && cfg_.dropout > 0.0;
  if (drop && rng == nullptr) throw ValidationError("film: train-mode dropout needs an rng");
  if (trace) {
    *trace = Trace{};
    trace->s_onehot = s_onehot;
  }

  Matrix h = z;
  for (std::size_t i = 0; i < trunk_.size(); ++i) {
    if (trace) trace->inputs.push_back(h);
    Matrix pre = trunk_[i].forward(h);
    if (i + 1 == trunk_.size()) return pre;

    Matrix post(pre.rows(), pre.cols());
    nn::activate<float>(cfg_.activation, pre.flat(), post.flat());
    const Matrix gamma = gamma_heads_[i].forward(s_onehot);
    const Matrix beta = beta_heads_[i].forward(s_onehot);
    Matrix out(post.rows(), post.cols());
    for (std::size_t k = 0; k < out.size(); ++k)
      out.flat()[k] = gamma.flat()[k] * post.flat()[k] + beta.flat()[k];
    if (drop) {
      Matrix mask = nn::dropout_mask<float>(out.rows(), out.cols(), cfg_.dropout, *rng);
      for (std::size_t k = 0; k < out.size(); ++k) out.flat()[k] *= mask.flat()[k];
      if (trace) trace->masks.push_back(std::move(mask));
    }
    if (trace) {
      trace->pre.push_back(std::move(pre));
      trace->post.push_back(std::move(post));
      trace->gamma.push_back(gamma);
    }
    h = std::move(out);
  }
  return h;
}

Matrix FilmGenerator::backward(const Trace& trace, const Matrix& dy) {
  if (trace.inputs.size() != trunk_.size()) throw ValidationError("film: backward without a forward trace");
  Matrix d = dy;
  for (std::size_t i = trunk_.size(); i-- > 0;) {
    if (i + 1 < trunk_.size()) {
      if (!trace.masks.empty())
        for (std::size_t k = 0; k < d.size(); ++k) d.flat()[k] *= trace.masks[i].flat()[k];
      const Matrix& post = trace.post[i];
      const Matrix& gamma = trace.gamma[i];
      // d is dL/d(modulated); beta's gradient is d itself.
      beta_heads_[i].backward(trace.s_onehot, d, false);
      Matrix dgamma(d.rows(), d.cols());
      for (std::size_t k = 0; k < d.size(); ++k) {
        dgamma.flat()[k] = d.flat()[k] * post.flat()[k];
        d.flat()[k] *= gamma.flat()[k];
      }
      gamma_heads_[i].backward(trace.s_onehot, dgamma, false);
      nn::activation_backward<float>(cfg_.activation, trace.pre[i].flat(), post.flat(), d.flat());
    }
    d = trunk_[i].backward(trace.inputs[i], d, true);
  }
  return d;
}

FiLMParams FilmGenerator::film_params(std::span<const float> s_onehot) const {
  Matrix s(1, s_onehot.size(), std::vector<float>(s_onehot.begin(), s_onehot.end()));
  require_one_hot(s, num_classes_);
  FiLMParams out;
  for (std::size_t i = 0; i < gamma_heads_.size(); ++i) {
    const Matrix g = gamma_heads_[i].forward(s);
    const Matrix b = beta_heads_[i].forward(s);
    out.gamma.emplace_back(g.flat().begin(), g.flat().end());
    out.beta.emplace_back(b.flat().begin(), b.flat().end());
  }
  return out;
}

void FilmGenerator::set_identity_modulation() {
  for (std::size_t i = 0; i < gamma_heads_.size(); ++i) {
    gamma_heads_[i].weight().value.fill(0.0f);
    gamma_heads_[i].bias().value.fill(1.0f);
    beta_heads_[i].weight().value.fill(0.0f);
    beta_heads_[i].bias().value.fill(0.0f);
  }
}

nn::ParamList FilmGenerator::parameters() {
  nn::ParamList out;
  for (auto& l : trunk_) {
    out.push_back(&l.weight());
    out.push_back(&l.bias());
  }
  for (std::size_t i = 0; i < gamma_heads_.size(); ++i) {
    out.push_back(&gamma_heads_[i].weight());
    out.push_back(&gamma_heads_[i].bias());
    out.push_back(&beta_heads_[i].weight());
    out.push_back(&beta_heads_[i].bias());
  }
  return out;
}

std::vector<const nn::Parameter*> FilmGenerator::parameters() const {
  std::vector<const nn::Parameter*> out;
  for (nn::Parameter* p : const_cast<FilmGenerator*>(this)->parameters()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------

PriorGenerator::PriorGenerator(std::size_t latent_dim, PriorMode mode, const NetConfig& cfg,
                               Rng& init_rng)
    : mode_(mode), latent_dim_(latent_dim) {
  if (latent_dim == 0) throw ValidationError("prior: latent dimension must be >= 1");
  if (mode_ == PriorMode::learned) net_ = nn::Mlp(make_spec(latent_dim, 2 * latent_dim, cfg), init_rng);
}

PriorSample PriorGenerator::sample(const Matrix& noise, const Matrix& eps, Mode mode, Rng* rng,
                                   nn::Mlp::Trace* trace) const {
  if (noise.cols() != latent_dim_) throw ValidationError("prior: noise dimension mismatch");
  PriorSample out;
  if (mode_ == PriorMode::fixed_standard) {
    out.gaussian.mean = Matrix(noise.rows(), latent_dim_, 0.0f);
    out.gaussian.logvar = Matrix(noise.rows(), latent_dim_, 0.0f);
    out.z = noise;
    return out;
  }
  split_gaussian_head(net_.forward(noise, mode, rng, trace), latent_dim_, out.gaussian);
  out.z = reparameterize(out.gaussian, eps);
  return out;
}

void PriorGenerator::backward(const nn::Mlp::Trace& trace, const PriorSample& s, const Matrix& eps,
                              const Matrix& dz, const Matrix* dmean, const Matrix* dlogvar) {
  if (mode_ == PriorMode::fixed_standard) return;
  Matrix gm = dmean ? *dmean : Matrix(dz.rows(), latent_dim_);
  Matrix gl = dlogvar ? *dlogvar : Matrix(dz.rows(), latent_dim_);
  reparameterize_backward(s.gaussian, eps, dz, gm, gl);
  net_.backward(trace, join_gaussian_grad(gm, gl));
}

Discriminator::Discriminator(std::size_t input_dim, const NetConfig& cfg, Rng& init_rng)
    : net_(make_spec(input_dim, 1, cfg), init_rng) {}

Matrix Discriminator::logits(const Matrix& x, Mode mode, Rng* rng, nn::Mlp::Trace* trace) const {
  return net_.forward(x, mode, rng, trace);
}

std::vector<float> Discriminator::discriminate(const Matrix& x) const {
  const Matrix s = sigmoid(logits(x));
  std::vector<float> out(s.flat().begin(), s.flat().end());
  for (float& v : out) v = std::clamp(v, 1e-7f, 1.0f - 1e-7f);
  return out;
}

}  // namespace pf::models
