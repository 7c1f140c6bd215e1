#include "pf/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <ostream>

namespace pf::training {

using models::Mode;
using models::PriorMode;
using objectives::bce_with_logits;

ModelKind parse_model_kind(std::string_view name) {
  if (name == "dispf") return ModelKind::dispf;
  if (name == "genpf") return ModelKind::genpf;
  throw ValidationError("unknown model: " + std::string(name) + " (expected dispf or genpf)");
}

std::string_view model_kind_name(ModelKind k) { return k == ModelKind::dispf ? "dispf" : "genpf"; }

PriorMode parse_prior_mode(std::string_view name) {
  if (name == "fixed" || name == "fixed_standard") return PriorMode::fixed_standard;
  if (name == "learned") return PriorMode::learned;
  throw ValidationError("unknown prior mode: " + std::string(name) + " (expected fixed or learned)");
}

std::string_view prior_mode_name(PriorMode m) { return m == PriorMode::learned ? "learned" : "fixed"; }

XiStep1 parse_xi_step1(std::string_view name) {
  if (name == "adversarial") return XiStep1::adversarial;
  if (name == "displayed") return XiStep1::displayed;
  throw ValidationError("unknown xi step-1 mode: " + std::string(name));
}

std::string_view xi_step1_name(XiStep1 m) { return m == XiStep1::adversarial ? "adversarial" : "displayed"; }

void TrainConfig::validate() const {
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (latent_dim < 1) throw ValidationError("latent dim must be >= 1");
  if (!(alpha_start >= 0.0)) throw ValidationError("alpha_start must be >= 0");
  if (!(alpha_end >= alpha_start)) throw ValidationError("alpha_end must be >= alpha_start");
  if (!(linear_increment >= 0.0)) throw ValidationError("linear_increment must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("dropout must be in [0, 1)");
  if (!(grad_clip > 0.0)) throw ValidationError("grad_clip must be positive");
  if (!(default_lr > 0.0)) throw ValidationError("learning rates must be positive");
  for (const auto& [g, v] : learning_rates) {
    if (std::find(kGroups.begin(), kGroups.end(), g) == kGroups.end())
      throw ValidationError("unknown parameter group in learning_rates: " + g);
    if (!(v > 0.0)) throw ValidationError("learning rate for " + g + " must be positive");
  }
  for (std::size_t h : hidden)
    if (h == 0) throw ValidationError("hidden widths must be >= 1");
}

double TrainConfig::lr(const std::string& group) const {
  const auto it = learning_rates.find(group);
  return it == learning_rates.end() ? default_lr : it->second;
}

AlphaSchedule TrainConfig::schedule() const {
  AlphaSchedule s;
  s.num_epochs = std::max(epochs - 1, 0);
  s.alpha_start = alpha_start;
  s.alpha_end = alpha_end;
  s.linear_increment = linear_increment;
  return s;
}

models::NetConfig TrainConfig::net_config() const {
  models::NetConfig n;
  n.hidden = hidden;
  n.activation = activation;
  n.dropout = dropout;
  return n;
}

FunnelModel FunnelModel::create(ModelKind kind, std::size_t input_dim, std::size_t latent_dim,
                                std::size_t num_sensitive, const models::NetConfig& net,
                                PriorMode prior_mode, objectives::Distortion dis, bool noise_enabled,
                                std::uint64_t seed) {
  if (input_dim == 0) throw ValidationError("funnel: input dimension must be >= 1");
  if (num_sensitive < 2) throw ValidationError("funnel: sensitive attribute needs at least 2 classes");
  FunnelModel m;
  m.kind = kind;
  m.input_dim = input_dim;
  m.latent_dim = latent_dim;
  m.num_sensitive = num_sensitive;
  m.net = net;
  m.prior_mode = prior_mode;
  m.dis_mode = dis;
  m.noise_enabled = noise_enabled;

  Rng init(derive_seed(seed, "init"));
  models::NetConfig disc = net;
  disc.activation = nn::Activation::leaky_relu;
  m.encoder = models::Encoder(input_dim, latent_dim, net, init);
  m.decoder = models::UtilityDecoder(latent_dim, input_dim, net, init);
  if (kind == ModelKind::dispf) m.classifier = models::SensitiveClassifier(latent_dim, num_sensitive, net, init);
  else m.film = models::FilmGenerator(latent_dim, num_sensitive, input_dim, net, init);
  m.prior = models::PriorGenerator(latent_dim, prior_mode, net, init);
  m.d_eta = models::Discriminator(latent_dim, disc, init);
  m.d_omega = models::Discriminator(input_dim, disc, init);
  if (kind == ModelKind::dispf) m.d_tau = models::Discriminator(num_sensitive, disc, init);
  return m;
}

std::vector<std::string> FunnelModel::network_names() const {
  std::vector<std::string> out{"encoder", "decoder"};
  out.push_back(kind == ModelKind::dispf ? "classifier" : "film");
  if (prior_mode == PriorMode::learned) out.push_back("prior");
  out.push_back("d_eta");
  out.push_back("d_omega");
  if (kind == ModelKind::dispf) out.push_back("d_tau");
  return out;
}

nn::ParamList FunnelModel::network(const std::string& name) {
  if (name == "encoder") return encoder.net().parameters();
  if (name == "decoder") return decoder.net().parameters();
  if (name == "classifier" && kind == ModelKind::dispf) return classifier.net().parameters();
  if (name == "film" && kind == ModelKind::genpf) return film.parameters();
  if (name == "prior") return prior_mode == PriorMode::learned ? prior.net().parameters() : nn::ParamList{};
  if (name == "d_eta") return d_eta.net().parameters();
  if (name == "d_omega") return d_omega.net().parameters();
  if (name == "d_tau" && kind == ModelKind::dispf) return d_tau.net().parameters();
  throw ValidationError("funnel has no network named " + name);
}

std::vector<const nn::Parameter*> FunnelModel::network(const std::string& name) const {
  auto params = const_cast<FunnelModel*>(this)->network(name);
  return {params.begin(), params.end()};
}

namespace {
const char* group_network(const std::string& group, ModelKind kind) {
  if (group == "phi") return "encoder";
  if (group == "theta") return "decoder";
  if (group == "xi") return kind == ModelKind::dispf ? "classifier" : "film";
  if (group == "psi") return "prior";
  if (group == "eta") return "d_eta";
  if (group == "omega") return "d_omega";
  if (group == "tau") return "d_tau";
  throw ValidationError("unknown parameter group: " + group);
}
}  // namespace

nn::ParamList FunnelModel::group(const std::string& name) {
  if (name == "tau" && kind == ModelKind::genpf) return {};
  return network(group_network(name, kind));
}

std::vector<const nn::Parameter*> FunnelModel::group(const std::string& name) const {
  auto params = const_cast<FunnelModel*>(this)->group(name);
  return {params.begin(), params.end()};
}

std::uint64_t FunnelModel::group_hash(const std::string& name) const { return nn::hash_values(group(name)); }

Matrix FunnelModel::release(const Matrix& x, Rng& rng) const {
  const models::Posterior post = encoder.forward(x);
  Matrix eps(post.batch(), post.dim());
  rng.fill_normal(eps.flat());
  Matrix z = models::reparameterize(post, eps);
  models::inject_latent_noise(z, noise_enabled, rng);
  return z;
}

Matrix FunnelModel::posterior_mean(const Matrix& x) const { return encoder.forward(x).mean; }

Matrix FunnelModel::generate(int s, std::size_t n, Rng& rng) const {
  if (kind != ModelKind::genpf) throw ValidationError("generate: only GenPF funnels have a conditional generator");
  if (s < 0 || static_cast<std::size_t>(s) >= num_sensitive)
    throw ValidationError("generate: attribute " + std::to_string(s) + " out of range");
  Matrix noise(n, latent_dim), eps(n, latent_dim), onehot(n, num_sensitive);
  rng.fill_normal(noise.flat());
  rng.fill_normal(eps.flat());
  for (std::size_t r = 0; r < n; ++r) onehot(r, static_cast<std::size_t>(s)) = 1.0f;
  const Matrix out = film.forward(prior.sample(noise, eps).z, onehot);
  return dis_mode == objectives::Distortion::bernoulli ? models::sigmoid(out) : out;
}

namespace {

Matrix normal_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  Matrix m(rows, cols);
  rng.fill_normal(m.flat());
  return m;
}

void add_into(Matrix& dst, const Matrix& src) {
  for (std::size_t k = 0; k < dst.size(); ++k) dst.flat()[k] += src.flat()[k];
}

void negate(const nn::ParamList& params) {
  for (nn::Parameter* p : params)
    for (float& g : p->grad.flat()) g = -g;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const data::LabeledDataset& ds, const TrainHooks& hooks, ModelKind kind)
      : cfg_(cfg), ds_(ds), hooks_(hooks), rng_(derive_seed(cfg.seed, "train")),
        shuffle_rng_(derive_seed(cfg.seed, "shuffle")) {
    cfg_.validate();
    if (ds_.size() == 0) throw ValidationError("training: dataset is empty");
    ds_.validate();
    if (cfg_.epochs > 0 && ds_.size() < cfg_.batch_size)
      throw ValidationError("training: dataset has " + std::to_string(ds_.size()) +
                            " rows, fewer than one batch of " + std::to_string(cfg_.batch_size));
    model_ = FunnelModel::create(kind, ds_.dim(), cfg_.latent_dim, ds_.num_sensitive, cfg_.net_config(),
                                 cfg_.prior_mode, cfg_.dis_mode, cfg_.noise_enabled, cfg_.seed);
    s_marginal_.assign(ds_.num_sensitive, 0.0);
    for (int v : ds_.sensitive) s_marginal_[static_cast<std::size_t>(v)] += 1.0 / static_cast<double>(ds_.size());
    for (const std::string& g : kGroups) {
      nn::ParamList params = model_.group(g);
      if (g == "psi" && cfg_.prior_mode == PriorMode::fixed_standard) params.clear();
      if (!params.empty()) opt_.emplace(g, nn::Adam(std::move(params), {.learning_rate = cfg_.lr(g)}));
    }
  }

  ModuleBundle run() {
    if (hooks_.metrics_csv) *hooks_.metrics_csv << kMetricsHeader << "\n";
    const AlphaSchedule sched = cfg_.schedule();
    const std::size_t per_epoch = ds_.size() / cfg_.batch_size;
    double alpha = alpha_at(sched, 0);
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      alpha = alpha_at(sched, epoch);
      const auto perm = shuffle_rng_.permutation(ds_.size());
      for (std::size_t b = 0; b < per_epoch; ++b) {
        std::span<const std::size_t> rows(perm.data() + b * cfg_.batch_size, cfg_.batch_size);
        batch_x_ = gather_rows(ds_.features, rows);
        batch_s_.clear();
        for (std::size_t r : rows) batch_s_.push_back(ds_.sensitive[r]);
        batch_onehot_ = one_hot(batch_s_, ds_.num_sensitive);
        ++iteration_;
        iterate(alpha);
      }
      if (hooks_.log)
        *hooks_.log << model_kind_name(model_.kind) << " epoch " << epoch + 1 << "/" << cfg_.epochs
                    << " alpha " << fmt(alpha) << " rec " << fmt(last_.step1.reconstruction) << " leak "
                    << fmt(last_.leakage_term) << std::endl;
    }
    return bundle(cfg_.epochs > 0 ? alpha_at(sched, sched.num_epochs) : cfg_.alpha_start);
  }

 private:
  bool dispf() const { return model_.kind == ModelKind::dispf; }
  bool learned_prior() const { return cfg_.prior_mode == PriorMode::learned; }

  void zero(std::initializer_list<const char*> groups) {
    for (const char* g : groups) nn::zero_grad(model_.group(g));
  }

  void check(double v, int step, const char* what) const {
    if (!std::isfinite(v))
      throw NumericError(std::string("non-finite ") + what + " in step " + std::to_string(step) +
                             " at iteration " + std::to_string(iteration_),
                         step, iteration_);
  }

  // Clips and applies the Adam update for each listed group, then reports.
  void finish_step(int step, std::vector<std::string> groups, double loss) {
    check(loss, step, "loss");
    StepEvent ev;
    ev.iteration = iteration_;
    ev.step = step;
    ev.loss = loss;
    for (const std::string& g : groups) {
      auto it = opt_.find(g);
      if (it == opt_.end()) continue;
      const nn::ParamList& params = it->second.params();
      if (!nn::grads_finite(params))
        throw NumericError("non-finite gradient for group " + g + " in step " + std::to_string(step) +
                               " at iteration " + std::to_string(iteration_),
                           step, iteration_);
      ev.grad_norms[g] = nn::clip_grad_norm(params, cfg_.grad_clip);
      it->second.step();
      ev.groups.push_back(g);
    }
    if (hooks_.on_step) hooks_.on_step(ev, model_);
  }

  void skip_step(int step) {
    if (hooks_.on_step) {
      StepEvent ev;
      ev.iteration = iteration_;
      ev.step = step;
      ev.skipped = true;
      hooks_.on_step(ev, model_);
    }
  }

  // Network output -> data space (pixel probabilities or the vector itself).
  Matrix to_data(const Matrix& out) const {
    return cfg_.dis_mode == objectives::Distortion::bernoulli ? models::sigmoid(out) : out;
  }
  Matrix to_data_backward(const Matrix& data, const Matrix& ddata) const {
    if (cfg_.dis_mode != objectives::Distortion::bernoulli) return ddata;
    Matrix d(ddata.rows(), ddata.cols());
    for (std::size_t k = 0; k < d.size(); ++k) {
      const float p = data.flat()[k];
      d.flat()[k] = ddata.flat()[k] * p * (1.0f - p);
    }
    return d;
  }

  static Matrix softmax_backward(const Matrix& p, const Matrix& dp) {
    Matrix d(p.rows(), p.cols());
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < p.cols(); ++c) dot += static_cast<double>(p(r, c)) * dp(r, c);
      for (std::size_t c = 0; c < p.cols(); ++c)
        d(r, c) = static_cast<float>(p(r, c) * (dp(r, c) - dot));
    }
    return d;
  }

  // A prior sample in train mode, with trace for backprop when learned.
  struct PriorDraw {
    Matrix eps;
    models::PriorSample sample;
    nn::Mlp::Trace trace;
  };
  PriorDraw draw_prior(std::size_t m, bool with_trace) {
    PriorDraw d;
    const Matrix noise = normal_matrix(m, cfg_.latent_dim, rng_);
    d.eps = normal_matrix(m, cfg_.latent_dim, rng_);
    d.sample = model_.prior.sample(noise, d.eps, Mode::train, &rng_, with_trace ? &d.trace : nullptr);
    return d;
  }

  void backprop_prior(PriorDraw& d, const Matrix& dz) {
    if (learned_prior()) model_.prior.backward(d.trace, d.sample, d.eps, dz);
  }

  void iterate(double alpha) {
    const std::size_t m = batch_x_.rows();
    IterationMetrics met;
    met.iteration = iteration_;
    met.alpha = alpha;

    // Step 1
    Matrix z_enc = dispf() ? step1_dispf(alpha, met) : step1_genpf(alpha, met);

    // Steps 2 and 3: latent-space density-ratio matching against the prior.
    // GenPF with the fixed prior has the closed-form KL instead.
    if (learned_prior() || dispf()) {
      met.d_eta = step2(z_enc, alpha);
      step3(alpha);
    } else {
      skip_step(2);
      skip_step(3);
    }

    // Step 4: data-space discriminator on real x vs decoded prior samples.
    {
      zero({"omega"});
      const PriorDraw pd = draw_prior(m, false);
      const Matrix fake = to_data(model_.decoder.forward(pd.sample.z));
      met.d_omega = train_discriminator(model_.d_omega, batch_x_, fake);
      finish_step(4, {"omega"}, met.d_omega);
    }

    step5(m, alpha);

    // Step 6
    if (dispf()) {
      zero({"tau"});
      const PriorDraw pd = draw_prior(m, false);
      const Matrix fake = models::softmax_rows(model_.classifier.logits(pd.sample.z));
      met.d_tau = train_discriminator(model_.d_tau, batch_onehot_, fake);
      finish_step(6, {"tau"}, *met.d_tau);
    } else {
      zero({"omega"});
      const PriorDraw pd = draw_prior(m, false);
      const Matrix fake = to_data(model_.film.forward(pd.sample.z, batch_onehot_));
      const double loss = train_discriminator(model_.d_omega, batch_x_, fake);
      finish_step(6, {"omega"}, loss);
    }

    last_ = met;
    if (hooks_.on_iteration) hooks_.on_iteration(met);
    if (hooks_.metrics_csv) {
      *hooks_.metrics_csv << iteration_ << ',' << fmt(alpha) << ',' << fmt(met.step1.total) << ','
                          << fmt(met.step1.reconstruction) << ',' << fmt(met.leakage_term) << ','
                          << (met.d_eta ? fmt(*met.d_eta) : "") << ',' << fmt(met.d_omega) << ','
                          << (met.d_tau ? fmt(*met.d_tau) : "") << '\n';
    }
  }

  // Encoder forward + reparameterization + latent noise, with trace.
  struct EncodePass {
    nn::Mlp::Trace trace;
    models::Posterior post;
    Matrix eps;
    Matrix z;  // without latent noise
  };
  EncodePass encode_pass() {
    EncodePass e;
    e.post = model_.encoder.forward(batch_x_, Mode::train, &rng_, &e.trace);
    e.eps = normal_matrix(e.post.batch(), e.post.dim(), rng_);
    e.z = models::reparameterize(e.post, e.eps);
    return e;
  }

  void backprop_encoder(EncodePass& e, const Matrix& dz, Matrix dmean, Matrix dlogvar) {
    models::reparameterize_backward(e.post, e.eps, dz, dmean, dlogvar);
    model_.encoder.backward(e.trace, dmean, dlogvar);
  }

  Matrix step1_dispf(double alpha, IterationMetrics& met) {
    zero({"phi", "theta", "xi"});
    EncodePass e = encode_pass();
    Matrix z = e.z;
    models::inject_latent_noise(z, cfg_.noise_enabled, rng_);

    nn::Mlp::Trace td, tc;
    const Matrix out = model_.decoder.forward(z, Mode::train, &rng_, &td);
    Matrix dout(out.rows(), out.cols());
    const double rec = objectives::distortion_grad(cfg_.dis_mode, batch_x_, out, &dout);

    const Matrix logits = model_.classifier.logits(z, Mode::train, &rng_, &tc);
    Matrix dlogits(logits.rows(), logits.cols());
    bool clamped = false;
    const double ll = objectives::mean_log_likelihood(logits, batch_s_, &dlogits, alpha, &clamped);

    Matrix dz = model_.decoder.backward(td, dout);
    Matrix dz_leak = model_.classifier.backward(tc, dlogits);
    // The encoder only pushes down rows where the classifier puts more mass on
    // the true label than its marginal does. Pushing further would reward a
    // confidently wrong classifier, which still leaks. Rows of dz depend only
    // on the same rows of dlogits, so masking dz masks the loss.
    const Matrix q = models::softmax_rows(logits);
    for (std::size_t r = 0; r < q.rows(); ++r) {
      const auto s = static_cast<std::size_t>(batch_s_[r]);
      if (q(r, s) <= s_marginal_[s]) std::fill(dz_leak.row(r).begin(), dz_leak.row(r).end(), 0.0f);
    }
    add_into(dz, dz_leak);
    if (cfg_.xi_step1 == XiStep1::adversarial) negate(model_.group("xi"));
    backprop_encoder(e, dz, Matrix(dz.rows(), dz.cols()), Matrix(dz.rows(), dz.cols()));

    met.step1 = objectives::p1_step1_loss(rec, 1.0, alpha);
    met.step1.uncertainty_term = ll;
    met.step1.total = rec + alpha * ll;
    met.step1.clamped = clamped;
    met.leakage_term = ll;
    finish_step(1, {"phi", "theta", "xi"}, met.step1.total);
    return e.z;
  }

  Matrix step1_genpf(double alpha, IterationMetrics& met) {
    zero({"phi", "theta", "xi"});
    EncodePass e = encode_pass();
    Matrix z = e.z;
    models::inject_latent_noise(z, cfg_.noise_enabled, rng_);
    const std::size_t m = z.rows();

    nn::Mlp::Trace td;
    const Matrix out = model_.decoder.forward(z, Mode::train, &rng_, &td);
    Matrix dout(out.rows(), out.cols());
    const double rec = objectives::distortion_grad(cfg_.dis_mode, batch_x_, out, &dout);

    models::FilmGenerator::Trace tf;
    const Matrix tilde = model_.film.forward(z, batch_onehot_, Mode::train, &rng_, &tf);
    Matrix dtilde(tilde.rows(), tilde.cols());
    const double dis_tilde = objectives::distortion_grad(cfg_.dis_mode, batch_x_, tilde, &dtilde, alpha);

    Matrix dmean(m, cfg_.latent_dim), dlogvar(m, cfg_.latent_dim);
    std::optional<double> kl;
    if (!learned_prior() || cfg_.analytic_kl) {
      models::Posterior prior;
      if (learned_prior()) {
        const Matrix noise = normal_matrix(m, cfg_.latent_dim, rng_);
        prior = model_.prior.sample(noise, Matrix(m, cfg_.latent_dim)).gaussian;
      } else {
        prior.mean = Matrix(m, cfg_.latent_dim);
        prior.logvar = Matrix(m, cfg_.latent_dim);
      }
      kl = objectives::kl_gaussian_batch(e.post, prior, alpha, &dmean, &dlogvar);
    }

    Matrix dz = model_.decoder.backward(td, dout);
    add_into(dz, model_.film.backward(tf, dtilde));
    backprop_encoder(e, dz, std::move(dmean), std::move(dlogvar));

    met.step1 = objectives::p2_step1_loss(rec, kl.value_or(0.0), dis_tilde, alpha);
    if (!kl) met.step1.kl_prior.reset();
    met.leakage_term = kl.value_or(0.0) + dis_tilde;
    finish_step(1, {"phi", "theta", "xi"}, met.step1.total);
    return e.z;
  }

  // Accumulates discriminator gradients for real (label 1) vs fake (label 0),
  // scaled by `weight`; returns the unweighted loss.
  double train_discriminator(models::Discriminator& d, const Matrix& real, const Matrix& fake,
                             double weight = 1.0) {
    nn::Mlp::Trace tr, tf;
    const Matrix lr = d.logits(real, Mode::train, &rng_, &tr);
    const Matrix lf = d.logits(fake, Mode::train, &rng_, &tf);
    Matrix dr(lr.rows(), 1), df(lf.rows(), 1);
    const double loss = bce_with_logits(lr, 1.0f, &dr, weight) + bce_with_logits(lf, 0.0f, &df, weight);
    d.backward(tr, dr);
    d.backward(tf, df);
    return loss;
  }

  double step2(const Matrix& z_enc, double alpha) {
    zero({"eta"});
    const PriorDraw pd = draw_prior(z_enc.rows(), false);
    const double loss = train_discriminator(model_.d_eta, z_enc, pd.sample.z, alpha);
    finish_step(2, {"eta"}, loss);
    return loss;
  }

  void step3(double alpha) {
    zero({"phi", "psi"});
    EncodePass e = encode_pass();
    PriorDraw pd = draw_prior(e.z.rows(), true);

    nn::Mlp::Trace te, tp;
    const Matrix le = model_.d_eta.logits(e.z, Mode::eval, nullptr, &te);
    const Matrix lp = model_.d_eta.logits(pd.sample.z, Mode::eval, nullptr, &tp);
    Matrix dle(le.rows(), 1), dlp(lp.rows(), 1);
    // Each side wants the discriminator to assign it the other side's label.
    const double loss = bce_with_logits(le, 0.0f, &dle, alpha) + bce_with_logits(lp, 1.0f, &dlp, alpha);
    const Matrix dz_enc = model_.d_eta.backward(te, dle);
    const Matrix dz_prior = model_.d_eta.backward(tp, dlp);
    backprop_encoder(e, dz_enc, Matrix(dz_enc.rows(), dz_enc.cols()), Matrix(dz_enc.rows(), dz_enc.cols()));
    backprop_prior(pd, dz_prior);
    finish_step(3, {"phi", "psi"}, loss);
    zero({"eta"});
  }

  void step5(std::size_t m, double alpha) {
    zero({"psi", "theta", "xi"});
    // Data-space terms are put on the per-coordinate scale of the distortion.
    const double data_weight = 1.0 / static_cast<double>(ds_.dim());
    PriorDraw pd = draw_prior(m, true);
    const Matrix& zp = pd.sample.z;
    double loss = 0.0;

    // Utility generations should pass D_omega as real.
    nn::Mlp::Trace td, tw;
    const Matrix out = model_.decoder.forward(zp, Mode::train, &rng_, &td);
    const Matrix gen = to_data(out);
    const Matrix lw = model_.d_omega.logits(gen, Mode::eval, nullptr, &tw);
    Matrix dlw(lw.rows(), 1);
    loss += bce_with_logits(lw, 1.0f, &dlw, data_weight);
    Matrix dz = model_.decoder.backward(td, to_data_backward(gen, model_.d_omega.backward(tw, dlw)));

    if (dispf()) {
      // Classifier outputs on prior samples should look like real one-hot s.
      nn::Mlp::Trace tc, tt;
      const Matrix logits = model_.classifier.logits(zp, Mode::train, &rng_, &tc);
      const Matrix p = models::softmax_rows(logits);
      const Matrix lt = model_.d_tau.logits(p, Mode::eval, nullptr, &tt);
      Matrix dlt(lt.rows(), 1);
      loss += bce_with_logits(lt, 1.0f, &dlt);
      add_into(dz, model_.classifier.backward(tc, softmax_backward(p, model_.d_tau.backward(tt, dlt))));
    } else {
      // Conditional generations should pass D_omega as real too.
      models::FilmGenerator::Trace tf;
      nn::Mlp::Trace tw2;
      const Matrix fout = model_.film.forward(zp, batch_onehot_, Mode::train, &rng_, &tf);
      const Matrix fgen = to_data(fout);
      const Matrix lf = model_.d_omega.logits(fgen, Mode::eval, nullptr, &tw2);
      Matrix dlf(lf.rows(), 1);
      loss += bce_with_logits(lf, 1.0f, &dlf, alpha * data_weight);
      add_into(dz, model_.film.backward(tf, to_data_backward(fgen, model_.d_omega.backward(tw2, dlf))));
    }
    backprop_prior(pd, dz);
    finish_step(5, {"psi", "theta", "xi"}, loss);
    zero({"omega", "tau"});
  }

  ModuleBundle bundle(double final_alpha) {
    ModuleBundle b;
    b.model = std::move(model_);
    b.image = ds_.image;
    BundleMetadata& meta = b.meta;
    meta.dataset_name = cfg_.dataset_name;
    meta.sensitive_attribute = ds_.sensitive_name;
    meta.alpha = final_alpha;
    meta.latent_dim = cfg_.latent_dim;
    meta.backbone = cfg_.backbone;
    meta.loss_function = std::string(objectives::distortion_name(cfg_.dis_mode));
    meta.backbone_trained_dataset =
        cfg_.backbone_trained_dataset.empty() ? cfg_.dataset_name : cfg_.backbone_trained_dataset;
    meta.model_kind = std::string(model_kind_name(b.model.kind));
    meta.seed = cfg_.seed;
    meta.created_at = timestamp_now();
    return b;
  }

  TrainConfig cfg_;
  const data::LabeledDataset& ds_;
  const TrainHooks& hooks_;
  Rng rng_;
  Rng shuffle_rng_;
  FunnelModel model_;
  std::map<std::string, nn::Adam> opt_;
  long iteration_ = 0;
  std::vector<double> s_marginal_;
  Matrix batch_x_;
  std::vector<int> batch_s_;
  Matrix batch_onehot_;
  IterationMetrics last_;
};

}  // namespace

ModuleBundle train_dispf(const TrainConfig& cfg, const data::LabeledDataset& ds, const TrainHooks& hooks) {
  if (cfg.model != ModelKind::dispf) throw ValidationError("train_dispf: config model is not dispf");
  return Trainer(cfg, ds, hooks, ModelKind::dispf).run();
}

ModuleBundle train_genpf(const TrainConfig& cfg, const data::LabeledDataset& ds, const TrainHooks& hooks) {
  if (cfg.model != ModelKind::genpf) throw ValidationError("train_genpf: config model is not genpf");
  return Trainer(cfg, ds, hooks, ModelKind::genpf).run();
}

ModuleBundle train(const TrainConfig& cfg, const data::LabeledDataset& ds, const TrainHooks& hooks) {
  return cfg.model == ModelKind::dispf ? train_dispf(cfg, ds, hooks) : train_genpf(cfg, ds, hooks);
}

std::string timestamp_now() {
  std::time_t t = std::time(nullptr);
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(sde, &end, 10);
    if (end != sde && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace pf::training
