#include "pf/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "pf/mine.hpp"

namespace pf::eval {

double label_entropy(std::span<const int> labels, info::LogBase base) {
  if (labels.empty()) throw ValidationError("label_entropy: empty input");
  std::map<int, double> counts;
  for (int l : labels) counts[l] += 1.0;
  std::vector<double> p;
  for (const auto& [_, c] : counts) p.push_back(c / static_cast<double>(labels.size()));
  return info::shannon_entropy(info::Pmf::from_weights(std::move(p)), base);
}

void LinearClassifier::fit(const Matrix& x, std::span<const int> labels, std::size_t num_classes,
                           const Options& opt) {
  if (x.rows() != labels.size() || x.rows() == 0) throw ValidationError("classifier: bad training data");
  if (num_classes < 1) throw ValidationError("classifier: need at least one class");
  const std::size_t n = x.rows();
  k_ = num_classes;
  d_ = x.cols();
  mean_.assign(d_, 0.0);
  inv_std_.assign(d_, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d_; ++c) mean_[c] += x(r, c);
  for (double& m : mean_) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d_; ++c) {
      const double v = x(r, c) - mean_[c];
      inv_std_[c] += v * v;
    }
  for (double& s : inv_std_) s = 1.0 / std::max(std::sqrt(s / static_cast<double>(n)), 1e-6);

  std::vector<double> xs(n * d_);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d_; ++c) xs[r * d_ + c] = (x(r, c) - mean_[c]) * inv_std_[c];

  w_.assign(k_ * d_, 0.0);
  b_.assign(k_, 0.0);
  std::vector<double> mw(w_.size(), 0.0), vw(w_.size(), 0.0), mb(k_, 0.0), vb(k_, 0.0);
  std::vector<double> gw(w_.size()), gb(k_), logits(k_);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  long t = 0;
  Rng rng(derive_seed(opt.seed, "linear-classifier"));
  const std::size_t bs = std::min(opt.batch_size, n);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const auto perm = rng.permutation(n);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t i = start; i < end; ++i) {
        const double* xi = &xs[perm[i] * d_];
        double mx = -1e300;
        for (std::size_t k = 0; k < k_; ++k) {
          double a = b_[k];
          for (std::size_t c = 0; c < d_; ++c) a += w_[k * d_ + c] * xi[c];
          logits[k] = a;
          mx = std::max(mx, a);
        }
        double z = 0.0;
        for (double& l : logits) z += (l = std::exp(l - mx));
        const auto y = static_cast<std::size_t>(labels[perm[i]]);
        for (std::size_t k = 0; k < k_; ++k) {
          const double g = logits[k] / z - (k == y ? 1.0 : 0.0);
          gb[k] += g;
          for (std::size_t c = 0; c < d_; ++c) gw[k * d_ + c] += g * xi[c];
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      ++t;
      const double step = opt.learning_rate * std::sqrt(1.0 - std::pow(b2, t)) / (1.0 - std::pow(b1, t));
      for (std::size_t j = 0; j < w_.size(); ++j) {
        const double g = gw[j] * inv + opt.l2 * w_[j];
        mw[j] = b1 * mw[j] + (1 - b1) * g;
        vw[j] = b2 * vw[j] + (1 - b2) * g * g;
        w_[j] -= step * mw[j] / (std::sqrt(vw[j]) + eps);
      }
      for (std::size_t k = 0; k < k_; ++k) {
        const double g = gb[k] * inv;
        mb[k] = b1 * mb[k] + (1 - b1) * g;
        vb[k] = b2 * vb[k] + (1 - b2) * g * g;
        b_[k] -= step * mb[k] / (std::sqrt(vb[k]) + eps);
      }
    }
  }
}

std::vector<std::vector<double>> LinearClassifier::predict_proba(const Matrix& x) const {
  if (x.cols() != d_) throw ValidationError("classifier: feature dimension mismatch");
  std::vector<std::vector<double>> out(x.rows(), std::vector<double>(k_));
  std::vector<double> xi(d_);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < d_; ++c) xi[c] = (x(r, c) - mean_[c]) * inv_std_[c];
    auto& p = out[r];
    double mx = -1e300;
    for (std::size_t k = 0; k < k_; ++k) {
      double a = b_[k];
      for (std::size_t c = 0; c < d_; ++c) a += w_[k * d_ + c] * xi[c];
      p[k] = a;
      mx = std::max(mx, a);
    }
    double z = 0.0;
    for (double& v : p) z += (v = std::exp(v - mx));
    for (double& v : p) v /= z;
  }
  return out;
}

std::vector<int> LinearClassifier::predict(const Matrix& x) const {
  std::vector<int> out;
  for (const auto& p : predict_proba(x))
    out.push_back(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw ValidationError("accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

namespace {

std::size_t class_count(std::span<const int> a, std::span<const int> b) {
  int mx = 0;
  for (int v : a) {
    if (v < 0) throw ValidationError("labels must be non-negative");
    mx = std::max(mx, v);
  }
  for (int v : b) {
    if (v < 0) throw ValidationError("labels must be non-negative");
    mx = std::max(mx, v);
  }
  return static_cast<std::size_t>(mx) + 1;
}

}  // namespace

AdversaryResult adversary_accuracy(const Matrix& z_train, std::span<const int> s_train, const Matrix& z_test,
                                   std::span<const int> s_test, std::uint64_t seed,
                                   const LinearClassifier::Options& opt) {
  if (z_train.rows() == 0 || z_test.rows() == 0) throw ValidationError("adversary: empty split");
  if (z_train.rows() != s_train.size() || z_test.rows() != s_test.size())
    throw ValidationError("adversary: label count differs from rows");
  if (z_train.cols() != z_test.cols()) throw ValidationError("adversary: train and test dims differ");
  AdversaryResult res;
  const bool single = std::all_of(s_train.begin(), s_train.end(), [&](int s) { return s == s_train[0]; });
  if (single) {
    res.warning = "adversary: training labels hold a single class; reporting majority-class accuracy";
    std::vector<int> pred(s_test.size(), s_train[0]);
    res.accuracy = accuracy(pred, s_test);
    return res;
  }
  LinearClassifier clf;
  LinearClassifier::Options o = opt;
  o.seed = seed;
  clf.fit(z_train, s_train, class_count(s_train, s_test), o);
  res.accuracy = accuracy(clf.predict(z_test), s_test);
  return res;
}

LeakageMethod parse_leakage_method(std::string_view name) {
  if (name == "mine") return LeakageMethod::mine;
  if (name == "plugin_classifier" || name == "plugin") return LeakageMethod::plugin_classifier;
  throw ValidationError("unknown leakage method: " + std::string(name));
}

double leakage_mi(const Matrix& z, std::span<const int> s, LeakageMethod method, const LeakageOptions& opt) {
  if (z.rows() != s.size() || z.rows() < 4) throw ValidationError("leakage_mi: need at least 4 paired rows");
  if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0))
    throw ValidationError("leakage_mi: train_fraction must be in (0, 1)");
  const double h = label_entropy(s);
  const std::size_t k = class_count(s, {});

  data::LabeledDataset tmp;
  tmp.features = z;
  tmp.sensitive.assign(s.begin(), s.end());
  tmp.num_sensitive = k;
  const double fr[2] = {opt.train_fraction, 1.0 - opt.train_fraction};
  const auto idx = data::split_indices(tmp, fr, derive_seed(opt.seed, "leakage-split"));
  const auto tr = data::subset(tmp, idx[0]);
  const auto te = data::subset(tmp, idx[1]);

  double bits = 0.0;
  if (method == LeakageMethod::plugin_classifier) {
    LinearClassifier clf;
    LinearClassifier::Options o;
    o.seed = derive_seed(opt.seed, "leakage-classifier");
    clf.fit(tr.features, tr.sensitive, k, o);
    const auto probs = clf.predict_proba(te.features);
    double ce = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
      ce -= std::log2(std::max(probs[i][static_cast<std::size_t>(te.sensitive[i])], 1e-12));
    ce /= static_cast<double>(probs.size());
    bits = label_entropy(te.sensitive) - ce;
  } else {
    mine::MineConfig mc;
    mc.dim_x = z.cols();
    mc.dim_y = k;
    mc.hidden_size = opt.mine_hidden;
    mc.batch_size = std::min(opt.mine_batch, tr.size() / 2);
    if (mc.batch_size < 2) throw ValidationError("leakage_mi: too few rows for MINE");
    mc.n_iterations = opt.mine_iterations;
    mc.n_window = std::min<long>(200, opt.mine_iterations);
    mc.seed = derive_seed(opt.seed, "leakage-mine");
    const auto est = mine::train_mine(mc, tr.features, one_hot(tr.sensitive, k));
    bits = info::to_bits(mine::estimate_mi(est, te.features, one_hot(te.sensitive, k), mc.seed));
  }
  return std::clamp(bits, 0.0, h);
}

MineSelfTest mine_self_test(double rho, std::size_t n, mine::MineConfig cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto g = data::sample_correlated_gaussians(rho, n, derive_seed(cfg.seed, "mine-self-test"));
  cfg.dim_x = cfg.dim_y = 1;
  const auto est = mine::train_mine(cfg, g.x, g.y);
  MineSelfTest out;
  out.rho = rho;
  out.analytic_nats = g.analytic_mi;
  out.estimate_nats = est.windowed_mi();
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<double>(a[i]) * b[i];
    aa += static_cast<double>(a[i]) * a[i];
    bb += static_cast<double>(b[i]) * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

VerificationResult verification_at(std::span<const double> genuine, std::span<const double> imposter,
                                   double threshold) {
  if (genuine.empty() || imposter.empty()) throw ValidationError("verification: need genuine and imposter pairs");
  VerificationResult r;
  r.threshold = threshold;
  r.n_genuine = genuine.size();
  r.n_imposter = imposter.size();
  const auto ta = static_cast<std::size_t>(std::count_if(genuine.begin(), genuine.end(), [&](double v) { return v >= threshold; }));
  const auto fa = static_cast<std::size_t>(std::count_if(imposter.begin(), imposter.end(), [&](double v) { return v >= threshold; }));
  r.tmr = static_cast<double>(ta) / static_cast<double>(r.n_genuine);
  r.fmr = static_cast<double>(fa) / static_cast<double>(r.n_imposter);
  r.acc = static_cast<double>(ta + (r.n_imposter - fa)) / static_cast<double>(r.n_genuine + r.n_imposter);
  return r;
}

VerificationResult threshold_for_fmr(std::span<const double> genuine, std::span<const double> imposter,
                                     double target_fmr) {
  if (genuine.empty() || imposter.empty()) throw ValidationError("verification: need genuine and imposter pairs");
  std::vector<double> cand(genuine.begin(), genuine.end());
  cand.insert(cand.end(), imposter.begin(), imposter.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  cand.push_back(std::nextafter(cand.back(), INFINITY));
  std::vector<double> imp(imposter.begin(), imposter.end());
  std::sort(imp.begin(), imp.end());
  // FMR(t) is non-increasing in t: binary search the first candidate meeting the target.
  const auto n_imp = static_cast<double>(imp.size());
  auto fmr = [&](double t) {
    return static_cast<double>(imp.end() - std::lower_bound(imp.begin(), imp.end(), t)) / n_imp;
  };
  const auto it = std::partition_point(cand.begin(), cand.end(), [&](double t) { return fmr(t) > target_fmr; });
  return verification_at(genuine, imposter, *it);
}

VerificationReport verification_metrics(const Matrix& embeddings, std::span<const int> identities,
                                        std::span<const double> thresholds, const VerificationOptions& opt) {
  if (embeddings.rows() != identities.size()) throw ValidationError("verification: identity count differs from rows");
  if (std::all_of(identities.begin(), identities.end(), [&](int v) { return v == identities[0]; }))
    throw ValidationError("verification: need at least 2 identities");
  if (opt.max_pairs < 1) throw ValidationError("verification: max_pairs must be >= 1");

  // Reservoir-sample each pair type down to max_pairs.
  Rng rng(derive_seed(opt.seed, "verification-pairs"));
  std::vector<double> genuine, imposter;
  std::size_t seen_g = 0, seen_i = 0;
  auto offer = [&](std::vector<double>& pool, std::size_t& seen, double v) {
    ++seen;
    if (pool.size() < opt.max_pairs) pool.push_back(v);
    else {
      const std::size_t j = rng.index(seen);
      if (j < opt.max_pairs) pool[j] = v;
    }
  };
  for (std::size_t i = 0; i < embeddings.rows(); ++i)
    for (std::size_t j = i + 1; j < embeddings.rows(); ++j) {
      const double sim = cosine_similarity(embeddings.row(i), embeddings.row(j));
      if (identities[i] == identities[j]) offer(genuine, seen_g, sim);
      else offer(imposter, seen_i, sim);
    }
  if (imposter.empty()) throw ValidationError("verification: no imposter pairs");
  if (genuine.empty()) throw ValidationError("verification: no genuine pairs");

  VerificationReport rep;
  rep.target_fmr = opt.target_fmr;
  for (double t : thresholds) rep.per_threshold.push_back(verification_at(genuine, imposter, t));
  rep.at_target = threshold_for_fmr(genuine, imposter, opt.target_fmr);
  return rep;
}

EvalReport evaluate_bundle(const training::ModuleBundle& b, const data::LabeledDataset& ds,
                           const EvalOptions& opt) {
  ds.validate();
  const training::FunnelModel& m = b.model;
  if (ds.dim() != m.input_dim)
    throw ValidationError("eval: dataset has " + std::to_string(ds.dim()) + " features, bundle expects " +
                          std::to_string(m.input_dim));
  EvalReport rep;
  Rng rng(derive_seed(opt.seed, "eval-release"));
  const Matrix z = opt.use_posterior_mean ? m.posterior_mean(ds.features) : m.release(ds.features, rng);

  rep.label_entropy_bits = label_entropy(ds.sensitive);
  LeakageOptions lo = opt.leakage;
  lo.seed = derive_seed(opt.seed, "eval-leakage");
  rep.leakage_plugin_bits = leakage_mi(z, ds.sensitive, LeakageMethod::plugin_classifier, lo);
  if (opt.with_mine) rep.leakage_mine_bits = leakage_mi(z, ds.sensitive, LeakageMethod::mine, lo);

  const double fr[2] = {0.5, 0.5};
  const auto idx = data::split_indices(ds, fr, derive_seed(opt.seed, "eval-split"));
  const Matrix z_tr = gather_rows(z, std::span<const std::size_t>(idx[0]));
  const Matrix z_te = gather_rows(z, std::span<const std::size_t>(idx[1]));
  auto labels = [&](const std::vector<int>& all, const std::vector<std::size_t>& rows) {
    std::vector<int> out;
    for (std::size_t r : rows) out.push_back(all[r]);
    return out;
  };
  rep.adversary_acc = adversary_accuracy(z_tr, labels(ds.sensitive, idx[0]), z_te, labels(ds.sensitive, idx[1]),
                                         derive_seed(opt.seed, "eval-adversary"))
                          .accuracy;

  if (ds.identity) {
    if (ds.image) {
      rep.utility_name = "identity_accuracy";
      rep.utility = adversary_accuracy(z_tr, labels(*ds.identity, idx[0]), z_te, labels(*ds.identity, idx[1]),
                                       derive_seed(opt.seed, "eval-utility"))
                        .accuracy;
    } else {
      rep.utility_name = "tmr_at_fmr_0.1";
      VerificationOptions vo;
      vo.seed = derive_seed(opt.seed, "eval-verification");
      rep.utility = verification_metrics(z_te, labels(*ds.identity, idx[1]), {}, vo).at_target.tmr;
    }
  }

  const models::Posterior post = m.encoder.forward(ds.features);
  const info::GaussianDiag standard = info::GaussianDiag::standard(m.latent_dim);
  double kl = 0.0;
  for (std::size_t r = 0; r < post.batch(); ++r) kl += info::kl_gaussian_diag(post.row(r), standard);
  rep.complexity_nats = kl / static_cast<double>(post.batch());
  return rep;
}

std::vector<TradeoffPoint> tradeoff_sweep(const training::TrainConfig& tmpl, std::span<const double> alphas,
                                          const data::LabeledDataset& ds, const SweepOptions& opt) {
  if (alphas.empty()) throw ValidationError("sweep: need at least one alpha");
  for (double a : alphas)
    if (!(a >= 0.0)) throw ValidationError("sweep: alphas must be non-negative");
  const double fr[2] = {1.0 - opt.eval_fraction, opt.eval_fraction};
  const auto parts = data::split(ds, fr, derive_seed(opt.seed, "sweep-split"));
  std::vector<TradeoffPoint> out;
  for (double a : alphas) {
    training::TrainConfig cfg = tmpl;
    cfg.alpha_end = a;
    cfg.alpha_start = std::min(tmpl.alpha_start, a);
    const auto bundle = training::train(cfg, parts[0]);
    EvalOptions eo = opt.eval;
    eo.seed = derive_seed(opt.seed, "sweep-eval");
    const EvalReport rep = evaluate_bundle(bundle, parts[1], eo);
    TradeoffPoint p;
    p.alpha = a;
    p.utility_metric = rep.utility.value_or(std::nan(""));
    p.leakage_mi_bits = rep.leakage_plugin_bits;
    p.adversary_acc = rep.adversary_acc;
    p.model_kind = cfg.model;
    p.complexity_nats = rep.complexity_nats;
    if (opt.log)
      *opt.log << "alpha " << a << ": utility " << p.utility_metric << ", leakage " << p.leakage_mi_bits
               << " bits, adversary " << p.adversary_acc << ", complexity " << p.complexity_nats << " nats"
               << std::endl;
    out.push_back(p);
  }
  return out;
}

void write_tradeoff_csv(std::span<const TradeoffPoint> points, std::ostream& out) {
  out << kTradeoffHeader << "\n";
  char buf[160];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.9g,%.9g,%.9g,%.9g\n", p.alpha, p.utility_metric, p.leakage_mi_bits,
                  p.adversary_acc);
    out << buf;
  }
}

}  // namespace pf::eval
