#pragma once
// Measurements on released representations: label entropy, an independent
// linear adversary, leakage MI, verification metrics and the alpha sweep.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pf/data.hpp"
#include "pf/infotheory.hpp"
#include "pf/mine.hpp"
#include "pf/training.hpp"

namespace pf::eval {

// Plug-in entropy of the empirical label distribution.
double label_entropy(std::span<const int> labels, info::LogBase base = info::LogBase::two);

// Multinomial logistic regression on standardized features, L2-regularized,
// trained with minibatch Adam under a fixed seed.
class LinearClassifier {
 public:
  struct Options {
    int epochs = 60;
    std::size_t batch_size = 128;
    double learning_rate = 0.02;
    double l2 = 1e-3;
    std::uint64_t seed = 0;
  };

  void fit(const Matrix& x, std::span<const int> labels, std::size_t num_classes, const Options& opt);
  std::vector<std::vector<double>> predict_proba(const Matrix& x) const;
  std::vector<int> predict(const Matrix& x) const;
  std::size_t num_classes() const { return k_; }

 private:
  std::size_t k_ = 0, d_ = 0;
  std::vector<double> mean_, inv_std_;
  std::vector<double> w_;  // k x d
  std::vector<double> b_;
};

double accuracy(std::span<const int> predicted, std::span<const int> truth);

struct AdversaryResult {
  double accuracy = 0.0;
  std::optional<std::string> warning;  // set when the training labels hold one class
};

// Trains a fresh LinearClassifier on (z_train, s_train), returns test accuracy.
AdversaryResult adversary_accuracy(const Matrix& z_train, std::span<const int> s_train,
                                   const Matrix& z_test, std::span<const int> s_test,
                                   std::uint64_t seed = 0,
                                   const LinearClassifier::Options& opt = {});

enum class LeakageMethod { mine, plugin_classifier };
LeakageMethod parse_leakage_method(std::string_view name);

struct LeakageOptions {
  std::uint64_t seed = 0;
  double train_fraction = 0.7;  // plugin: classifier fit split
  long mine_iterations = 3000;
  std::size_t mine_batch = 256;
  std::size_t mine_hidden = 64;
};

// I(S; Z) in bits, clipped to [0, label_entropy(s)].
//   mine               MINE on (z, one-hot s), trained on the train share
//                      and evaluated on the rest
//   plugin_classifier  H(S) - H_ce(S | Z) on the held-out share using the
//                      linear classifier's posteriors
double leakage_mi(const Matrix& z, std::span<const int> s, LeakageMethod method,
                  const LeakageOptions& opt = {});

struct MineSelfTest {
  double rho = 0.0;
  double analytic_nats = 0.0;
  double estimate_nats = 0.0;  // windowed training estimate
  double seconds = 0.0;
};

// MINE on n correlated Gaussian pairs drawn with cfg.seed, compared to the
// closed form. cfg.dim_x and cfg.dim_y are forced to 1.
MineSelfTest mine_self_test(double rho, std::size_t n, mine::MineConfig cfg);

struct VerificationResult {
  double threshold = 0.0;
  double fmr = 0.0;
  double tmr = 0.0;
  double acc = 0.0;
  std::size_t n_genuine = 0;
  std::size_t n_imposter = 0;
};

struct VerificationReport {
  std::vector<VerificationResult> per_threshold;
  // Smallest candidate threshold (a pair similarity, or just above the
  // largest one) whose FMR does not exceed target_fmr.
  VerificationResult at_target;
  double target_fmr = 0.1;
};

struct VerificationOptions {
  std::size_t max_pairs = 100000;  // per pair type
  std::uint64_t seed = 0;
  double target_fmr = 0.1;
};

double cosine_similarity(std::span<const float> a, std::span<const float> b);

// Pairs are accepted when cosine similarity >= threshold.
VerificationReport verification_metrics(const Matrix& embeddings, std::span<const int> identities,
                                        std::span<const double> thresholds,
                                        const VerificationOptions& opt = {});

// Metrics at one threshold from raw pair scores.
VerificationResult verification_at(std::span<const double> genuine, std::span<const double> imposter,
                                   double threshold);
VerificationResult threshold_for_fmr(std::span<const double> genuine, std::span<const double> imposter,
                                     double target_fmr);

struct EvalOptions {
  std::uint64_t seed = 0;
  bool use_posterior_mean = false;  // default: released (sampled) representation
  bool with_mine = true;
  LeakageOptions leakage;
};

struct EvalReport {
  double label_entropy_bits = 0.0;
  std::optional<double> leakage_mine_bits;
  double leakage_plugin_bits = 0.0;
  double adversary_acc = 0.0;
  std::optional<double> utility;  // identity accuracy (images) or TMR@FMR (embeddings)
  std::string utility_name;
  double complexity_nats = 0.0;  // mean KL(posterior || N(0, I))
};

// Encodes the dataset with the bundle and measures the released Z.
EvalReport evaluate_bundle(const training::ModuleBundle& b, const data::LabeledDataset& ds,
                           const EvalOptions& opt = {});

struct TradeoffPoint {
  double alpha = 0.0;
  double utility_metric = 0.0;
  double leakage_mi_bits = 0.0;
  double adversary_acc = 0.0;
  training::ModelKind model_kind = training::ModelKind::dispf;
  double complexity_nats = 0.0;
};

struct SweepOptions {
  double eval_fraction = 0.3;  // held out from training
  std::uint64_t seed = 0;
  EvalOptions eval;
  std::ostream* log = nullptr;
};

// One bundle per alpha (alpha_end = alpha, shared seed), evaluated on a
// held-out split with the plug-in leakage estimate.
std::vector<TradeoffPoint> tradeoff_sweep(const training::TrainConfig& tmpl, std::span<const double> alphas,
                                          const data::LabeledDataset& ds, const SweepOptions& opt = {});

inline constexpr const char* kTradeoffHeader = "alpha,utility,leakage_bits,adversary_acc";
void write_tradeoff_csv(std::span<const TradeoffPoint> points, std::ostream& out);

}  // namespace pf::eval
