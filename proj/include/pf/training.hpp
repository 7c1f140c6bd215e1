#pragma once
// Six-step alternating training for the discriminative (DisPF) and generative
// (GenPF) funnels.
//
// Parameter groups, each with its own Adam instance:
//   phi    encoder               theta  utility decoder
//   xi     sensitive classifier (DisPF) / FiLM generator (GenPF)
//   psi    prior generator (learned prior only)
//   eta    latent discriminator  omega  data-space discriminator
//   tau    sensitive-space discriminator (DisPF only)

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pf/data.hpp"
#include "pf/models.hpp"
#include "pf/objectives.hpp"
#include "pf/schedule.hpp"

namespace pf::training {

enum class ModelKind { dispf, genpf };
ModelKind parse_model_kind(std::string_view name);
std::string_view model_kind_name(ModelKind k);

models::PriorMode parse_prior_mode(std::string_view name);  // "fixed" or "learned"
std::string_view prior_mode_name(models::PriorMode m);

// How the classifier xi is updated in DisPF step 1.
//   adversarial  xi minimizes alpha * CE(s | z) while the encoder maximizes it
//   displayed    xi follows the same loss as the encoder
enum class XiStep1 { adversarial, displayed };
XiStep1 parse_xi_step1(std::string_view name);
std::string_view xi_step1_name(XiStep1 m);

inline const std::vector<std::string> kGroups{"phi", "theta", "xi", "psi", "eta", "omega", "tau"};

struct TrainConfig {
  ModelKind model = ModelKind::dispf;
  int epochs = 10;
  std::size_t batch_size = 64;
  std::size_t latent_dim = 16;
  double alpha_start = 0.0;
  double alpha_end = 1.0;
  double linear_increment = 0.0;
  std::map<std::string, double> learning_rates;  // missing groups use default_lr
  double default_lr = 1e-4;
  models::PriorMode prior_mode = models::PriorMode::learned;
  bool noise_enabled = true;
  double dropout = 0.1;
  std::vector<std::size_t> hidden{256, 256};
  nn::Activation activation = nn::Activation::relu;
  objectives::Distortion dis_mode = objectives::Distortion::bernoulli;
  double grad_clip = 5.0;
  XiStep1 xi_step1 = XiStep1::adversarial;
  bool analytic_kl = true;  // GenPF with learned prior: keep the KL term in step 1
  std::uint64_t seed = 0;

  // metadata
  std::string dataset_name = "colored-digits";
  std::string backbone = "mlp";
  std::string backbone_trained_dataset;  // defaults to dataset_name

  void validate() const;
  double lr(const std::string& group) const;
  AlphaSchedule schedule() const;
  models::NetConfig net_config() const;
  bool has_alpha_schedule() const { return alpha_end > alpha_start; }
};

// The trained networks of one funnel.
struct FunnelModel {
  ModelKind kind = ModelKind::dispf;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  std::size_t num_sensitive = 0;
  models::NetConfig net;
  models::PriorMode prior_mode = models::PriorMode::learned;
  objectives::Distortion dis_mode = objectives::Distortion::bernoulli;
  bool noise_enabled = true;

  models::Encoder encoder;
  models::UtilityDecoder decoder;
  models::SensitiveClassifier classifier;  // DisPF
  models::FilmGenerator film;              // GenPF
  models::PriorGenerator prior;
  models::Discriminator d_eta;
  models::Discriminator d_omega;
  models::Discriminator d_tau;  // DisPF

  // Builds freshly initialized networks.
  static FunnelModel create(ModelKind kind, std::size_t input_dim, std::size_t latent_dim,
                            std::size_t num_sensitive, const models::NetConfig& net,
                            models::PriorMode prior_mode, objectives::Distortion dis,
                            bool noise_enabled, std::uint64_t seed);

  nn::ParamList group(const std::string& name);
  std::vector<const nn::Parameter*> group(const std::string& name) const;
  // Names of networks present in this funnel, in a fixed order.
  std::vector<std::string> network_names() const;
  nn::ParamList network(const std::string& name);
  std::vector<const nn::Parameter*> network(const std::string& name) const;
  std::uint64_t group_hash(const std::string& name) const;

  // Released representation: posterior sample plus optional latent noise.
  Matrix release(const Matrix& x, Rng& rng) const;
  Matrix posterior_mean(const Matrix& x) const;
  // GenPF: n data-space samples from the prior, conditioned on attribute s.
  Matrix generate(int s, std::size_t n, Rng& rng) const;
};

struct BundleMetadata {
  std::string dataset_name;
  std::string sensitive_attribute;
  double alpha = 0.0;
  std::size_t latent_dim = 0;
  std::string backbone;
  std::string loss_function;
  std::string backbone_trained_dataset;
  std::string model_kind;
  std::uint64_t seed = 0;
  std::string created_at;
};

struct ModuleBundle {
  FunnelModel model;
  BundleMetadata meta;
  std::optional<data::ImageShape> image;
};

struct StepEvent {
  long iteration = 0;
  int step = 0;  // 1..6
  bool skipped = false;
  std::vector<std::string> groups;  // groups updated by this step
  std::map<std::string, double> grad_norms;  // before clipping
  double loss = 0.0;
};

struct IterationMetrics {
  long iteration = 0;
  double alpha = 0.0;
  objectives::LossBreakdown step1;
  double leakage_term = 0.0;
  std::optional<double> d_eta;
  double d_omega = 0.0;
  std::optional<double> d_tau;
};

struct TrainHooks {
  // Fires after every step with the model state after the update.
  std::function<void(const StepEvent&, const FunnelModel&)> on_step;
  std::function<void(const IterationMetrics&)> on_iteration;
  std::ostream* metrics_csv = nullptr;  // header is written first
  std::ostream* log = nullptr;          // human-readable progress
};

inline constexpr const char* kMetricsHeader =
    "iteration,alpha,step1_total,reconstruction,leakage_term,d_eta,d_omega,d_tau";

// Both throw ValidationError on bad config or empty data and NumericError
// (with step and iteration) on non-finite losses or gradients.
ModuleBundle train_dispf(const TrainConfig& cfg, const data::LabeledDataset& ds,
                         const TrainHooks& hooks = {});
ModuleBundle train_genpf(const TrainConfig& cfg, const data::LabeledDataset& ds,
                         const TrainHooks& hooks = {});
ModuleBundle train(const TrainConfig& cfg, const data::LabeledDataset& ds,
                   const TrainHooks& hooks = {});

// Bundle directory: metadata.json plus one <network>.pfw file per network.
// .pfw layout, little-endian: "PFW1", uint32 tensor count, then per tensor
// uint32 rows, uint32 cols and rows*cols float32 values.
void save_bundle(const ModuleBundle& b, const std::filesystem::path& dir);
ModuleBundle load_bundle(const std::filesystem::path& dir);

// UTC timestamp honoring SOURCE_DATE_EPOCH when set.
std::string timestamp_now();

}  // namespace pf::training
