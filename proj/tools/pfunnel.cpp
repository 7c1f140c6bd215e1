// pfunnel: data generation, training, evaluation, sweeps, the MINE self-test
// and the discrete oracle checks.
//
// Exit codes: 0 success, 2 usage or validation error, 3 numeric failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pf/data.hpp"
#include "pf/evaluation.hpp"
#include "pf/oracle.hpp"
#include "pf/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace pf;

namespace {

std::string to_key(std::string name) {
  std::replace(name.begin(), name.end(), '-', '_');
  return name;
}

std::string to_flag(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return "--" + key;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(what + ": not a number: '" + s + "'");
  }
}

// Comma-separated probabilities. A sum within 1e-3 of one is renormalized.
info::Pmf parse_pmf(const std::string& s) {
  std::vector<double> p;
  for (const auto& item : split_list(s)) p.push_back(parse_double(item, "pmf"));
  if (p.empty()) throw ValidationError("pmf: empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw ValidationError("pmf: entries must be non-negative");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-3) {
    std::ostringstream msg;
    msg << "pmf '" << s << "' sums to " << sum << ", expected 1 (tolerance 1e-3)";
    throw ValidationError(msg.str());
  }
  for (double& v : p) v /= sum;
  return info::Pmf(std::move(p));
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    const double v = parse_double(item, "hidden");
    if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError("hidden widths must be positive integers");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// "phi=1e-3,xi=2e-3"
std::map<std::string, double> parse_rates(const std::string& s) {
  std::map<std::string, double> out;
  for (const auto& item : split_list(s)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("learning rates: expected group=value, got '" + item + "'");
    out[item.substr(0, eq)] = parse_double(item.substr(eq + 1), "learning rate for " + item.substr(0, eq));
  }
  return out;
}

// Values bound to the options of one subcommand, for run_config.json.
class Registry {
 public:
  explicit Registry(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& name, T& var, const std::string& desc) {
    items_.emplace_back(to_key(name), [&var] { return json(var); });
    return app_->add_option("--" + name, var, desc);
  }
  CLI::Option* flag(const std::string& name, bool& var, const std::string& desc) {
    items_.emplace_back(to_key(name), [&var] { return json(var); });
    return app_->add_flag("--" + name + ",!--no-" + name, var, desc);
  }
  json resolved() const {
    json j = json::object();
    for (const auto& [k, get] : items_) j[k] = get();
    return j;
  }
  CLI::App* app() const { return app_; }

 private:
  CLI::App* app_;
  std::vector<std::pair<std::string, std::function<json()>>> items_;
};

void write_run_config(const fs::path& dir, const std::string& command, const json& resolved) {
  fs::create_directories(dir);
  json j = resolved;
  j["command"] = command;
  std::ofstream(dir / "run_config.json") << j.dump(2) << "\n";
}

// Turns a JSON config into flag tokens. Values mirror the flag names with
// dashes written as underscores.
std::vector<std::string> config_tokens(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("config " + path.string() + ": expected a JSON object");
  auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
  std::vector<std::string> out;
  for (const auto& [key, v] : j.items()) {
    if (key == "command" || key == "config") continue;
    const std::string flag = to_flag(key);
    if (v.is_boolean()) {
      out.push_back(v.get<bool>() ? flag : "--no-" + flag.substr(2));
      continue;
    }
    if (v.is_null()) continue;
    std::string value;
    if (v.is_array()) {
      for (const auto& e : v) value += (value.empty() ? "" : ",") + scalar(e);
    } else {
      value = scalar(v);
    }
    // CLI11 reads "--x=" as a bare flag and grabs the next token. Every string
    // option here treats empty as unset, so leaving it out is equivalent.
    if (!value.empty()) out.push_back(flag + "=" + value);
  }
  return out;
}

// Inserts the tokens of a --config file right after the subcommand so that
// explicit flags, which come later, take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string path;
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    else continue;
    const auto tokens = config_tokens(path);
    std::size_t at = 0;
    while (at < args.size() && !args[at].empty() && args[at][0] == '-') ++at;
    args.insert(args.begin() + static_cast<std::ptrdiff_t>(std::min(at + 1, args.size())), tokens.begin(),
                tokens.end());
    break;
  }
  return args;
}

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  std::string kind = "colored-digits";
  std::size_t n = 10000;
  std::string color_pmf;  // empty: uniform
  std::string sensitive = "color";
  std::string source = "glyphs";
  std::string idx_images, idx_labels;
  std::uint64_t seed = 0;
  std::string out;
};

int run_gen_data(const GenDataArgs& a, const json& resolved) {
  if (a.kind != "colored-digits") throw ValidationError("gen-data: unknown kind '" + a.kind + "'");
  data::ColoredDigitConfig cfg;
  cfg.n = a.n;
  cfg.color_pmf = a.color_pmf.empty() ? info::Pmf::uniform(3) : parse_pmf(a.color_pmf);
  cfg.sensitive = data::parse_sensitive(a.sensitive);
  if (a.source == "idx") {
    cfg.source = data::DigitSource::idx_files;
    cfg.idx_images = a.idx_images;
    cfg.idx_labels = a.idx_labels;
  } else if (a.source != "glyphs") {
    throw ValidationError("gen-data: unknown source '" + a.source + "' (expected glyphs or idx)");
  }
  cfg.seed = derive_seed(a.seed, "data");
  const auto ds = data::generate_colored_digits(cfg);
  data::save_dataset_dir(ds, a.out);
  write_run_config(a.out, "gen-data", resolved);
  std::cout << "wrote " << ds.size() << " colored digits (sensitive: " << ds.sensitive_name << ", H(S) = "
            << eval::label_entropy(ds.sensitive) << " bits) to " << a.out << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string model = "dispf";
  int epochs = 10;
  std::size_t batch_size = 64;
  std::size_t latent_dim = 16;
  double alpha_start = 0.0;
  double alpha_end = 1.0;
  double linear_increment = 0.0;
  double lr = 1e-4;
  std::string learning_rates;
  std::string prior = "learned";
  bool noise = true;
  double dropout = 0.1;
  std::string hidden = "256,256";
  std::string activation = "relu";
  std::string dis = "auto";
  double grad_clip = 5.0;
  std::string xi_step1 = "adversarial";
  bool analytic_kl = true;
  std::string dataset_name;
  std::string backbone = "mlp";
  std::string backbone_trained_dataset;
  std::uint64_t seed = 0;
  std::string data;
  std::string out;
};

void add_train_options(Registry& r, TrainArgs& a) {
  r.option("model", a.model, "dispf or genpf");
  r.option("epochs", a.epochs, "training epochs");
  r.option("batch-size", a.batch_size, "minibatch size M");
  r.option("latent-dim", a.latent_dim, "latent dimension d_z");
  r.option("alpha-start", a.alpha_start, "alpha at epoch 0");
  r.option("alpha-end", a.alpha_end, "alpha reached at the last epoch");
  r.option("linear-increment", a.linear_increment, "per-epoch alpha increment in the linear phase");
  r.option("lr", a.lr, "default learning rate for every parameter group");
  r.option("learning-rates", a.learning_rates, "per-group overrides, e.g. phi=1e-3,xi=2e-3");
  r.option("prior", a.prior, "fixed or learned");
  r.flag("noise", a.noise, "add N(0, I/(2 pi e)) noise to the released latent");
  r.option("dropout", a.dropout, "dropout rate");
  r.option("hidden", a.hidden, "hidden widths, comma separated");
  r.option("activation", a.activation, "relu, leaky_relu, tanh, elu or gelu");
  r.option("dis", a.dis, "distortion: bernoulli, mse or auto (bernoulli for images)");
  r.option("grad-clip", a.grad_clip, "global gradient norm clip");
  r.option("xi-step1", a.xi_step1, "adversarial or displayed");
  r.flag("analytic-kl", a.analytic_kl, "GenPF with learned prior: keep the closed-form KL in step 1");
  r.option("dataset-name", a.dataset_name, "bundle metadata (defaults to the data directory name)");
  r.option("backbone", a.backbone, "bundle metadata");
  r.option("backbone-trained-dataset", a.backbone_trained_dataset, "bundle metadata");
  r.option("seed", a.seed, "root seed");
  r.option("data", a.data, "dataset directory or PFEMB1 file")->required();
}

training::TrainConfig make_train_config(const TrainArgs& a, const data::LabeledDataset& ds) {
  training::TrainConfig c;
  c.model = training::parse_model_kind(a.model);
  c.epochs = a.epochs;
  c.batch_size = a.batch_size;
  c.latent_dim = a.latent_dim;
  c.alpha_start = a.alpha_start;
  c.alpha_end = a.alpha_end;
  c.linear_increment = a.linear_increment;
  c.default_lr = a.lr;
  c.learning_rates = parse_rates(a.learning_rates);
  c.prior_mode = training::parse_prior_mode(a.prior);
  c.noise_enabled = a.noise;
  c.dropout = a.dropout;
  c.hidden = parse_sizes(a.hidden);
  c.activation = nn::parse_activation(a.activation);
  if (a.dis == "auto")
    c.dis_mode = ds.image ? objectives::Distortion::bernoulli : objectives::Distortion::mse;
  else
    c.dis_mode = objectives::parse_distortion(a.dis);
  c.grad_clip = a.grad_clip;
  c.xi_step1 = training::parse_xi_step1(a.xi_step1);
  c.analytic_kl = a.analytic_kl;
  c.dataset_name = a.dataset_name.empty() ? fs::path(a.data).lexically_normal().filename().string() : a.dataset_name;
  if (c.dataset_name.empty()) c.dataset_name = fs::path(a.data).lexically_normal().parent_path().filename().string();
  c.backbone = a.backbone;
  c.backbone_trained_dataset = a.backbone_trained_dataset;
  c.seed = derive_seed(a.seed, "train");
  c.validate();
  return c;
}

int run_train(const TrainArgs& a, const json& resolved) {
  const auto ds = data::load_dataset_dir(a.data);
  const auto cfg = make_train_config(a, ds);
  fs::create_directories(a.out);
  write_run_config(a.out, "train", resolved);

  std::ofstream csv(fs::path(a.out) / "metrics.csv");
  training::TrainHooks hooks;
  hooks.metrics_csv = &csv;
  hooks.log = &std::cerr;
  long skipped = 0;
  hooks.on_step = [&](const training::StepEvent& ev, const training::FunnelModel&) { skipped += ev.skipped; };
  if (cfg.model == training::ModelKind::genpf && cfg.prior_mode == models::PriorMode::fixed_standard)
    std::cerr << "steps 2-3 skipped: genpf with the fixed standard-normal prior uses the closed-form KL\n";

  const auto bundle = training::train(cfg, ds, hooks);
  training::save_bundle(bundle, a.out);
  if (skipped > 0) std::cerr << "steps 2-3 skipped in " << skipped / 2 << " iterations\n";
  std::cout << "bundle written to " << a.out << " (alpha " << bundle.meta.alpha << ")\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string bundle, data, out;
  std::uint64_t seed = 0;
  bool posterior_mean = false;
  bool mine = true;
  long mine_iterations = 3000;
};

int run_eval(const EvalArgs& a, const json& resolved) {
  const auto b = training::load_bundle(a.bundle);
  const auto ds = data::load_dataset_dir(a.data);
  eval::EvalOptions opt;
  opt.seed = derive_seed(a.seed, "eval");
  opt.use_posterior_mean = a.posterior_mean;
  opt.with_mine = a.mine;
  opt.leakage.mine_iterations = a.mine_iterations;
  const auto rep = eval::evaluate_bundle(b, ds, opt);

  json j;
  j["bundle"] = a.bundle;
  j["alpha"] = b.meta.alpha;
  j["model_kind"] = b.meta.model_kind;
  j["label_entropy_bits"] = rep.label_entropy_bits;
  j["leakage_plugin_bits"] = rep.leakage_plugin_bits;
  if (rep.leakage_mine_bits) j["leakage_mine_bits"] = *rep.leakage_mine_bits;
  j["adversary_acc"] = rep.adversary_acc;
  if (rep.utility) j[rep.utility_name] = *rep.utility;
  j["complexity_nats"] = rep.complexity_nats;

  std::cout << "bundle            " << a.bundle << " (" << b.meta.model_kind << ", alpha " << b.meta.alpha << ")\n"
            << "H(S)              " << rep.label_entropy_bits << " bits\n"
            << "leakage (plugin)  " << rep.leakage_plugin_bits << " bits\n";
  if (rep.leakage_mine_bits) std::cout << "leakage (mine)    " << *rep.leakage_mine_bits << " bits\n";
  std::cout << "adversary acc     " << rep.adversary_acc << "\n";
  if (rep.utility) std::cout << rep.utility_name << std::string(18 - std::min<std::size_t>(17, rep.utility_name.size()), ' ') << *rep.utility << "\n";
  std::cout << "complexity        " << rep.complexity_nats << " nats\n";
  if (!a.out.empty()) {
    write_run_config(a.out, "eval", resolved);
    std::ofstream(fs::path(a.out) / "report.json") << j.dump(2) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  TrainArgs train;
  std::vector<double> alphas;
  double eval_fraction = 0.3;
  bool mine = false;
};

int run_sweep(const SweepArgs& a, const json& resolved) {
  const auto ds = data::load_dataset_dir(a.train.data);
  const auto cfg = make_train_config(a.train, ds);
  fs::create_directories(a.train.out);
  write_run_config(a.train.out, "sweep", resolved);
  eval::SweepOptions so;
  so.eval_fraction = a.eval_fraction;
  so.seed = derive_seed(a.train.seed, "sweep");
  so.eval.with_mine = a.mine;
  so.log = &std::cerr;
  const auto points = eval::tradeoff_sweep(cfg, a.alphas, ds, so);
  std::ofstream csv(fs::path(a.train.out) / "tradeoff.csv");
  eval::write_tradeoff_csv(points, csv);
  eval::write_tradeoff_csv(points, std::cout);
  return 0;
}

// ---------------------------------------------------------------- mi

struct MiArgs {
  double rho = 0.9;
  std::size_t n = 100000;
  mine::MineConfig cfg;
  std::string out;
};

int run_mi(MiArgs a, const json& resolved) {
  const auto r = eval::mine_self_test(a.rho, a.n, a.cfg);
  std::cout << "rho " << a.rho << ", n " << a.n << "\n"
            << "analytic  " << r.analytic_nats << " nats\n"
            << "estimate  " << r.estimate_nats << " nats\n"
            << "time      " << r.seconds << " s\n";
  if (r.analytic_nats > 0)
    std::cout << "relative error " << std::abs(r.estimate_nats - r.analytic_nats) / r.analytic_nats << "\n";
  if (!a.out.empty()) write_run_config(a.out, "mi", resolved);
  return 0;
}

// ---------------------------------------------------------------- oracle

// Exact quantities for one triple read from a matrix file.
int run_triple(const std::string& path) {
  const auto t = info::read_triple_file(path);
  const auto d = info::exact_decomposition(t);
  std::cout.precision(6);
  std::cout << "|S|=" << t.num_s() << " |X|=" << t.num_x() << " |Z|=" << t.num_z() << "\n"
            << std::fixed << "I(S;Z)   " << d.i_sz << " nats\n"
            << "I(X;Z)   " << d.i_xz << " nats\n"
            << "H(X|S)   " << d.h_x_given_s << " nats\n"
            << "H(X|S,Z) " << d.h_x_given_sz << " nats\n"
            << std::scientific << "identity residual " << d.identity_residual() << "\n";
  return std::abs(d.identity_residual()) < 1e-10 ? 0 : 1;
}

int run_oracle(const info::OracleOptions& o, const std::string& triple, const std::string& out,
               const json& resolved) {
  if (!triple.empty()) {
    const int rc = run_triple(triple);
    if (!out.empty()) write_run_config(out, "oracle", resolved);
    return rc;
  }
  const auto r = info::run_oracles(o);
  std::cout.precision(3);
  std::cout << std::scientific << "trials " << r.trials << "\n"
            << "max decomposition identity violation  " << r.decomposition << "\n"
            << "max complexity identity violation     " << r.complexity << "\n"
            << "max lower bound violation             " << r.lower_bound << "\n"
            << "max upper bound violation             " << r.upper_bound << "\n"
            << "max lower bound gap at optimum        " << r.lower_gap << "\n"
            << "max upper bound gap at optimum        " << r.upper_gap << "\n"
            << "max noise entropy violation           " << r.noise_entropy << "\n";
  if (!out.empty()) write_run_config(out, "oracle", resolved);
  if (r.worst() >= 1e-10) {
    std::cout << "FAILED: violation above 1e-10\n";
    return 1;
  }
  return 0;
}

int dispatch(int argc, char** argv) {
  CLI::App app{"Privacy funnel toolkit: DisPF/GenPF training and leakage measurement"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  std::string config;

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate the colored-digit dataset");
  Registry gen_reg(gen_cmd);
  gen_reg.option("kind", gen.kind, "dataset kind (colored-digits)");
  gen_reg.option("n", gen.n, "number of images");
  gen_reg.option("color-pmf", gen.color_pmf, "red,green,blue probabilities (default uniform)");
  gen_reg.option("sensitive", gen.sensitive, "color or digit");
  gen_reg.option("source", gen.source, "glyphs or idx");
  gen_reg.option("idx-images", gen.idx_images, "IDX image file (source idx)");
  gen_reg.option("idx-labels", gen.idx_labels, "IDX label file (source idx)");
  gen_reg.option("seed", gen.seed, "root seed");
  gen_reg.option("out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a DisPF or GenPF bundle");
  Registry train_reg(train_cmd);
  add_train_options(train_reg, tr);
  train_reg.option("out", tr.out, "bundle directory")->required();

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "measure leakage and utility of a bundle");
  Registry eval_reg(eval_cmd);
  eval_reg.option("bundle", ev.bundle, "bundle directory")->required();
  eval_reg.option("data", ev.data, "dataset directory or PFEMB1 file")->required();
  eval_reg.option("seed", ev.seed, "root seed");
  eval_reg.flag("posterior-mean", ev.posterior_mean, "evaluate posterior means instead of released samples");
  eval_reg.flag("mine", ev.mine, "also estimate leakage with MINE");
  eval_reg.option("mine-iterations", ev.mine_iterations, "MINE iterations");
  eval_reg.option("out", ev.out, "optional report directory");

  SweepArgs sw;
  auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate one bundle per alpha");
  Registry sweep_reg(sweep_cmd);
  add_train_options(sweep_reg, sw.train);
  sweep_reg.option("alphas", sw.alphas, "alpha values, comma separated")->delimiter(',')->required();
  sweep_reg.option("eval-fraction", sw.eval_fraction, "held-out share for evaluation");
  sweep_reg.flag("mine", sw.mine, "also estimate leakage with MINE");
  sweep_reg.option("out", sw.train.out, "report directory")->required();

  MiArgs mi;
  auto* mi_cmd = app.add_subcommand("mi", "MINE self-test on correlated Gaussians");
  Registry mi_reg(mi_cmd);
  mi_reg.option("rho", mi.rho, "correlation");
  mi_reg.option("n", mi.n, "sample count");
  mi_reg.option("seed", mi.cfg.seed, "root seed");
  mi_reg.option("iterations", mi.cfg.n_iterations, "training iterations");
  mi_reg.option("window", mi.cfg.n_window, "iterations averaged for the estimate");
  mi_reg.option("batch-size", mi.cfg.batch_size, "minibatch size");
  mi_reg.option("hidden-size", mi.cfg.hidden_size, "critic hidden width");
  mi_reg.option("learning-rate", mi.cfg.learning_rate, "Adam learning rate");
  mi_reg.option("moving-average-rate", mi.cfg.moving_average_rate, "moving average rate for exp(T)");
  mi_reg.option("out", mi.out, "optional run directory");

  info::OracleOptions oracle;
  std::string oracle_out, oracle_triple;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact discrete identity and bound checks");
  Registry oracle_reg(oracle_cmd);
  oracle_reg.option("trials", oracle.trials, "random triples");
  oracle_reg.option("seed", oracle.seed, "root seed");
  oracle_reg.option("max-card", oracle.max_card, "largest alphabet size");
  oracle_reg.option("triple", oracle_triple, "check one triple from a matrix file instead of random ones");
  oracle_reg.option("out", oracle_out, "optional run directory");

  for (auto* sub : {gen_cmd, train_cmd, eval_cmd, sweep_cmd, mi_cmd, oracle_cmd})
    sub->add_option("--config", config, "JSON file of option values; explicit flags win");

  std::vector<std::string> args(argv + 1, argv + argc);
  args = expand_config(std::move(args));
  std::vector<char*> cargv{argv[0]};
  for (auto& s : args) cargv.push_back(s.data());
  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (*gen_cmd) return run_gen_data(gen, gen_reg.resolved());
  if (*train_cmd) return run_train(tr, train_reg.resolved());
  if (*eval_cmd) return run_eval(ev, eval_reg.resolved());
  if (*sweep_cmd) return run_sweep(sw, sweep_reg.resolved());
  if (*mi_cmd) return run_mi(mi, mi_reg.resolved());
  return run_oracle(oracle, oracle_triple, oracle_out, oracle_reg.resolved());
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure in step " << e.step() << " at iteration " << e.iteration() << ": " << e.what()
              << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
