#include <fstream>

#include <json.hpp>

#include "binio.hpp"
#include "pf/training.hpp"

namespace pf::training {

namespace {

constexpr char kWeightMagic[4] = {'P', 'F', 'W', '1'};

void write_weights(const std::vector<const nn::Parameter*>& params, const std::filesystem::path& path) {
  binio::Writer w;
  w.bytes(kWeightMagic, 4);
  w.u32le(static_cast<std::uint32_t>(params.size()));
  for (const nn::Parameter* p : params) {
    w.u32le(static_cast<std::uint32_t>(p->value.rows()));
    w.u32le(static_cast<std::uint32_t>(p->value.cols()));
    for (float f : p->value.flat()) w.f32le(f);
  }
  binio::write_file(path, w.buffer());
}

void read_weights(const nn::ParamList& params, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw FormatError("bundle: missing weight file " + path.string());
  const auto buf = binio::read_file(path);
  binio::Reader r(buf, path.string());
  const std::uint8_t* magic = r.take(4);
  if (!std::equal(magic, magic + 4, reinterpret_cast<const std::uint8_t*>(kWeightMagic)))
    throw FormatError(path.string() + ": not a PFW1 weight file");
  const std::uint32_t count = r.u32le();
  if (count != params.size())
    throw FormatError(path.string() + ": holds " + std::to_string(count) + " tensors, network expects " +
                      std::to_string(params.size()));
  for (nn::Parameter* p : params) {
    const std::uint32_t rows = r.u32le(), cols = r.u32le();
    if (rows != p->value.rows() || cols != p->value.cols())
      throw FormatError(path.string() + ": tensor shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not match the network");
    for (float& f : p->value.flat()) f = r.f32le();
    p->grad = Matrix(rows, cols);
  }
  if (r.remaining() != 0) throw FormatError(path.string() + ": trailing bytes");
}

template <typename T>
T field(const nlohmann::json& j, const char* key, const std::filesystem::path& path) {
  if (!j.contains(key)) throw FormatError(path.string() + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": field '" + key + "': " + e.what());
  }
}

}  // namespace

void save_bundle(const ModuleBundle& b, const std::filesystem::path& dir) {
  const FunnelModel& m = b.model;
  const BundleMetadata& meta = b.meta;
  for (const auto* v : {&meta.dataset_name, &meta.sensitive_attribute, &meta.backbone, &meta.loss_function,
                        &meta.backbone_trained_dataset, &meta.model_kind, &meta.created_at})
    if (v->empty()) throw ValidationError("bundle: metadata fields must be non-empty");
  if (meta.latent_dim != m.encoder.latent_dim()) throw ValidationError("bundle: latent_dim does not match encoder");

  std::filesystem::create_directories(dir);
  // nlohmann::json objects keep keys sorted, which gives a canonical order.
  nlohmann::json j;
  j["dataset_name"] = meta.dataset_name;
  j["sensitive_attribute"] = meta.sensitive_attribute;
  j["alpha"] = meta.alpha;
  j["latent_dim"] = meta.latent_dim;
  j["backbone"] = meta.backbone;
  j["loss_function"] = meta.loss_function;
  j["backbone_trained_dataset"] = meta.backbone_trained_dataset;
  j["model_kind"] = meta.model_kind;
  j["seed"] = meta.seed;
  j["created_at"] = meta.created_at;
  nlohmann::json arch;
  arch["input_dim"] = m.input_dim;
  arch["num_sensitive"] = m.num_sensitive;
  arch["hidden"] = m.net.hidden;
  arch["activation"] = std::string(nn::activation_name(m.net.activation));
  arch["dropout"] = m.net.dropout;
  arch["prior_mode"] = std::string(prior_mode_name(m.prior_mode));
  arch["noise_enabled"] = m.noise_enabled;
  if (b.image) arch["image_shape"] = {b.image->height, b.image->width, b.image->channels};
  arch["networks"] = m.network_names();
  j["architecture"] = arch;
  {
    std::ofstream out(dir / "metadata.json", std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("bundle: cannot write " + (dir / "metadata.json").string());
    out << j.dump(2) << "\n";
  }
  for (const std::string& name : m.network_names()) write_weights(m.network(name), dir / (name + ".pfw"));
}

ModuleBundle load_bundle(const std::filesystem::path& dir) {
  const auto meta_path = dir / "metadata.json";
  if (!std::filesystem::exists(meta_path)) throw FormatError("bundle: missing file " + meta_path.string());
  nlohmann::json j;
  try {
    std::ifstream in(meta_path);
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }

  ModuleBundle b;
  BundleMetadata& meta = b.meta;
  meta.dataset_name = field<std::string>(j, "dataset_name", meta_path);
  meta.sensitive_attribute = field<std::string>(j, "sensitive_attribute", meta_path);
  meta.alpha = field<double>(j, "alpha", meta_path);
  meta.latent_dim = field<std::size_t>(j, "latent_dim", meta_path);
  meta.backbone = field<std::string>(j, "backbone", meta_path);
  meta.loss_function = field<std::string>(j, "loss_function", meta_path);
  meta.backbone_trained_dataset = field<std::string>(j, "backbone_trained_dataset", meta_path);
  meta.model_kind = field<std::string>(j, "model_kind", meta_path);
  meta.seed = field<std::uint64_t>(j, "seed", meta_path);
  meta.created_at = field<std::string>(j, "created_at", meta_path);
  const nlohmann::json arch = field<nlohmann::json>(j, "architecture", meta_path);

  models::NetConfig net;
  net.hidden = field<std::vector<std::size_t>>(arch, "hidden", meta_path);
  net.activation = nn::parse_activation(field<std::string>(arch, "activation", meta_path));
  net.dropout = field<double>(arch, "dropout", meta_path);
  if (arch.contains("image_shape")) {
    const auto s = arch["image_shape"].get<std::vector<std::size_t>>();
    if (s.size() != 3) throw FormatError(meta_path.string() + ": image_shape needs 3 entries");
    b.image = data::ImageShape{s[0], s[1], s[2]};
  }
  try {
    b.model = FunnelModel::create(parse_model_kind(meta.model_kind), field<std::size_t>(arch, "input_dim", meta_path),
                                  meta.latent_dim, field<std::size_t>(arch, "num_sensitive", meta_path), net,
                                  parse_prior_mode(field<std::string>(arch, "prior_mode", meta_path)),
                                  objectives::parse_distortion(meta.loss_function),
                                  field<bool>(arch, "noise_enabled", meta_path), meta.seed);
  } catch (const ValidationError& e) {
    throw FormatError(meta_path.string() + ": " + e.what());
  }
  for (const std::string& name : b.model.network_names())
    read_weights(b.model.network(name), dir / (name + ".pfw"));
  return b;
}

}  // namespace pf::training
