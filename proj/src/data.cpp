#include "pf/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "binio.hpp"
#include "pf/glyphs.hpp"

namespace pf::data {

namespace {

constexpr std::array<char, 16> kEmbMagic{'P', 'F', 'E', 'M', 'B', '1'};
constexpr std::uint32_t kIdxImages = 0x00000803;
constexpr std::uint32_t kIdxLabels = 0x00000801;

std::string hex(std::uint32_t v) {
  char buf[11];
  std::snprintf(buf, sizeof buf, "0x%08x", v);
  return buf;
}

int sample_index(const info::Pmf& p, double u) {
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc && p[i] > 0.0) return static_cast<int>(i);
  }
  // u landed in the rounding gap above the cumulative sum: take the last
  // category with mass.
  for (std::size_t i = p.size(); i-- > 0;)
    if (p[i] > 0.0) return static_cast<int>(i);
  return 0;
}

}  // namespace

void LabeledDataset::validate() const {
  const std::size_t n = features.rows();
  if (sensitive.size() != n) throw ValidationError("dataset: sensitive label count differs from rows");
  if (identity && identity->size() != n) throw ValidationError("dataset: identity label count differs from rows");
  if (num_sensitive == 0) throw ValidationError("dataset: num_sensitive must be >= 1");
  for (int s : sensitive)
    if (s < 0 || static_cast<std::size_t>(s) >= num_sensitive)
      throw ValidationError("dataset: sensitive label " + std::to_string(s) + " outside [0, " +
                            std::to_string(num_sensitive) + ")");
  if (image) {
    if (image->size() != features.cols()) throw ValidationError("dataset: image shape does not match feature width");
    for (float v : features.flat())
      if (!(v >= 0.0f && v <= 1.0f)) throw ValidationError("dataset: image values must lie in [0, 1]");
  }
}

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows) {
  LabeledDataset out;
  out.features = gather_rows(ds.features, rows);
  out.sensitive.reserve(rows.size());
  for (std::size_t r : rows) out.sensitive.push_back(ds.sensitive[r]);
  if (ds.identity) {
    out.identity.emplace();
    for (std::size_t r : rows) out.identity->push_back((*ds.identity)[r]);
  }
  out.sensitive_name = ds.sensitive_name;
  out.num_sensitive = ds.num_sensitive;
  out.image = ds.image;
  return out;
}

SensitiveKind parse_sensitive(std::string_view name) {
  if (name == "color") return SensitiveKind::color;
  if (name == "digit") return SensitiveKind::digit;
  throw ValidationError("unknown sensitive attribute: " + std::string(name));
}

std::string_view sensitive_name(SensitiveKind k) { return k == SensitiveKind::color ? "color" : "digit"; }

void tint(std::span<const float> gray, int color, std::span<float> rgb) {
  if (rgb.size() != gray.size() * 3) throw ValidationError("tint: output must hold 3 channels");
  if (color < 0 || color > 2) throw ValidationError("tint: color must be 0, 1 or 2");
  for (std::size_t i = 0; i < gray.size(); ++i)
    for (int ch = 0; ch < 3; ++ch)
      rgb[i * 3 + static_cast<std::size_t>(ch)] = ch == color ? gray[i] : kTintAttenuation * gray[i];
}

LabeledDataset generate_colored_digits(const ColoredDigitConfig& cfg) {
  if (cfg.n == 0) throw ValidationError("colored digits: n must be >= 1");
  if (cfg.color_pmf.size() != 3) throw ValidationError("colored digits: color pmf needs 3 entries");

  IdxImages src;
  std::vector<int> src_labels;
  if (cfg.source == DigitSource::idx_files) {
    if (cfg.idx_images.empty() || cfg.idx_labels.empty())
      throw ValidationError("colored digits: idx source needs image and label files");
    src = load_idx_images(cfg.idx_images);
    src_labels = load_idx_labels(cfg.idx_labels);
    if (src.rows != 28 || src.cols != 28) throw FormatError("colored digits: idx images must be 28x28");
    if (src_labels.size() != src.pixels.rows()) throw FormatError("colored digits: idx image and label counts differ");
  }

  Rng rng(derive_seed(cfg.seed, "colored-digits"));
  std::vector<std::size_t> order;
  if (!src_labels.empty()) order = rng.permutation(src_labels.size());

  const ImageShape shape{};
  LabeledDataset ds;
  ds.features = Matrix(cfg.n, shape.size());
  ds.sensitive.resize(cfg.n);
  ds.identity.emplace(cfg.n);
  ds.image = shape;
  ds.sensitive_name = std::string(sensitive_name(cfg.sensitive));
  ds.num_sensitive = cfg.sensitive == SensitiveKind::color ? 3 : 10;

  for (std::size_t i = 0; i < cfg.n; ++i) {
    const int color = sample_index(cfg.color_pmf, rng.uniform());
    int digit;
    std::vector<float> gray;
    if (order.empty()) {
      digit = static_cast<int>(rng.index(10));
      gray = glyphs::render_digit(digit, rng);
    } else {
      const std::size_t k = order[i % order.size()];
      digit = src_labels[k];
      const auto row = src.pixels.row(k);
      gray.assign(row.begin(), row.end());
    }
    if (digit < 0 || digit > 9) throw FormatError("colored digits: digit label outside 0-9");
    tint(gray, color, ds.features.row(i));
    (*ds.identity)[i] = digit;
    ds.sensitive[i] = cfg.sensitive == SensitiveKind::color ? color : digit;
  }
  return ds;
}

IdxArray read_idx(const std::filesystem::path& path) {
  const auto buf = binio::read_file(path);
  binio::Reader r(buf, "idx " + path.string());
  IdxArray arr;
  arr.magic = r.u32be();
  if ((arr.magic >> 16) != 0 || ((arr.magic >> 8) & 0xff) != 0x08)
    throw FormatError("idx " + path.string() + ": unsupported magic " + hex(arr.magic));
  const std::uint32_t ndims = arr.magic & 0xff;
  if (ndims == 0) throw FormatError("idx " + path.string() + ": zero dimensions in magic " + hex(arr.magic));
  std::size_t total = 1;
  for (std::uint32_t i = 0; i < ndims; ++i) {
    arr.dims.push_back(r.u32be());
    total *= arr.dims.back();
  }
  const std::uint8_t* p = r.take(total);
  arr.bytes.assign(p, p + total);
  if (r.remaining() != 0) throw FormatError("idx " + path.string() + ": trailing bytes after payload");
  return arr;
}

void write_idx(const std::filesystem::path& path, const IdxArray& arr) {
  if ((arr.magic & 0xff) != arr.dims.size()) throw ValidationError("idx: magic dimension count disagrees with dims");
  std::size_t total = 1;
  for (auto d : arr.dims) total *= d;
  if (total != arr.bytes.size()) throw ValidationError("idx: payload size disagrees with dims");
  binio::Writer w;
  w.u32be(arr.magic);
  for (auto d : arr.dims) w.u32be(d);
  w.bytes(arr.bytes.data(), arr.bytes.size());
  binio::write_file(path, w.buffer());
}

IdxImages load_idx_images(const std::filesystem::path& path) {
  const IdxArray arr = read_idx(path);
  if (arr.magic != kIdxImages)
    throw FormatError("idx " + path.string() + ": expected image magic 0x00000803, found " + hex(arr.magic));
  IdxImages out;
  out.rows = arr.dims[1];
  out.cols = arr.dims[2];
  out.pixels = Matrix(arr.dims[0], out.rows * out.cols);
  for (std::size_t k = 0; k < arr.bytes.size(); ++k) out.pixels.flat()[k] = static_cast<float>(arr.bytes[k]) / 255.0f;
  return out;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path) {
  const IdxArray arr = read_idx(path);
  if (arr.magic != kIdxLabels)
    throw FormatError("idx " + path.string() + ": expected label magic 0x00000801, found " + hex(arr.magic));
  return {arr.bytes.begin(), arr.bytes.end()};
}

void save_embeddings(const LabeledDataset& ds, const std::filesystem::path& path) {
  ds.validate();
  binio::Writer w;
  w.bytes(kEmbMagic.data(), kEmbMagic.size());
  w.u32le(static_cast<std::uint32_t>(ds.size()));
  w.u32le(static_cast<std::uint32_t>(ds.dim()));
  w.u32le(ds.identity ? 1u : 0u);
  for (float f : ds.features.flat()) w.f32le(f);
  for (int s : ds.sensitive) {
    if (s > 0xffff) throw ValidationError("embeddings: sensitive label does not fit in uint16");
    w.u16le(static_cast<std::uint16_t>(s));
  }
  if (ds.identity)
    for (int id : *ds.identity) {
      if (id < 0) throw ValidationError("embeddings: identities must be non-negative");
      w.u32le(static_cast<std::uint32_t>(id));
    }
  binio::write_file(path, w.buffer());
}

LabeledDataset load_embeddings(const std::filesystem::path& path) {
  const auto buf = binio::read_file(path);
  binio::Reader r(buf, "embeddings " + path.string());
  const std::uint8_t* magic = r.take(kEmbMagic.size());
  if (!std::equal(kEmbMagic.begin(), kEmbMagic.end(), reinterpret_cast<const char*>(magic)))
    throw FormatError("embeddings " + path.string() + ": bad header, not a PFEMB1 file");
  const std::uint32_t n = r.u32le(), d = r.u32le(), has_id = r.u32le();
  if (has_id > 1) throw FormatError("embeddings " + path.string() + ": has_identity flag must be 0 or 1");
  const std::size_t expect = std::size_t{n} * d * 4 + std::size_t{n} * 2 + (has_id ? std::size_t{n} * 4 : 0);
  if (r.remaining() != expect)
    throw FormatError("embeddings " + path.string() + ": payload is " + std::to_string(r.remaining()) +
                      " bytes, header implies " + std::to_string(expect));
  LabeledDataset ds;
  ds.features = Matrix(n, d);
  for (float& f : ds.features.flat()) f = r.f32le();
  ds.sensitive.resize(n);
  int max_s = -1;
  for (int& s : ds.sensitive) {
    s = r.u16le();
    max_s = std::max(max_s, s);
  }
  if (has_id) {
    ds.identity.emplace(n);
    for (int& id : *ds.identity) id = static_cast<int>(r.u32le());
  }
  ds.num_sensitive = static_cast<std::size_t>(max_s + 1);
  if (ds.num_sensitive == 0) ds.num_sensitive = 1;
  return ds;
}

void save_dataset_dir(const LabeledDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_embeddings(ds, dir / "data.pfemb");
  nlohmann::json meta;
  meta["sensitive_name"] = ds.sensitive_name;
  meta["num_sensitive"] = ds.num_sensitive;
  meta["n"] = ds.size();
  meta["dim"] = ds.dim();
  if (ds.image) meta["image_shape"] = {ds.image->height, ds.image->width, ds.image->channels};
  std::ofstream(dir / "dataset.json") << meta.dump(2) << "\n";
}

LabeledDataset load_dataset_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    // A bare PFEMB1 file is accepted as well.
    if (std::filesystem::is_regular_file(dir)) return load_embeddings(dir);
    throw ValidationError("dataset not found: " + dir.string());
  }
  LabeledDataset ds = load_embeddings(dir / "data.pfemb");
  const auto meta_path = dir / "dataset.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    nlohmann::json meta;
    try {
      meta = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(meta_path.string() + ": " + e.what());
    }
    ds.sensitive_name = meta.value("sensitive_name", ds.sensitive_name);
    ds.num_sensitive = std::max(ds.num_sensitive, meta.value("num_sensitive", std::size_t{0}));
    if (meta.contains("image_shape")) {
      const auto& s = meta["image_shape"];
      ds.image = ImageShape{s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>(), s.at(2).get<std::size_t>()};
    }
  }
  ds.validate();
  return ds;
}

double gaussian_pair_mi(double rho) {
  if (!(std::abs(rho) < 1.0)) throw ValidationError("correlated gaussians: |rho| must be < 1");
  return -0.5 * std::log1p(-rho * rho);
}

GaussianPairs sample_correlated_gaussians(double rho, std::size_t n, std::uint64_t seed) {
  GaussianPairs out;
  out.rho = rho;
  out.analytic_mi = gaussian_pair_mi(rho);
  if (n == 0) throw ValidationError("correlated gaussians: n must be >= 1");
  Rng rng(derive_seed(seed, "gaussian-pairs"));
  const double c = std::sqrt(1.0 - rho * rho);
  out.x = Matrix(n, 1);
  out.y = Matrix(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    out.x(i, 0) = static_cast<float>(a);
    out.y(i, 0) = static_cast<float>(rho * a + c * b);
  }
  return out;
}

std::vector<std::vector<std::size_t>> split_indices(const LabeledDataset& ds,
                                                    std::span<const double> fractions,
                                                    std::uint64_t seed) {
  if (fractions.empty()) throw ValidationError("split: need at least one fraction");
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ValidationError("split: fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("split: fractions must sum to 1");
  const std::size_t n = ds.size();

  // Target sizes: floor plus largest remainder.
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    sizes[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[i];
    rem.emplace_back(-(exact - static_cast<double>(sizes[i])), i);
  }
  std::stable_sort(rem.begin(), rem.end());
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[rem[k % rem.size()].second];

  // Shuffle within each class, then order all rows by their relative rank
  // inside their class. Contiguous blocks of that order are stratified.
  Rng rng(derive_seed(seed, "split"));
  std::vector<std::vector<std::size_t>> by_class(ds.num_sensitive);
  for (std::size_t i = 0; i < n; ++i) by_class.at(static_cast<std::size_t>(ds.sensitive[i])).push_back(i);
  std::vector<std::pair<double, std::size_t>> keyed;
  keyed.reserve(n);
  for (auto& members : by_class) {
    const auto perm = rng.permutation(members.size());
    const double offset = rng.uniform();
    for (std::size_t j = 0; j < members.size(); ++j)
      keyed.emplace_back((static_cast<double>(j) + offset) / static_cast<double>(members.size()), members[perm[j]]);
  }
  std::sort(keyed.begin(), keyed.end());

  std::vector<std::vector<std::size_t>> out(fractions.size());
  std::size_t pos = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    for (std::size_t k = 0; k < sizes[i]; ++k) out[i].push_back(keyed[pos++].second);
  return out;
}

std::vector<LabeledDataset> split(const LabeledDataset& ds, std::span<const double> fractions,
                                  std::uint64_t seed) {
  std::vector<LabeledDataset> out;
  for (const auto& idx : split_indices(ds, fractions, seed)) out.push_back(subset(ds, idx));
  return out;
}

}  // namespace pf::data
