#pragma once
// Datasets: colored digits, correlated Gaussian pairs, IDX ingestion and the
// PFEMB1 embedding file.
//
// PFEMB1 layout (all integers and floats little-endian):
//   16 bytes   "PFEMB1" followed by 10 NUL bytes
//   uint32     n
//   uint32     d
//   uint32     has_identity (0 or 1)
//   n*d        float32 features, row-major
//   n          uint16 sensitive labels
//   n          uint32 identities (only when has_identity = 1)

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pf/infotheory.hpp"
#include "pf/tensor.hpp"

namespace pf::data {

struct ImageShape {
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t channels = 3;
  std::size_t size() const { return height * width * channels; }
  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

struct LabeledDataset {
  Matrix features;                           // n x d; images flattened HWC
  std::vector<int> sensitive;                // in [0, num_sensitive)
  std::optional<std::vector<int>> identity;  // e.g. digit class
  std::string sensitive_name = "s";
  std::size_t num_sensitive = 0;
  std::optional<ImageShape> image;  // set for image data, values in [0, 1]

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  // Throws ValidationError if any invariant is broken.
  void validate() const;
};

LabeledDataset subset(const LabeledDataset& ds, std::span<const std::size_t> rows);

enum class ColorLabel { red = 0, green = 1, blue = 2 };
enum class SensitiveKind { color, digit };
enum class DigitSource { synthetic_glyphs, idx_files };

// Non-selected channels keep this fraction of the grayscale intensity.
inline constexpr float kTintAttenuation = 0.15f;

struct ColoredDigitConfig {
  std::size_t n = 1000;
  info::Pmf color_pmf = info::Pmf::uniform(3);
  SensitiveKind sensitive = SensitiveKind::color;
  DigitSource source = DigitSource::synthetic_glyphs;
  std::filesystem::path idx_images;  // required for idx_files
  std::filesystem::path idx_labels;
  std::uint64_t seed = 0;
};

SensitiveKind parse_sensitive(std::string_view name);
std::string_view sensitive_name(SensitiveKind k);

// Tints a 28x28 grayscale image (values in [0,1]) into HWC RGB.
void tint(std::span<const float> gray, int color, std::span<float> rgb);

LabeledDataset generate_colored_digits(const ColoredDigitConfig& cfg);

// Generic IDX payload. Only unsigned-byte payloads (type code 0x08) are read.
struct IdxArray {
  std::uint32_t magic = 0;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> bytes;
};

IdxArray read_idx(const std::filesystem::path& path);
void write_idx(const std::filesystem::path& path, const IdxArray& arr);

struct IdxImages {
  std::size_t rows = 0, cols = 0;
  Matrix pixels;  // n x rows*cols, scaled to [0, 1]
};
// Requires magic 0x00000803.
IdxImages load_idx_images(const std::filesystem::path& path);
// Requires magic 0x00000801.
std::vector<int> load_idx_labels(const std::filesystem::path& path);

void save_embeddings(const LabeledDataset& ds, const std::filesystem::path& path);
LabeledDataset load_embeddings(const std::filesystem::path& path);

// A dataset directory holds data.pfemb plus dataset.json with the fields the
// binary file does not carry (sensitive name and cardinality, image shape).
void save_dataset_dir(const LabeledDataset& ds, const std::filesystem::path& dir);
LabeledDataset load_dataset_dir(const std::filesystem::path& dir);

struct GaussianPairs {
  Matrix x;  // n x 1
  Matrix y;  // n x 1
  double rho = 0.0;
  double analytic_mi = 0.0;  // -0.5 ln(1 - rho^2), nats
};

double gaussian_pair_mi(double rho);
GaussianPairs sample_correlated_gaussians(double rho, std::size_t n, std::uint64_t seed);

// Disjoint, exhaustive split stratified on the sensitive label. Split sizes
// are floor(f * n) with leftovers handed out by largest remainder.
std::vector<LabeledDataset> split(const LabeledDataset& ds, std::span<const double> fractions,
                                  std::uint64_t seed);
// Row indices of each split (same assignment as split()).
std::vector<std::vector<std::size_t>> split_indices(const LabeledDataset& ds,
                                                    std::span<const double> fractions,
                                                    std::uint64_t seed);

}  // namespace pf::data
