#pragma once

// Per-pixel maps and their binary interchange formats.
//
// All map files are little-endian: a four byte magic, a u8 version (1), the
// u32 dimensions, then the payload in row-major pixel order with the channel
// index varying fastest.
//
//   FMAP  H W d   then H*W*d float32
//   LMAP  H W     then H*W   int32   (-1 = ignore)
//   PMAP  H W C   then H*W*C float32

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace protost {

inline constexpr std::int32_t kIgnoreLabel = -1;
inline constexpr std::uint8_t kMapFormatVersion = 1;

struct FeatureMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t dim = 0;
  std::vector<float> data;

  FeatureMap() = default;
  FeatureMap(std::uint32_t h, std::uint32_t w, std::uint32_t d)
      : height(h), width(w), dim(d), data(std::size_t(h) * w * d, 0.0f) {}

  std::size_t pixels() const { return std::size_t(height) * width; }
  std::span<const float> pixel(std::size_t i) const { return {data.data() + i * dim, dim}; }
  std::span<float> pixel(std::size_t i) { return {data.data() + i * dim, dim}; }

  /// Throws kLength / kValidation when the invariants do not hold.
  void validate() const;

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;
};

struct LabelMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::vector<std::int32_t> labels;

  LabelMap() = default;
  LabelMap(std::uint32_t h, std::uint32_t w, std::int32_t fill = kIgnoreLabel)
      : height(h), width(w), labels(std::size_t(h) * w, fill) {}

  std::size_t pixels() const { return std::size_t(height) * width; }

  /// Checks size and, when classes > 0, that every label is -1 or in [0, classes).
  void validate(int classes = 0) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

struct ProbMap {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t classes = 0;
  std::vector<double> probs;

  ProbMap() = default;
  ProbMap(std::uint32_t h, std::uint32_t w, std::uint32_t c)
      : height(h), width(w), classes(c), probs(std::size_t(h) * w * c, 0.0) {}

  std::size_t pixels() const { return std::size_t(height) * width; }
  std::span<const double> pixel(std::size_t i) const { return {probs.data() + i * classes, classes}; }
  std::span<double> pixel(std::size_t i) { return {probs.data() + i * classes, classes}; }

  /// Row sums must equal 1 within `tol` and entries must be non-negative.
  void validate(double tol = 1e-6) const;

  friend bool operator==(const ProbMap&, const ProbMap&) = default;
};

/// Index of the largest probability at pixel i; ties go to the lowest class.
int argmax(const ProbMap& pm, std::size_t i);
LabelMap argmax_labels(const ProbMap& pm);

/// A flat set of d-dimensional samples held in double precision.
struct FeatureSet {
  std::size_t dim = 0;
  std::vector<double> values;

  FeatureSet() = default;
  explicit FeatureSet(std::size_t d) : dim(d) {}

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  bool empty() const { return values.empty(); }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  void push_back(std::span<const float> f) { values.insert(values.end(), f.begin(), f.end()); }
  void push_back(std::span<const double> f) { values.insert(values.end(), f.begin(), f.end()); }
};

void save_feature_map(const FeatureMap& fm, const std::filesystem::path& path);
FeatureMap load_feature_map(const std::filesystem::path& path);

void save_label_map(const LabelMap& lm, const std::filesystem::path& path);
LabelMap load_label_map(const std::filesystem::path& path);

/// Probabilities are stored as float32, so a round trip is exact only for
/// float-representable inputs.
void save_prob_map(const ProbMap& pm, const std::filesystem::path& path);
ProbMap load_prob_map(const std::filesystem::path& path);

enum class Interpolation { kBilinear, kNearest };

/// Resamples a feature map to height x width using half-pixel centres.
FeatureMap resize(const FeatureMap& fm, std::uint32_t height, std::uint32_t width, Interpolation mode);

/// Brings `fm` to the resolution of `labels` (no-op when they already agree).
FeatureMap align_to(const FeatureMap& fm, const LabelMap& labels,
                    Interpolation mode = Interpolation::kBilinear);

}  // namespace protost
