#include "protost/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "binary_io.hpp"
#include "protost/error.hpp"

namespace protost {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kLength: return "length error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kVersion: return "version error";
    case ErrorKind::kShape: return "shape error";
    case ErrorKind::kInsufficientData: return "insufficient data";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kEmptyModel: return "empty model";
    case ErrorKind::kUnknownClass: return "unknown class";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kPrerequisite: return "missing prerequisite";
    case ErrorKind::kNumeric: return "numeric failure";
    case ErrorKind::kIo: return "i/o error";
  }
  return "error";
}

void FeatureMap::validate() const {
  require(data.size() == pixels() * dim, ErrorKind::kLength, "feature map data length does not match H*W*d");
  for (float v : data)
    require(std::isfinite(v), ErrorKind::kValidation, "feature map contains a non-finite entry");
}

void LabelMap::validate(int classes) const {
  require(labels.size() == pixels(), ErrorKind::kLength, "label map length does not match H*W");
  if (classes <= 0) return;
  for (auto l : labels)
    require(l == kIgnoreLabel || (l >= 0 && l < classes), ErrorKind::kValidation,
            "label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
}

void ProbMap::validate(double tol) const {
  require(probs.size() == pixels() * classes, ErrorKind::kLength, "prob map length does not match H*W*C");
  for (std::size_t i = 0; i < pixels(); ++i) {
    double s = 0.0;
    for (double p : pixel(i)) {
      require(std::isfinite(p) && p >= 0.0, ErrorKind::kValidation, "negative or non-finite probability");
      s += p;
    }
    require(std::abs(s - 1.0) <= tol, ErrorKind::kValidation,
            "probabilities at pixel " + std::to_string(i) + " sum to " + std::to_string(s));
  }
}

int argmax(const ProbMap& pm, std::size_t i) {
  auto row = pm.pixel(i);
  return static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
}

LabelMap argmax_labels(const ProbMap& pm) {
  LabelMap out(pm.height, pm.width);
  for (std::size_t i = 0; i < pm.pixels(); ++i) out.labels[i] = argmax(pm, i);
  return out;
}

void save_feature_map(const FeatureMap& fm, const std::filesystem::path& path) {
  fm.validate();
  detail::ByteWriter w;
  w.magic("FMAP");
  w.u8(kMapFormatVersion);
  w.u32(fm.height);
  w.u32(fm.width);
  w.u32(fm.dim);
  for (float v : fm.data) w.f32(v);
  w.write_to(path);
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("FMAP");
  r.expect_version(kMapFormatVersion);
  FeatureMap fm;
  fm.height = r.header_u32();
  fm.width = r.header_u32();
  fm.dim = r.header_u32();
  r.expect_payload_words(std::uint64_t(fm.height) * fm.width * fm.dim);
  fm.data.resize(fm.pixels() * fm.dim);
  for (auto& v : fm.data) v = r.f32();
  fm.validate();
  return fm;
}

void save_label_map(const LabelMap& lm, const std::filesystem::path& path) {
  lm.validate();
  detail::ByteWriter w;
  w.magic("LMAP");
  w.u8(kMapFormatVersion);
  w.u32(lm.height);
  w.u32(lm.width);
  for (auto l : lm.labels) w.i32(l);
  w.write_to(path);
}

LabelMap load_label_map(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("LMAP");
  r.expect_version(kMapFormatVersion);
  LabelMap lm;
  lm.height = r.header_u32();
  lm.width = r.header_u32();
  r.expect_payload_words(std::uint64_t(lm.height) * lm.width);
  lm.labels.resize(lm.pixels());
  for (auto& l : lm.labels) {
    l = r.i32();
    require(l >= kIgnoreLabel, ErrorKind::kValidation, r.path() + ": label below the ignore sentinel");
  }
  return lm;
}

void save_prob_map(const ProbMap& pm, const std::filesystem::path& path) {
  require(pm.probs.size() == pm.pixels() * pm.classes, ErrorKind::kLength, "prob map length does not match H*W*C");
  detail::ByteWriter w;
  w.magic("PMAP");
  w.u8(kMapFormatVersion);
  w.u32(pm.height);
  w.u32(pm.width);
  w.u32(pm.classes);
  for (double p : pm.probs) w.f32(static_cast<float>(p));
  w.write_to(path);
}

ProbMap load_prob_map(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic("PMAP");
  r.expect_version(kMapFormatVersion);
  ProbMap pm;
  pm.height = r.header_u32();
  pm.width = r.header_u32();
  pm.classes = r.header_u32();
  r.expect_payload_words(std::uint64_t(pm.height) * pm.width * pm.classes);
  pm.probs.resize(pm.pixels() * pm.classes);
  for (auto& p : pm.probs) p = r.f32();
  pm.validate();
  return pm;
}

namespace {

// Source coordinate of destination index `dst` under half-pixel alignment.
double source_coord(std::uint32_t dst, std::uint32_t in, std::uint32_t out) {
  double x = (dst + 0.5) * double(in) / double(out) - 0.5;
  return std::clamp(x, 0.0, double(in - 1));
}

}  // namespace

FeatureMap resize(const FeatureMap& fm, std::uint32_t height, std::uint32_t width, Interpolation mode) {
  require(fm.height > 0 && fm.width > 0, ErrorKind::kShape, "cannot resize an empty feature map");
  require(height > 0 && width > 0, ErrorKind::kShape, "target resolution must be positive");
  FeatureMap out(height, width, fm.dim);
  for (std::uint32_t y = 0; y < height; ++y) {
    double sy = source_coord(y, fm.height, height);
    for (std::uint32_t x = 0; x < width; ++x) {
      double sx = source_coord(x, fm.width, width);
      auto dst = out.pixel(std::size_t(y) * width + x);
      if (mode == Interpolation::kNearest) {
        auto ny = static_cast<std::uint32_t>(std::lround(sy));
        auto nx = static_cast<std::uint32_t>(std::lround(sx));
        auto src = fm.pixel(std::size_t(ny) * fm.width + nx);
        std::copy(src.begin(), src.end(), dst.begin());
        continue;
      }
      auto y0 = static_cast<std::uint32_t>(std::floor(sy));
      auto x0 = static_cast<std::uint32_t>(std::floor(sx));
      std::uint32_t y1 = std::min(y0 + 1, fm.height - 1);
      std::uint32_t x1 = std::min(x0 + 1, fm.width - 1);
      double ty = sy - y0, tx = sx - x0;
      auto p00 = fm.pixel(std::size_t(y0) * fm.width + x0);
      auto p01 = fm.pixel(std::size_t(y0) * fm.width + x1);
      auto p10 = fm.pixel(std::size_t(y1) * fm.width + x0);
      auto p11 = fm.pixel(std::size_t(y1) * fm.width + x1);
      for (std::uint32_t k = 0; k < fm.dim; ++k) {
        double top = (1 - tx) * p00[k] + tx * p01[k];
        double bottom = (1 - tx) * p10[k] + tx * p11[k];
        dst[k] = static_cast<float>((1 - ty) * top + ty * bottom);
      }
    }
  }
  return out;
}

FeatureMap align_to(const FeatureMap& fm, const LabelMap& labels, Interpolation mode) {
  if (fm.height == labels.height && fm.width == labels.width) return fm;
  return resize(fm, labels.height, labels.width, mode);
}

}  // namespace protost
