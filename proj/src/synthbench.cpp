#include "protost/synthbench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

#include "protost/error.hpp"

namespace protost {

using nlohmann::json;

bool DomainShift::identity() const {
  if (rotation != 0.0) return false;
  for (double t : translation)
    if (t != 0.0) return false;
  return true;
}

namespace {

void validate_cluster(const ClusterSpec& c, std::uint32_t dim, const std::string& where) {
  require(c.mean.size() == dim && c.stddev.size() == dim, ErrorKind::kValidation, where + ": cluster dim mismatch");
  require(c.weight > 0.0, ErrorKind::kValidation, where + ": cluster weight must be positive");
  for (double s : c.stddev) require(s > 0.0, ErrorKind::kValidation, where + ": stddev must be positive");
}

void validate_shift(const DomainShift& s, std::uint32_t dim, const std::string& where) {
  require(s.translation.empty() || s.translation.size() == dim, ErrorKind::kValidation,
          where + ": translation dim mismatch");
  require(s.rotation == 0.0 || dim >= 2, ErrorKind::kValidation, where + ": rotation needs at least two axes");
}

template <typename T>
std::size_t pick_weighted(std::mt19937_64& rng, const std::vector<T>& items, double (*weight)(const T&)) {
  double total = 0.0;
  for (const auto& it : items) total += weight(it);
  std::uniform_real_distribution<double> u(0.0, total);
  double r = u(rng), acc = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    acc += weight(items[i]);
    if (r < acc) return i;
  }
  return items.size() - 1;
}

double class_weight(const ClassSpec& c) { return c.frequency; }
double cluster_weight(const ClusterSpec& c) { return c.weight; }

void apply_shift(const DomainShift& s, std::span<float> f) {
  if (s.rotation != 0.0) {
    double c = std::cos(s.rotation), sn = std::sin(s.rotation);
    double x = f[0], y = f[1];
    f[0] = static_cast<float>(c * x - sn * y);
    f[1] = static_cast<float>(sn * x + c * y);
  }
  for (std::size_t k = 0; k < s.translation.size(); ++k) f[k] = static_cast<float>(f[k] + s.translation[k]);
}

struct MapDraw {
  FeatureMap features;
  LabelMap labels;
  std::vector<std::uint8_t> hard;
};

MapDraw draw_map(const WorldSpec& spec, std::uint64_t stream, bool source) {
  std::mt19937_64 rng(spec.seed * 0x9E3779B97F4A7C15ULL + stream);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  MapDraw out{FeatureMap(spec.height, spec.width, spec.dim), LabelMap(spec.height, spec.width, 0),
              std::vector<std::uint8_t>(std::size_t(spec.height) * spec.width, 0)};

  for (std::uint32_t by = 0; by < spec.height; by += spec.block) {
    for (std::uint32_t bx = 0; bx < spec.width; bx += spec.block) {
      int label = 0;
      const ClusterSpec* cluster = nullptr;
      bool hard = false;
      if (source) {
        for (const auto& h : spec.hard_regions) {
          if (unit(rng) < h.fraction) {
            label = h.label;
            cluster = &h.cluster;
            hard = true;
            break;
          }
        }
      }
      if (!cluster) {
        label = static_cast<int>(pick_weighted(rng, spec.classes, &class_weight));
        const auto& cs = spec.classes[std::size_t(label)].clusters;
        cluster = &cs[pick_weighted(rng, cs, &cluster_weight)];
      }
      const DomainShift* shift = nullptr;
      if (!source) {
        auto it = spec.class_shift.find(label);
        shift = it != spec.class_shift.end() ? &it->second : &spec.shift;
      }
      for (std::uint32_t y = by; y < std::min(by + spec.block, spec.height); ++y) {
        for (std::uint32_t x = bx; x < std::min(bx + spec.block, spec.width); ++x) {
          std::size_t i = std::size_t(y) * spec.width + x;
          auto f = out.features.pixel(i);
          for (std::uint32_t k = 0; k < spec.dim; ++k)
            f[k] = static_cast<float>(cluster->mean[k] + cluster->stddev[k] * gauss(rng));
          if (shift) apply_shift(*shift, f);
          out.labels.labels[i] = label;
          out.hard[i] = hard ? 1 : 0;
        }
      }
    }
  }
  return out;
}

// --- JSON ------------------------------------------------------------------

json cluster_json(const ClusterSpec& c) { return {{"mean", c.mean}, {"stddev", c.stddev}, {"weight", c.weight}}; }
ClusterSpec cluster_from(const json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("stddev").get<std::vector<double>>(), j.value("weight", 1.0)};
}
json shift_json(const DomainShift& s) { return {{"translation", s.translation}, {"rotation", s.rotation}}; }
DomainShift shift_from(const json& j) {
  return {j.value("translation", std::vector<double>{}), j.value("rotation", 0.0)};
}

}  // namespace

void WorldSpec::validate() const {
  require(dim >= 1 && dim <= 32, ErrorKind::kValidation, "world dim must lie in [1, 32]");
  require(!classes.empty(), ErrorKind::kValidation, "world needs at least one class");
  require(height > 0 && width > 0 && block > 0, ErrorKind::kValidation, "map and block sizes must be positive");
  require(source_maps > 0 && target_maps > 0, ErrorKind::kValidation, "world needs source and target maps");
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::string where = "class " + std::to_string(c);
    require(!classes[c].clusters.empty(), ErrorKind::kValidation, where + " has no clusters");
    require(classes[c].frequency > 0.0, ErrorKind::kValidation, where + " frequency must be positive");
    for (const auto& cl : classes[c].clusters) validate_cluster(cl, dim, where);
  }
  validate_shift(shift, dim, "global shift");
  for (const auto& [c, s] : class_shift) {
    require(c >= 0 && c < num_classes(), ErrorKind::kValidation, "class shift for unknown class");
    validate_shift(s, dim, "class shift");
  }
  for (const auto& h : hard_regions) {
    require(h.label >= 0 && h.label < num_classes(), ErrorKind::kValidation, "hard region with unknown label");
    require(h.fraction >= 0.0 && h.fraction <= 1.0, ErrorKind::kValidation, "hard region fraction outside [0, 1]");
    validate_cluster(h.cluster, dim, "hard region");
  }
}

World generate_world(const WorldSpec& spec) {
  spec.validate();
  World w;
  for (std::uint32_t m = 0; m < spec.source_maps; ++m) {
    auto d = draw_map(spec, 2 * std::uint64_t(m), true);
    w.source_features.push_back(std::move(d.features));
    w.source_labels.push_back(std::move(d.labels));
    w.source_hard_mask.push_back(std::move(d.hard));
  }
  for (std::uint32_t m = 0; m < spec.target_maps; ++m) {
    auto d = draw_map(spec, 2 * std::uint64_t(m) + 1, false);
    w.target_features.push_back(std::move(d.features));
    w.target_labels.push_back(std::move(d.labels));
  }
  return w;
}

std::string world_spec_to_json(const WorldSpec& s) {
  json classes = json::array();
  for (const auto& c : s.classes) {
    json clusters = json::array();
    for (const auto& cl : c.clusters) clusters.push_back(cluster_json(cl));
    classes.push_back({{"clusters", clusters}, {"frequency", c.frequency}});
  }
  json class_shift = json::object();
  for (const auto& [c, sh] : s.class_shift) class_shift[std::to_string(c)] = shift_json(sh);
  json hard = json::array();
  for (const auto& h : s.hard_regions)
    hard.push_back({{"label", h.label}, {"cluster", cluster_json(h.cluster)}, {"fraction", h.fraction}});
  json j = {{"name", s.name},
            {"dim", s.dim},
            {"classes", classes},
            {"shift", shift_json(s.shift)},
            {"class_shift", class_shift},
            {"hard_regions", hard},
            {"height", s.height},
            {"width", s.width},
            {"block", s.block},
            {"source_maps", s.source_maps},
            {"target_maps", s.target_maps},
            {"seed", s.seed}};
  return j.dump(2);
}

WorldSpec world_spec_from_json(const std::string& text) {
  WorldSpec s;
  try {
    json j = json::parse(text);
    s.name = j.value("name", std::string("custom"));
    s.dim = j.at("dim").get<std::uint32_t>();
    for (const auto& c : j.at("classes")) {
      ClassSpec cs;
      cs.frequency = c.value("frequency", 1.0);
      for (const auto& cl : c.at("clusters")) cs.clusters.push_back(cluster_from(cl));
      s.classes.push_back(std::move(cs));
    }
    if (j.contains("shift")) s.shift = shift_from(j.at("shift"));
    if (j.contains("class_shift"))
      for (const auto& [k, v] : j.at("class_shift").items()) s.class_shift[std::stoi(k)] = shift_from(v);
    if (j.contains("hard_regions"))
      for (const auto& h : j.at("hard_regions"))
        s.hard_regions.push_back({h.at("label").get<int>(), cluster_from(h.at("cluster")), h.value("fraction", 0.1)});
    s.height = j.value("height", s.height);
    s.width = j.value("width", s.width);
    s.block = j.value("block", s.block);
    s.source_maps = j.value("source_maps", s.source_maps);
    s.target_maps = j.value("target_maps", s.target_maps);
    s.seed = j.value("seed", s.seed);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, std::string("world spec: ") + e.what());
  }
  s.validate();
  return s;
}

namespace {

ClusterSpec iso(std::vector<double> mean, double sd, double weight = 1.0) {
  std::vector<double> s(mean.size(), sd);
  return {std::move(mean), std::move(s), weight};
}

}  // namespace

std::vector<std::string> preset_names() { return {"figure1", "aniso", "hard", "shifted"}; }

WorldSpec preset_world(const std::string& name) {
  WorldSpec s;
  s.name = name;
  s.dim = 2;
  if (name == "figure1") {
    s.classes = {{{iso({-4, 0}, 1.0), iso({4, 0}, 1.0)}, 1.0}, {{iso({0, 0}, 1.0)}, 1.0}};
    s.shift = {{0.0, 0.5}, 0.15};
    s.seed = 11;
  } else if (name == "aniso") {
    const double wide = std::sqrt(10.0);
    s.classes = {{{iso({0, 0}, wide)}, 1.0}, {{iso({3, 0}, 1.0)}, 1.0}};
    s.seed = 12;
  } else if (name == "hard") {
    s.classes = {{{iso({0, 3}, 0.7)}, 1.0}, {{iso({-2.6, -1.5}, 0.7)}, 1.0}, {{iso({2.6, -1.5}, 0.7)}, 1.0}};
    s.hard_regions = {{0, iso({12, 12}, 0.7), 0.15}};
    s.shift = {{}, 0.3};
    s.seed = 13;
  } else if (name == "shifted") {
    s.classes = {{{iso({0, 3}, 0.7)}, 1.0}, {{iso({-2.6, -1.5}, 0.7)}, 1.0}, {{iso({2.6, -1.5}, 0.7)}, 1.0}};
    s.shift = {{}, 0.8};
    s.seed = 14;
  } else {
    fail(ErrorKind::kConfig, "unknown world preset '" + name + "'");
  }
  s.validate();
  return s;
}

void write_world(const World& world, const WorldSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json pairs = json::array();
  char buf[64];
  for (std::size_t m = 0; m < world.source_features.size(); ++m) {
    std::snprintf(buf, sizeof buf, "source_%03zu", m);
    save_feature_map(world.source_features[m], dir / (std::string(buf) + ".fmap"));
    save_label_map(world.source_labels[m], dir / (std::string(buf) + ".lmap"));
    pairs.push_back({{"domain", "source"}, {"features", std::string(buf) + ".fmap"}, {"labels", std::string(buf) + ".lmap"}});
  }
  for (std::size_t m = 0; m < world.target_features.size(); ++m) {
    std::snprintf(buf, sizeof buf, "target_%03zu", m);
    save_feature_map(world.target_features[m], dir / (std::string(buf) + ".fmap"));
    save_label_map(world.target_labels[m], dir / (std::string(buf) + ".lmap"));
    pairs.push_back({{"domain", "target"}, {"features", std::string(buf) + ".fmap"}, {"labels", std::string(buf) + ".lmap"}});
  }
  json manifest = {{"schema_version", 1}, {"pairs", pairs}, {"spec", json::parse(world_spec_to_json(spec))}};
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  require(bool(out), ErrorKind::kIo, "cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << "\n";
}

World read_world(const std::filesystem::path& dir, WorldSpec* spec) {
  auto path = dir / "manifest.json";
  require(std::filesystem::exists(path), ErrorKind::kPrerequisite,
          "no world manifest at " + path.string() + " (run gen-bench)");
  std::ifstream in(path);
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  require(manifest.value("schema_version", 0) == 1, ErrorKind::kVersion, path.string() + ": unsupported schema_version");
  if (spec) *spec = world_spec_from_json(manifest.at("spec").dump());
  World w;
  for (const auto& p : manifest.at("pairs")) {
    auto feat = load_feature_map(dir / p.at("features").get<std::string>());
    auto lab = load_label_map(dir / p.at("labels").get<std::string>());
    if (p.at("domain") == "source") {
      w.source_features.push_back(std::move(feat));
      w.source_labels.push_back(std::move(lab));
    } else {
      w.target_features.push_back(std::move(feat));
      w.target_labels.push_back(std::move(lab));
    }
  }
  return w;
}

EvalReport evaluate(std::span<const LabelMap> preds, std::span<const LabelMap> truth, int classes) {
  require(preds.size() == truth.size(), ErrorKind::kShape, "prediction and truth lists differ in length");
  require(classes >= 1, ErrorKind::kConfig, "class count must be positive");
  const auto C = std::size_t(classes);
  EvalReport r;
  r.classes = classes;
  r.confusion.assign(C * C, 0);
  r.ignored.assign(C, 0);
  std::uint64_t evaluated = 0, labeled = 0, correct = 0;
  for (std::size_t m = 0; m < preds.size(); ++m) {
    require(preds[m].height == truth[m].height && preds[m].width == truth[m].width, ErrorKind::kShape,
            "prediction and truth resolutions differ");
    for (std::size_t i = 0; i < truth[m].pixels(); ++i) {
      int t = truth[m].labels[i];
      if (t == kIgnoreLabel) continue;
      int p = preds[m].labels[i];
      require(t >= 0 && t < classes, ErrorKind::kUnknownClass, "truth label outside class range");
      require(p == kIgnoreLabel || (p >= 0 && p < classes), ErrorKind::kUnknownClass, "predicted label outside class range");
      ++evaluated;
      if (p == kIgnoreLabel) {
        ++r.ignored[std::size_t(t)];
        continue;
      }
      ++labeled;
      correct += (p == t);
      ++r.confusion[std::size_t(t) * C + std::size_t(p)];
    }
  }
  r.accuracy = labeled ? double(correct) / double(labeled) : 0.0;
  r.coverage = evaluated ? double(labeled) / double(evaluated) : 0.0;
  r.iou.assign(C, std::numeric_limits<double>::quiet_NaN());
  r.present.assign(C, false);
  double sum = 0.0;
  int n = 0;
  for (std::size_t c = 0; c < C; ++c) {
    std::uint64_t tp = r.confusion[c * C + c], fp = 0, fn = r.ignored[c];
    std::uint64_t truth_total = r.ignored[c];
    for (std::size_t k = 0; k < C; ++k) {
      truth_total += r.confusion[c * C + k];
      if (k == c) continue;
      fn += r.confusion[c * C + k];
      fp += r.confusion[k * C + c];
    }
    if (truth_total == 0) continue;
    r.present[c] = true;
    r.iou[c] = double(tp) / double(tp + fp + fn);
    sum += r.iou[c];
    ++n;
  }
  r.miou = n ? sum / n : 0.0;
  return r;
}

EvalReport evaluate(const LabelMap& pred, const LabelMap& truth, int classes) {
  return evaluate(std::span<const LabelMap>(&pred, 1), std::span<const LabelMap>(&truth, 1), classes);
}

std::string eval_report_csv(const EvalReport& r, const std::string& tag) {
  std::ostringstream os;
  os.precision(6);
  os << std::fixed;
  os << "tag,metric,class,value\n";
  os << tag << ",accuracy,all," << r.accuracy << "\n";
  os << tag << ",coverage,all," << r.coverage << "\n";
  os << tag << ",miou,all," << r.miou << "\n";
  for (int c = 0; c < r.classes; ++c)
    if (r.present[std::size_t(c)]) os << tag << ",iou," << c << "," << r.iou[std::size_t(c)] << "\n";
  return os.str();
}

std::string eval_report_text(const EvalReport& r) {
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "mIoU " << r.miou << "  accuracy " << r.accuracy << "  coverage " << r.coverage << "\n";
  for (int c = 0; c < r.classes; ++c) {
    os << "  class " << c << ": ";
    if (r.present[std::size_t(c)])
      os << "IoU " << r.iou[std::size_t(c)] << "\n";
    else
      os << "absent\n";
  }
  return os.str();
}

}  // namespace protost
