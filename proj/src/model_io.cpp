#include "protost/model_io.hpp"

#include <cmath>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "protost/error.hpp"

namespace protost {

using nlohmann::json;

namespace {

constexpr char kBinaryPrefix[4] = {'M', 'D', 'L', 'B'};

void write_tree(const json& tree, const std::filesystem::path& path, Encoding enc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(bool(out), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  if (enc == Encoding::kBinary) {
    auto bytes = json::to_cbor(tree);
    out.write(kBinaryPrefix, sizeof kBinaryPrefix);
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  } else {
    out << tree.dump(1) << "\n";
  }
  require(bool(out), ErrorKind::kIo, "write failed for " + path.string());
}

json read_tree(const std::filesystem::path& path, const char* expected_kind) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::kIo, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(!bytes.empty(), ErrorKind::kFormat, path.string() + ": empty model file");
  json tree;
  try {
    if (bytes.size() >= 4 && bytes.compare(0, 4, kBinaryPrefix, 4) == 0)
      tree = json::from_cbor(bytes.begin() + 4, bytes.end());
    else
      tree = json::parse(bytes);
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
  require(tree.is_object(), ErrorKind::kFormat, path.string() + ": model file is not an object");
  require(tree.contains("schema_version"), ErrorKind::kVersion, path.string() + ": no schema_version");
  require(tree["schema_version"] == kModelSchemaVersion, ErrorKind::kVersion,
          path.string() + ": schema_version " + tree["schema_version"].dump() + " is not " +
              std::to_string(kModelSchemaVersion));
  if (expected_kind) {
    std::string kind = tree.value("kind", std::string());
    require(kind == expected_kind, ErrorKind::kFormat,
            path.string() + ": expected a '" + expected_kind + "' model, found '" + kind + "'");
  }
  return tree;
}

json header(const char* kind) { return {{"schema_version", kModelSchemaVersion}, {"kind", kind}}; }

template <typename F>
auto parse_fields(const std::filesystem::path& path, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

void validate_centroids(const CentroidModel& m) {
  for (const auto& c : m.centroids) {
    if (!c) continue;
    require(c->size() == m.dim, ErrorKind::kShape, "centroid length differs from model dim");
    for (double v : *c) require(std::isfinite(v), ErrorKind::kValidation, "non-finite centroid");
  }
}

}  // namespace

void save_model(const MapsModel& m, const std::filesystem::path& path, Encoding enc) {
  m.validate();
  json tree = header("maps");
  tree["dim"] = m.dim;
  json classes = json::array();
  for (const auto& c : m.classes) {
    if (!c) {
      classes.push_back(nullptr);
      continue;
    }
    json comps = json::array();
    for (const auto& k : c->components) comps.push_back({{"weight", k.weight}, {"mean", k.mean}, {"var", k.var}});
    classes.push_back({{"class_id", c->class_id}, {"components", comps}});
  }
  tree["classes"] = classes;
  write_tree(tree, path, enc);
}

MapsModel load_maps_model(const std::filesystem::path& path) {
  json tree = read_tree(path, "maps");
  MapsModel m = parse_fields(path, [&] {
    MapsModel out;
    out.dim = tree.at("dim").get<std::size_t>();
    for (const auto& c : tree.at("classes")) {
      if (c.is_null()) {
        out.classes.emplace_back();
        continue;
      }
      ClassGmm g;
      g.class_id = c.at("class_id").get<int>();
      g.dim = out.dim;
      for (const auto& k : c.at("components"))
        g.components.push_back({k.at("weight").get<double>(), k.at("mean").get<std::vector<double>>(),
                                k.at("var").get<std::vector<double>>()});
      out.classes.emplace_back(std::move(g));
    }
    return out;
  });
  m.validate();
  return m;
}

void save_model(const PrototypeSet& m, const std::filesystem::path& path, Encoding enc) {
  m.validate();
  json tree = header("prototypes");
  tree["dim"] = m.dim;
  tree["centers"] = m.centers;
  write_tree(tree, path, enc);
}

PrototypeSet load_prototypes(const std::filesystem::path& path) {
  json tree = read_tree(path, "prototypes");
  PrototypeSet m = parse_fields(path, [&] {
    return PrototypeSet{tree.at("dim").get<std::size_t>(), tree.at("centers").get<std::vector<double>>()};
  });
  m.validate();
  return m;
}

void save_model(const CentroidModel& m, const std::filesystem::path& path, Encoding enc) {
  validate_centroids(m);
  json tree = header("centroids");
  tree["dim"] = m.dim;
  json cs = json::array();
  for (const auto& c : m.centroids) cs.push_back(c ? json(*c) : json(nullptr));
  tree["centroids"] = cs;
  write_tree(tree, path, enc);
}

CentroidModel load_centroids(const std::filesystem::path& path) {
  json tree = read_tree(path, "centroids");
  CentroidModel m = parse_fields(path, [&] {
    CentroidModel out;
    out.dim = tree.at("dim").get<std::size_t>();
    for (const auto& c : tree.at("centroids")) {
      if (c.is_null())
        out.centroids.emplace_back();
      else
        out.centroids.emplace_back(c.get<std::vector<double>>());
    }
    return out;
  });
  validate_centroids(m);
  return m;
}

void save_model(const ToyModel& m, const std::filesystem::path& path, Encoding enc) {
  m.params.validate();
  const auto& p = m.params;
  json tree = header("toy");
  tree["input_dim"] = p.input_dim;
  tree["hidden"] = p.hidden;
  tree["classes"] = p.classes;
  tree["w1"] = p.w1;
  tree["b1"] = p.b1;
  tree["w2"] = p.w2;
  tree["b2"] = p.b2;
  tree["optimizer"] = {{"lr", m.optim.lr},
                       {"momentum", m.optim.momentum},
                       {"weight_decay", m.optim.weight_decay},
                       {"poly_power", m.optim.poly_power}};
  write_tree(tree, path, enc);
}

ToyModel load_toy_model(const std::filesystem::path& path) {
  json tree = read_tree(path, "toy");
  ToyModel m = parse_fields(path, [&] {
    ToyModel out;
    auto& p = out.params;
    p.input_dim = tree.at("input_dim").get<std::uint32_t>();
    p.hidden = tree.at("hidden").get<std::uint32_t>();
    p.classes = tree.at("classes").get<std::uint32_t>();
    p.w1 = tree.at("w1").get<std::vector<double>>();
    p.b1 = tree.at("b1").get<std::vector<double>>();
    p.w2 = tree.at("w2").get<std::vector<double>>();
    p.b2 = tree.at("b2").get<std::vector<double>>();
    const auto& o = tree.at("optimizer");
    out.optim = {o.at("lr").get<double>(), o.at("momentum").get<double>(), o.at("weight_decay").get<double>(),
                 o.at("poly_power").get<double>()};
    return out;
  });
  m.params.validate();
  return m;
}

std::string model_kind(const std::filesystem::path& path) {
  return read_tree(path, nullptr).value("kind", std::string());
}

}  // namespace protost
