#include "protost/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "protost/error.hpp"

namespace protost {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& raw) {
  std::string s = trim(raw);
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw std::invalid_argument("'" + raw + "' is not a valid number");
  if constexpr (std::is_floating_point_v<T>)
    if (!std::isfinite(v)) throw std::invalid_argument("'" + raw + "' is not finite");
  return v;
}

bool parse_bool(const std::string& raw) {
  std::string s = trim(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("'" + raw + "' is not a boolean");
}

template <typename T>
std::vector<T> parse_list(const std::string& raw) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

FeatureSource parse_source(const std::string& raw) {
  std::string s = trim(raw);
  if (s == "latent") return FeatureSource::kLatent;
  if (s == "input") return FeatureSource::kInput;
  throw std::invalid_argument("'" + raw + "' is not latent|input");
}

Encoding parse_encoding(const std::string& raw) {
  std::string s = trim(raw);
  if (s == "text") return Encoding::kText;
  if (s == "binary") return Encoding::kBinary;
  throw std::invalid_argument("'" + raw + "' is not text|binary");
}

using Setter = std::function<void(PipelineConfig&, const std::string&)>;

template <typename T, typename Member>
Setter num(Member m) {
  return [m](PipelineConfig& c, const std::string& v) { std::invoke(m, c) = parse_number<T>(v); };
}

const std::map<std::string, Setter>& setters() {
  using C = PipelineConfig;
  static const std::map<std::string, Setter> table = {
      {"world.preset", [](C& c, const std::string& v) { c.world.preset = trim(v); }},
      {"world.spec_file", [](C& c, const std::string& v) { c.world.spec_file = trim(v); }},
      {"world.dir", [](C& c, const std::string& v) { c.world.dir = trim(v); }},
      {"paths.out", [](C& c, const std::string& v) { c.paths.out = trim(v); }},
      {"model.hidden", num<std::uint32_t>([](C& c) -> auto& { return c.model.hidden; })},
      {"model.encoding", [](C& c, const std::string& v) { c.model.encoding = parse_encoding(v); }},
      {"gmm.components", num<std::size_t>([](C& c) -> auto& { return c.gmm.components; })},
      {"gmm.delta", num<double>([](C& c) -> auto& { return c.gmm.delta; })},
      {"gmm.cap", num<std::size_t>([](C& c) -> auto& { return c.gmm.cap; })},
      {"gmm.var_floor", num<double>([](C& c) -> auto& { return c.gmm.var_floor; })},
      {"gmm.tol", num<double>([](C& c) -> auto& { return c.gmm.tol; })},
      {"gmm.max_iter", num<int>([](C& c) -> auto& { return c.gmm.max_iter; })},
      {"gmm.min_samples", num<std::size_t>([](C& c) -> auto& { return c.gmm.min_samples; })},
      {"kmeans.clusters", num<std::size_t>([](C& c) -> auto& { return c.kmeans.clusters; })},
      {"kmeans.tol", num<double>([](C& c) -> auto& { return c.kmeans.tol; })},
      {"kmeans.max_iter", num<int>([](C& c) -> auto& { return c.kmeans.max_iter; })},
      {"loss.alpha", num<double>([](C& c) -> auto& { return c.loss.alpha; })},
      {"loss.beta", num<double>([](C& c) -> auto& { return c.loss.beta; })},
      {"loss.lambda", num<double>([](C& c) -> auto& { return c.loss.lambda; })},
      {"loss.ema", num<double>([](C& c) -> auto& { return c.loss.ema; })},
      {"loss.noise_scale", num<double>([](C& c) -> auto& { return c.loss.noise_scale; })},
      {"loss.cutout_fraction", num<double>([](C& c) -> auto& { return c.loss.cutout_fraction; })},
      {"optim.lr", num<double>([](C& c) -> auto& { return c.optim.lr; })},
      {"optim.momentum", num<double>([](C& c) -> auto& { return c.optim.momentum; })},
      {"optim.weight_decay", num<double>([](C& c) -> auto& { return c.optim.weight_decay; })},
      {"optim.poly_power", num<double>([](C& c) -> auto& { return c.optim.poly_power; })},
      {"optim.warmup_iterations", num<int>([](C& c) -> auto& { return c.optim.warmup_iterations; })},
      {"optim.warmup_batch", num<std::size_t>([](C& c) -> auto& { return c.optim.warmup_batch; })},
      {"optim.self_iterations", num<int>([](C& c) -> auto& { return c.optim.self_iterations; })},
      {"optim.self_batch", num<std::size_t>([](C& c) -> auto& { return c.optim.self_batch; })},
      {"pla.feature_source", [](C& c, const std::string& v) { c.pla.feature_source = parse_source(v); }},
      {"pla.maps_deltas", [](C& c, const std::string& v) { c.pla.maps_deltas = parse_list<double>(v); }},
      {"pla.cas_thresholds", [](C& c, const std::string& v) { c.pla.cas_thresholds = parse_list<double>(v); }},
      {"pla.conf_thresholds", [](C& c, const std::string& v) { c.pla.conf_thresholds = parse_list<double>(v); }},
      {"stm.enabled", [](C& c, const std::string& v) { c.stm.enabled = parse_bool(v); }},
      {"stm.feature_source", [](C& c, const std::string& v) { c.stm.feature_source = parse_source(v); }},
      {"sweep.deltas", [](C& c, const std::string& v) { c.sweep.deltas = parse_list<double>(v); }},
      {"sweep.ks", [](C& c, const std::string& v) { c.sweep.ks = parse_list<std::size_t>(v); }},
      {"seeds.base", num<std::uint64_t>([](C& c) -> auto& { return c.seeds.base; })},
      {"seeds.world", [](C& c, const std::string& v) { c.seeds.world = parse_number<std::uint64_t>(v); }},
      {"seeds.init", [](C& c, const std::string& v) { c.seeds.init = parse_number<std::uint64_t>(v); }},
      {"seeds.warmup", [](C& c, const std::string& v) { c.seeds.warmup = parse_number<std::uint64_t>(v); }},
      {"seeds.em", [](C& c, const std::string& v) { c.seeds.em = parse_number<std::uint64_t>(v); }},
      {"seeds.kmeans", [](C& c, const std::string& v) { c.seeds.kmeans = parse_number<std::uint64_t>(v); }},
      {"seeds.train", [](C& c, const std::string& v) { c.seeds.train = parse_number<std::uint64_t>(v); }},
  };
  return table;
}

// Returns an error message, or empty on success.
std::string try_apply(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  auto it = setters().find(key);
  if (it == setters().end()) return key + ": unknown key";
  try {
    it->second(cfg, value);
  } catch (const std::exception& e) {
    return key + ": " + e.what();
  }
  return {};
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    if constexpr (std::is_floating_point_v<T>)
      out += fmt_double(xs[i]);
    else
      out += std::to_string(xs[i]);
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  std::vector<std::string> bad;
  auto check = [&](bool ok, const char* field, const char* rule) {
    if (!ok) bad.push_back(std::string(field) + " " + rule);
  };
  check(!world.preset.empty() || !world.spec_file.empty() || !world.dir.empty(), "world.preset",
        "needs a preset, spec_file or dir");
  check(!paths.out.empty(), "paths.out", "must not be empty");
  check(model.hidden >= 1, "model.hidden", "must be >= 1");
  check(gmm.components >= 1, "gmm.components", "must be >= 1");
  check(gmm.cap >= 1, "gmm.cap", "must be >= 1");
  check(gmm.var_floor > 0.0, "gmm.var_floor", "must be > 0");
  check(gmm.tol > 0.0, "gmm.tol", "must be > 0");
  check(gmm.max_iter >= 1, "gmm.max_iter", "must be >= 1");
  check(kmeans.clusters >= 1, "kmeans.clusters", "must be >= 1");
  check(kmeans.tol > 0.0, "kmeans.tol", "must be > 0");
  check(kmeans.max_iter >= 1, "kmeans.max_iter", "must be >= 1");
  check(loss.alpha >= 0.0, "loss.alpha", "must be >= 0");
  check(loss.beta >= 0.0, "loss.beta", "must be >= 0");
  check(loss.lambda >= 0.0, "loss.lambda", "must be >= 0");
  check(loss.ema >= 0.0 && loss.ema <= 1.0, "loss.ema", "must lie in [0, 1]");
  check(loss.noise_scale >= 0.0, "loss.noise_scale", "must be >= 0");
  check(loss.cutout_fraction >= 0.0 && loss.cutout_fraction < 1.0, "loss.cutout_fraction", "must lie in [0, 1)");
  check(optim.lr > 0.0, "optim.lr", "must be > 0");
  check(optim.momentum >= 0.0 && optim.momentum < 1.0, "optim.momentum", "must lie in [0, 1)");
  check(optim.weight_decay >= 0.0, "optim.weight_decay", "must be >= 0");
  check(optim.poly_power >= 0.0, "optim.poly_power", "must be >= 0");
  check(optim.warmup_iterations >= 0, "optim.warmup_iterations", "must be >= 0");
  check(optim.warmup_batch >= 1, "optim.warmup_batch", "must be >= 1");
  check(optim.self_iterations >= 0, "optim.self_iterations", "must be >= 0");
  check(optim.self_batch >= 1, "optim.self_batch", "must be >= 1");
  for (double t : pla.cas_thresholds) check(t >= 0.0, "pla.cas_thresholds", "entries must be >= 0");
  for (double t : pla.conf_thresholds) check(t > 0.0 && t <= 1.0, "pla.conf_thresholds", "entries must lie in (0, 1]");
  for (std::size_t k : sweep.ks) check(k >= 1, "sweep.ks", "entries must be >= 1");
  if (bad.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& b : bad) msg += "\n  " + b;
  fail(ErrorKind::kValidation, msg);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  PipelineConfig cfg;
  std::vector<std::string> errors;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      errors.push_back(section + ": key outside any section");
      continue;
    }
    for (const auto& [key, node] : body) {
      auto err = try_apply(cfg, section + "." + key, node.data());
      if (!err.empty()) errors.push_back(err);
    }
  }
  if (!errors.empty()) {
    std::string msg = path.string() + ":";
    for (const auto& e : errors) msg += "\n  " + e;
    fail(ErrorKind::kValidation, msg);
  }
  return cfg;
}

void apply_override(PipelineConfig& cfg, const std::string& assignment) {
  auto eq = assignment.find('=');
  require(eq != std::string::npos, ErrorKind::kValidation, "override '" + assignment + "' is not section.key=value");
  auto err = try_apply(cfg, trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
  require(err.empty(), ErrorKind::kValidation, err);
}

std::string render_config(const PipelineConfig& c) {
  std::ostringstream os;
  auto src = [](FeatureSource s) { return s == FeatureSource::kLatent ? "latent" : "input"; };
  auto opt = [&](const char* key, const std::optional<std::uint64_t>& v) {
    if (v) os << key << " = " << *v << "\n";
  };
  os << "[world]\npreset = " << c.world.preset << "\n";
  if (!c.world.spec_file.empty()) os << "spec_file = " << c.world.spec_file << "\n";
  if (!c.world.dir.empty()) os << "dir = " << c.world.dir << "\n";
  os << "\n[paths]\nout = " << c.paths.out << "\n";
  os << "\n[model]\nhidden = " << c.model.hidden
     << "\nencoding = " << (c.model.encoding == Encoding::kText ? "text" : "binary") << "\n";
  os << "\n[gmm]\ncomponents = " << c.gmm.components << "\ndelta = " << fmt_double(c.gmm.delta)
     << "\ncap = " << c.gmm.cap << "\nvar_floor = " << fmt_double(c.gmm.var_floor)
     << "\ntol = " << fmt_double(c.gmm.tol) << "\nmax_iter = " << c.gmm.max_iter
     << "\nmin_samples = " << c.gmm.min_samples << "\n";
  os << "\n[kmeans]\nclusters = " << c.kmeans.clusters << "\ntol = " << fmt_double(c.kmeans.tol)
     << "\nmax_iter = " << c.kmeans.max_iter << "\n";
  os << "\n[loss]\nalpha = " << fmt_double(c.loss.alpha) << "\nbeta = " << fmt_double(c.loss.beta)
     << "\nlambda = " << fmt_double(c.loss.lambda) << "\nema = " << fmt_double(c.loss.ema)
     << "\nnoise_scale = " << fmt_double(c.loss.noise_scale)
     << "\ncutout_fraction = " << fmt_double(c.loss.cutout_fraction) << "\n";
  os << "\n[optim]\nlr = " << fmt_double(c.optim.lr) << "\nmomentum = " << fmt_double(c.optim.momentum)
     << "\nweight_decay = " << fmt_double(c.optim.weight_decay)
     << "\npoly_power = " << fmt_double(c.optim.poly_power)
     << "\nwarmup_iterations = " << c.optim.warmup_iterations << "\nwarmup_batch = " << c.optim.warmup_batch
     << "\nself_iterations = " << c.optim.self_iterations << "\nself_batch = " << c.optim.self_batch << "\n";
  os << "\n[pla]\nfeature_source = " << src(c.pla.feature_source) << "\nmaps_deltas = " << join(c.pla.maps_deltas)
     << "\ncas_thresholds = " << join(c.pla.cas_thresholds) << "\nconf_thresholds = " << join(c.pla.conf_thresholds)
     << "\n";
  os << "\n[stm]\nenabled = " << (c.stm.enabled ? "true" : "false")
     << "\nfeature_source = " << src(c.stm.feature_source) << "\n";
  os << "\n[sweep]\ndeltas = " << join(c.sweep.deltas) << "\nks = " << join(c.sweep.ks) << "\n";
  os << "\n[seeds]\nbase = " << c.seeds.base << "\n";
  opt("world", c.seeds.world);
  opt("init", c.seeds.init);
  opt("warmup", c.seeds.warmup);
  opt("em", c.seeds.em);
  opt("kmeans", c.seeds.kmeans);
  opt("train", c.seeds.train);
  return os.str();
}

}  // namespace protost
