#include "protost/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "protost/clustering.hpp"
#include "protost/error.hpp"
#include "protost/model_io.hpp"
#include "protost/pla.hpp"
#include "protost/stm.hpp"
#include "protost/toyseg.hpp"

namespace protost {

namespace fs = std::filesystem;

ArtifactLayout::ArtifactLayout(const PipelineConfig& cfg)
    : out(cfg.paths.out), world(cfg.world.dir.empty() ? fs::path(cfg.paths.out) / "world" : fs::path(cfg.world.dir)) {}

namespace {

std::string num(double v, const char* fmt = "%.6f") {
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::string indexed(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%03zu%s", prefix, i, ext);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(bool(out), ErrorKind::kIo, "cannot write " + path.string());
  out << text;
}

void need(const fs::path& path, const char* producer) {
  require(fs::exists(path), ErrorKind::kPrerequisite,
          "missing " + path.string() + "; run '" + producer + "' first");
}

struct Loaded {
  WorldSpec spec;
  World world;
  int classes() const { return spec.num_classes(); }
};

Loaded load_world(const ArtifactLayout& layout) {
  need(layout.world / "manifest.json", "gen-bench");
  Loaded l;
  l.world = read_world(layout.world, &l.spec);
  require(!l.world.source_features.empty() && !l.world.target_features.empty(), ErrorKind::kEmptyInput,
          "world needs source and target maps");
  return l;
}

ToyModel load_warmup(const ArtifactLayout& layout) {
  need(layout.model("warmup"), "warmup");
  return load_toy_model(layout.model("warmup"));
}

// Features the prototype machinery sees for one map.
FeatureMap prototype_features(const ToyModel& model, const FeatureMap& input, FeatureSource source) {
  if (source == FeatureSource::kInput) return input;
  return predict(model, input).hidden;
}

std::vector<SourceSample> source_samples(const ToyModel& model, const World& w, FeatureSource source) {
  std::vector<SourceSample> out;
  for (std::size_t m = 0; m < w.source_features.size(); ++m) {
    auto pred = predict(model, w.source_features[m]);
    FeatureMap feat = source == FeatureSource::kInput ? w.source_features[m] : std::move(pred.hidden);
    out.push_back({std::move(feat), std::move(pred.probs), w.source_labels[m]});
  }
  return out;
}

MapsConfig maps_config(const PipelineConfig& cfg, std::size_t components) {
  MapsConfig mc;
  mc.em.components = components;
  mc.em.var_floor = cfg.gmm.var_floor;
  mc.em.tol = cfg.gmm.tol;
  mc.em.max_iter = cfg.gmm.max_iter;
  mc.em.cap = cfg.gmm.cap;
  mc.em.seed = cfg.seeds.em_seed();
  mc.min_samples = cfg.gmm.min_samples;
  return mc;
}

std::vector<PseudoLabelMap> maps_labels(const MapsModel& maps, const ToyModel& model, const World& w,
                                        FeatureSource source, double delta) {
  std::vector<PseudoLabelMap> out;
  for (const auto& f : w.target_features)
    out.push_back(assign_maps_pla(maps, prototype_features(model, f, source), delta));
  return out;
}

EvalReport score_labels(std::span<const PseudoLabelMap> pls, const World& w, int classes) {
  std::vector<LabelMap> preds;
  for (const auto& p : pls) preds.push_back(p.as_label_map());
  return evaluate(preds, w.target_labels, classes);
}

EvalReport score_model(const ToyModel& model, const World& w, int classes) {
  std::vector<LabelMap> preds;
  for (const auto& f : w.target_features) preds.push_back(argmax_labels(predict(model, f).probs));
  return evaluate(preds, w.target_labels, classes);
}

OptimizerSettings optimizer(const PipelineConfig& cfg) {
  return {cfg.optim.lr, cfg.optim.momentum, cfg.optim.weight_decay, cfg.optim.poly_power};
}

TrainConfig train_config(const PipelineConfig& cfg, bool self) {
  TrainConfig tc;
  tc.iterations = self ? cfg.optim.self_iterations : cfg.optim.warmup_iterations;
  tc.batch_size = self ? cfg.optim.self_batch : cfg.optim.warmup_batch;
  tc.seed = self ? cfg.seeds.train_seed() : cfg.seeds.warmup_seed();
  tc.lambda = cfg.loss.lambda;
  tc.ema = cfg.loss.ema;
  tc.alpha = cfg.loss.alpha;
  tc.beta = cfg.loss.beta;
  tc.noise_scale = cfg.loss.noise_scale;
  tc.cutout_fraction = cfg.loss.cutout_fraction;
  return tc;
}

std::string train_log_csv(const std::vector<StepLog>& log) {
  std::ostringstream os;
  os << "step,lr,ce,sce,consist,total\n";
  for (const auto& s : log)
    os << s.step << "," << num(s.lr, "%.9g") << "," << num(s.ce, "%.9g") << "," << num(s.sce, "%.9g") << ","
       << num(s.consist, "%.9g") << "," << num(s.total, "%.9g") << "\n";
  return os.str();
}

// Unit weights (0 on ignore pixels), used when STM is switched off.
TransferabilityMap unit_weights(const LabelMap& gt) {
  TransferabilityMap tm{gt.height, gt.width, std::vector<double>(gt.pixels(), 1.0)};
  for (std::size_t i = 0; i < gt.pixels(); ++i)
    if (gt.labels[i] == kIgnoreLabel) tm.weights[i] = 0.0;
  return tm;
}

std::vector<TransferabilityMap> load_stms(const PipelineConfig& cfg, const ArtifactLayout& layout, const World& w) {
  std::vector<TransferabilityMap> out;
  for (std::size_t m = 0; m < w.source_labels.size(); ++m) {
    if (!cfg.stm.enabled) {
      out.push_back(unit_weights(w.source_labels[m]));
      continue;
    }
    auto path = layout.stm_dir() / indexed("source", m, ".wmap");
    need(path, "compute-stm");
    out.push_back(load_transferability_map(path));
  }
  return out;
}

TrainResult self_train(const PipelineConfig& cfg, const ToyModel& warm, const World& w,
                       const std::vector<TransferabilityMap>& stms, const std::vector<PseudoLabelMap>& pls) {
  std::vector<WeightedSourceMap> source;
  for (std::size_t m = 0; m < w.source_features.size(); ++m)
    source.push_back({w.source_features[m], w.source_labels[m], stms[m]});
  std::vector<PseudoLabeledMap> target;
  for (std::size_t m = 0; m < w.target_features.size(); ++m) target.push_back({w.target_features[m], pls[m]});
  ToyModel start{warm.params, optimizer(cfg)};
  return train_self(start, source, target, train_config(cfg, true));
}

// Radius whose acceptance ratio over `dists` is as close to `ratio` as ties allow.
double radius_for_ratio(std::vector<double> dists, double ratio) {
  if (dists.empty() || ratio <= 0.0) return -1.0;
  std::sort(dists.begin(), dists.end());
  auto k = static_cast<std::size_t>(std::llround(ratio * double(dists.size())));
  k = std::clamp<std::size_t>(k, 1, dists.size());
  return dists[k - 1];
}

}  // namespace

void cmd_gen_bench(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  require(cfg.world.dir.empty(), ErrorKind::kValidation, "gen-bench writes under paths.out; unset world.dir");
  WorldSpec spec;
  if (!cfg.world.spec_file.empty()) {
    std::ifstream in(cfg.world.spec_file);
    require(bool(in), ErrorKind::kIo, "cannot read world spec " + cfg.world.spec_file);
    std::stringstream ss;
    ss << in.rdbuf();
    spec = world_spec_from_json(ss.str());
  } else {
    spec = preset_world(cfg.world.preset);
  }
  if (cfg.seeds.world) spec.seed = *cfg.seeds.world;
  else if (cfg.seeds.base != 0) spec.seed += cfg.seeds.base;
  write_world(generate_world(spec), spec, layout.world);
}

void cmd_warmup(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  std::vector<LabeledMap> source;
  for (std::size_t m = 0; m < l.world.source_features.size(); ++m)
    source.push_back({l.world.source_features[m], l.world.source_labels[m]});
  auto model = make_toy_model(l.spec.dim, cfg.model.hidden, std::uint32_t(l.classes()), cfg.seeds.init_seed(),
                              optimizer(cfg));
  auto result = train_warmup(model, source, train_config(cfg, false));
  fs::create_directories(layout.out / "models");
  save_model(result.model, layout.model("warmup"), cfg.model.encoding);
  write_text(layout.out / "train_log_warmup.csv", train_log_csv(result.log));
}

void cmd_fit_maps(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  auto samples = source_samples(warm, l.world, cfg.pla.feature_source);
  auto maps = build_maps(samples, l.classes(), maps_config(cfg, cfg.gmm.components));
  auto cents = build_centroids(samples, l.classes());
  save_model(maps, layout.model("maps"), cfg.model.encoding);
  save_model(cents, layout.model("centroids"), cfg.model.encoding);
  std::ostringstream os;
  os << "class,present,components\n";
  for (int c = 0; c < maps.num_classes(); ++c)
    os << c << "," << (maps.present(c) ? 1 : 0) << ","
       << (maps.present(c) ? maps.classes[std::size_t(c)]->components.size() : 0) << "\n";
  write_text(layout.out / "maps_summary.csv", os.str());
}

void cmd_assign_pl(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  need(layout.model("maps"), "fit-maps");
  auto maps = load_maps_model(layout.model("maps"));
  auto warm = load_warmup(layout);
  auto pls = maps_labels(maps, warm, l.world, cfg.pla.feature_source, cfg.gmm.delta);
  fs::create_directories(layout.pl_dir());
  for (std::size_t m = 0; m < pls.size(); ++m)
    save_label_map(pls[m].as_label_map(), layout.pl_dir() / indexed("target", m, ".lmap"));
  auto rep = score_labels(pls, l.world, l.classes());
  std::ostringstream os;
  os << "strategy,threshold,pl_ratio,accuracy\n";
  os << "maps," << num(cfg.gmm.delta) << "," << num(pl_ratio(pls)) << "," << num(rep.accuracy) << "\n";
  write_text(layout.out / "pl_summary.csv", os.str());
}

void cmd_fit_target_protos(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  FeatureSet points;
  for (const auto& f : l.world.target_features) {
    auto feat = prototype_features(warm, f, cfg.stm.feature_source);
    if (points.dim == 0) points.dim = feat.dim;
    for (std::size_t i = 0; i < feat.pixels(); ++i) points.push_back(feat.pixel(i));
  }
  KMeansOptions ko;
  ko.clusters = std::min(cfg.kmeans.clusters, points.size());
  ko.seed = cfg.seeds.kmeans_seed();
  ko.max_iter = cfg.kmeans.max_iter;
  ko.tol = cfg.kmeans.tol;
  auto fit = kmeans_fit(points, ko);
  save_model(fit.prototypes, layout.model("target_protos"), cfg.model.encoding);
  std::ostringstream os;
  os << "clusters,dim,iterations,objective\n";
  os << fit.prototypes.count() << "," << fit.prototypes.dim << "," << fit.iterations << ","
     << num(fit.objective.empty() ? 0.0 : fit.objective.back(), "%.9g") << "\n";
  write_text(layout.out / "target_protos.csv", os.str());
}

void cmd_compute_stm(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  need(layout.model("target_protos"), "fit-target-protos");
  auto protos = load_prototypes(layout.model("target_protos"));

  // Entropy is grouped by the warmup model's own argmax on target maps.
  std::vector<ProbMap> preds;
  std::vector<LabelMap> groups;
  for (const auto& f : l.world.target_features) {
    preds.push_back(predict(warm, f).probs);
    groups.push_back(argmax_labels(preds.back()));
  }
  auto stats = class_entropy(preds, groups);

  std::vector<DistanceMap> dmaps;
  for (const auto& f : l.world.source_features)
    dmaps.push_back(distance_map(prototype_features(warm, f, cfg.stm.feature_source), protos));
  auto dm = mean_distance(dmaps, l.world.source_labels);
  if (dm.degenerate) std::fprintf(stderr, "warning: mean source distance is degenerate; floored\n");

  fs::create_directories(layout.stm_dir());
  double weight_sum = 0.0;
  std::size_t weight_n = 0;
  for (std::size_t m = 0; m < dmaps.size(); ++m) {
    auto tm = transferability_map(dmaps[m], l.world.source_labels[m], stats, dm.value);
    save_transferability_map(tm, layout.stm_dir() / indexed("source", m, ".wmap"));
    for (std::size_t i = 0; i < tm.pixels(); ++i) {
      if (l.world.source_labels[m].labels[i] == kIgnoreLabel) continue;
      weight_sum += static_cast<float>(tm.weights[i]);
      ++weight_n;
    }
  }
  std::ostringstream es;
  es << "class,count,mean_entropy,normalized\n";
  for (int c = 0; c < stats.classes(); ++c)
    es << c << "," << stats.counts[std::size_t(c)] << "," << num(stats.mean_entropy[std::size_t(c)], "%.9g") << ","
       << num(stats.normalized[std::size_t(c)], "%.9g") << "\n";
  write_text(layout.out / "entropy.csv", es.str());
  std::ostringstream ss;
  ss << "d_mean,degenerate,mean_weight\n"
     << num(dm.value, "%.9g") << "," << (dm.degenerate ? 1 : 0) << ","
     << num(weight_n ? weight_sum / double(weight_n) : 0.0, "%.9g") << "\n";
  write_text(layout.out / "stm_summary.csv", ss.str());
}

void cmd_self_train(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  std::vector<PseudoLabelMap> pls;
  for (std::size_t m = 0; m < l.world.target_features.size(); ++m) {
    auto path = layout.pl_dir() / indexed("target", m, ".lmap");
    need(path, "assign-pl");
    auto lm = load_label_map(path);
    lm.validate(l.classes());
    pls.push_back({lm.height, lm.width, std::move(lm.labels), cfg.gmm.delta, l.classes()});
  }
  auto stms = load_stms(cfg, layout, l.world);
  auto result = self_train(cfg, warm, l.world, stms, pls);
  save_model(result.model, layout.model("self"), cfg.model.encoding);
  write_text(layout.out / "train_log.csv", train_log_csv(result.log));
}

std::vector<EvalSummary> cmd_evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  need(layout.model("warmup"), "warmup");
  std::vector<EvalSummary> out;
  for (const char* tag : {"warmup", "self"}) {
    if (!fs::exists(layout.model(tag))) continue;
    out.push_back({tag, score_model(load_toy_model(layout.model(tag)), l.world, l.classes())});
  }
  std::string csv;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto part = eval_report_csv(out[i].report, out[i].tag);
    csv += i == 0 ? part : part.substr(part.find('\n') + 1);
  }
  write_text(layout.out / "eval.csv", csv);
  return out;
}

EvalReport evaluate_label_files(const fs::path& pred, const fs::path& truth, int classes) {
  auto p = load_label_map(pred);
  auto t = load_label_map(truth);
  if (classes <= 0) {
    int hi = -1;
    for (auto v : t.labels) hi = std::max(hi, int(v));
    for (auto v : p.labels) hi = std::max(hi, int(v));
    classes = std::max(hi + 1, 1);
  }
  return evaluate(p, t, classes);
}

std::vector<EvalSummary> cmd_run_all(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.world.dir.empty()) cmd_gen_bench(cfg);
  cmd_warmup(cfg);
  cmd_fit_maps(cfg);
  cmd_assign_pl(cfg);
  cmd_fit_target_protos(cfg);
  if (cfg.stm.enabled) cmd_compute_stm(cfg);
  cmd_self_train(cfg);
  return cmd_evaluate(cfg);
}

std::vector<SweepDeltaRow> cmd_sweep_delta(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  need(layout.model("maps"), "fit-maps");
  auto maps = load_maps_model(layout.model("maps"));
  auto stms = load_stms(cfg, layout, l.world);
  std::vector<SweepDeltaRow> rows;
  for (double delta : cfg.sweep.deltas) {
    auto pls = maps_labels(maps, warm, l.world, cfg.pla.feature_source, delta);
    auto rep = score_labels(pls, l.world, l.classes());
    auto trained = self_train(cfg, warm, l.world, stms, pls);
    rows.push_back({delta, pl_ratio(pls), rep.accuracy, score_model(trained.model, l.world, l.classes()).miou});
  }
  std::ostringstream os;
  os << "delta,pl_ratio,pl_accuracy,miou\n";
  for (const auto& r : rows)
    os << num(r.delta) << "," << num(r.pl_ratio) << "," << num(r.pl_accuracy) << "," << num(r.miou) << "\n";
  write_text(layout.out / "sweep_delta.csv", os.str());
  return rows;
}

std::vector<SweepKRow> cmd_sweep_k(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  auto stms = load_stms(cfg, layout, l.world);
  auto samples = source_samples(warm, l.world, cfg.pla.feature_source);
  std::vector<SweepKRow> rows;
  for (std::size_t k : cfg.sweep.ks) {
    auto maps = build_maps(samples, l.classes(), maps_config(cfg, k));
    auto pls = maps_labels(maps, warm, l.world, cfg.pla.feature_source, cfg.gmm.delta);
    auto rep = score_labels(pls, l.world, l.classes());
    auto trained = self_train(cfg, warm, l.world, stms, pls);
    rows.push_back({k, pl_ratio(pls), rep.accuracy, score_model(trained.model, l.world, l.classes()).miou});
  }
  std::ostringstream os;
  os << "k,pl_ratio,pl_accuracy,miou\n";
  for (const auto& r : rows)
    os << r.k << "," << num(r.pl_ratio) << "," << num(r.pl_accuracy) << "," << num(r.miou) << "\n";
  write_text(layout.out / "sweep_k.csv", os.str());
  return rows;
}

std::vector<BenchRow> cmd_bench_pla(const PipelineConfig& cfg) {
  cfg.validate();
  ArtifactLayout layout(cfg);
  auto l = load_world(layout);
  auto warm = load_warmup(layout);
  need(layout.model("maps"), "fit-maps");
  auto maps = load_maps_model(layout.model("maps"));
  auto cents = load_centroids(layout.model("centroids"));

  std::vector<FeatureMap> feats;
  std::vector<ProbMap> probs;
  for (const auto& f : l.world.target_features) {
    auto pred = predict(warm, f);
    feats.push_back(cfg.pla.feature_source == FeatureSource::kInput ? f : std::move(pred.hidden));
    probs.push_back(std::move(pred.probs));
  }
  std::vector<double> cas_dists;
  for (const auto& f : feats) {
    std::vector<double> row(f.dim);
    for (std::size_t i = 0; i < f.pixels(); ++i) {
      auto p = f.pixel(i);
      std::copy(p.begin(), p.end(), row.begin());
      cas_dists.push_back(nearest_centroid(cents, row).score);
    }
  }

  std::vector<BenchRow> rows;
  auto add = [&](const std::string& name, double thr, const std::vector<PseudoLabelMap>& pls) {
    rows.push_back({name, thr, pl_ratio(pls), score_labels(pls, l.world, l.classes()).accuracy});
  };
  auto run_cas = [&](double thr) {
    std::vector<PseudoLabelMap> pls;
    for (const auto& f : feats) pls.push_back(assign_cas_pla(cents, f, thr));
    return pls;
  };
  for (double d : cfg.pla.maps_deltas) {
    std::vector<PseudoLabelMap> pls;
    for (const auto& f : feats) pls.push_back(assign_maps_pla(maps, f, d));
    add("maps", d, pls);
    double r = radius_for_ratio(cas_dists, rows.back().pl_ratio);
    add("cas-matched", r, run_cas(r));
  }
  for (double t : cfg.pla.cas_thresholds) add("cas", t, run_cas(t));
  for (double t : cfg.pla.conf_thresholds) {
    std::vector<PseudoLabelMap> pls;
    for (const auto& p : probs) pls.push_back(assign_conf_pla(p, t));
    add("conf", t, pls);
  }
  std::ostringstream os;
  os << "strategy,threshold,pl_ratio,pl_accuracy\n";
  for (const auto& r : rows)
    os << r.strategy << "," << num(r.threshold, "%.9g") << "," << num(r.pl_ratio) << "," << num(r.pl_accuracy)
       << "\n";
  write_text(layout.out / "bench_pla.csv", os.str());
  return rows;
}

}  // namespace protost
