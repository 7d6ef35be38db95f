#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "protost/error.hpp"
#include "protost/synthbench.hpp"

using namespace protost;

TEST(GenerateWorld, IdenticalDomainsWithoutShift) {
  WorldSpec s;
  s.classes = {{{{{1.0, -2.0}, {1.0, 2.0}, 1.0}}, 1.0}};
  auto w = generate_world(s);
  for (std::size_t k = 0; k < 2; ++k) {
    double ms = 0, mt = 0;
    std::size_t n = 0;
    for (std::size_t m = 0; m < w.source_features.size(); ++m)
      for (std::size_t i = 0; i < w.source_features[m].pixels(); ++i, ++n) {
        ms += w.source_features[m].pixel(i)[k];
        mt += w.target_features[m].pixel(i)[k];
      }
    double sd = s.classes[0].clusters[0].stddev[k];
    // Difference of two independent means: sd * sqrt(2 / n).
    EXPECT_LT(std::abs(ms / n - mt / n), 4 * sd * std::sqrt(2.0 / double(n)));
  }
}

TEST(GenerateWorld, FigureOneClusterMeans) {
  auto s = preset_world("figure1");
  auto w = generate_world(s);
  double sum[2] = {0, 0};
  std::size_t cnt[2] = {0, 0};
  for (std::size_t m = 0; m < w.source_features.size(); ++m)
    for (std::size_t i = 0; i < w.source_features[m].pixels(); ++i) {
      if (w.source_labels[m].labels[i] != 0) continue;
      double x = w.source_features[m].pixel(i)[0];
      int side = x > 0;
      sum[side] += x;
      ++cnt[side];
    }
  ASSERT_GT(cnt[0], 100u);
  ASSERT_GT(cnt[1], 100u);
  EXPECT_NEAR(sum[0] / cnt[0], -4.0, 4.0 / std::sqrt(double(cnt[0])) + 0.05);
  EXPECT_NEAR(sum[1] / cnt[1], 4.0, 4.0 / std::sqrt(double(cnt[1])) + 0.05);
}

TEST(GenerateWorld, PlantedMomentsRecovered) {
  WorldSpec s;
  s.classes = {{{{{2.0, 5.0}, {0.5, 1.5}, 1.0}}, 1.0}, {{{{-3.0, 0.0}, {1.0, 1.0}, 1.0}}, 1.0}};
  auto w = generate_world(s);
  for (int c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < 2; ++k) {
      double sum = 0, sq = 0;
      std::size_t n = 0;
      for (std::size_t m = 0; m < w.source_features.size(); ++m)
        for (std::size_t i = 0; i < w.source_features[m].pixels(); ++i)
          if (w.source_labels[m].labels[i] == c) {
            double x = w.source_features[m].pixel(i)[k];
            sum += x, sq += x * x, ++n;
          }
      const auto& cl = s.classes[std::size_t(c)].clusters[0];
      double mean = sum / n, sd = cl.stddev[k];
      EXPECT_NEAR(mean, cl.mean[k], 4 * sd / std::sqrt(double(n)));
      EXPECT_NEAR(std::sqrt(sq / n - mean * mean), sd, 4 * sd / std::sqrt(2.0 * n));
    }
}

TEST(GenerateWorld, BlocksAreContiguous) {
  auto s = preset_world("shifted");
  auto w = generate_world(s);
  const auto& lm = w.source_labels[0];
  for (std::uint32_t y = 0; y < s.height; ++y)
    for (std::uint32_t x = 0; x < s.width; ++x) {
      std::uint32_t y0 = y / s.block * s.block, x0 = x / s.block * s.block;
      EXPECT_EQ(lm.labels[y * s.width + x], lm.labels[y0 * s.width + x0]);
    }
}

TEST(GenerateWorld, TargetIsRotatedSource) {
  WorldSpec s;
  s.classes = {{{{{3.0, 0.0}, {0.01, 0.01}, 1.0}}, 1.0}};
  s.shift = {{0.0, 1.0}, M_PI / 2};
  auto w = generate_world(s);
  double mx = 0, my = 0;
  const auto& t = w.target_features[0];
  for (std::size_t i = 0; i < t.pixels(); ++i) mx += t.pixel(i)[0], my += t.pixel(i)[1];
  EXPECT_NEAR(mx / t.pixels(), 0.0, 0.01);
  EXPECT_NEAR(my / t.pixels(), 4.0, 0.01);
}

TEST(GenerateWorld, HardRegionsAreFarFromTarget) {
  auto s = preset_world("hard");
  auto w = generate_world(s);
  std::size_t hard = 0;
  for (const auto& mask : w.source_hard_mask) hard += std::count(mask.begin(), mask.end(), 1);
  EXPECT_GT(hard, 0u);
  const auto& h = s.hard_regions[0].cluster;
  for (const auto& c : s.classes)
    for (const auto& cl : c.clusters) {
      double d = std::hypot(h.mean[0] - cl.mean[0], h.mean[1] - cl.mean[1]);
      EXPECT_GE(d, 8 * std::max(h.stddev[0], cl.stddev[0]));
    }
}

TEST(GenerateWorld, DeterministicBytes) {
  auto a = oracle::temp_dir("world_a"), b = oracle::temp_dir("world_b");
  auto s = preset_world("figure1");
  write_world(generate_world(s), s, a);
  write_world(generate_world(s), s, b);
  EXPECT_EQ(oracle::tree_bytes(a), oracle::tree_bytes(b));
}

TEST(GenerateWorld, InvalidSpecRejected) {
  WorldSpec s;
  EXPECT_THROW(generate_world(s), Error);
  s.classes = {{{{{0.0, 0.0}, {0.0, 1.0}, 1.0}}, 1.0}};
  EXPECT_THROW(generate_world(s), Error);
  s.classes = {{{}, 1.0}};
  EXPECT_THROW(generate_world(s), Error);
}

TEST(WorldIo, SpecJsonRoundTrip) {
  for (const auto& name : preset_names()) {
    auto s = preset_world(name);
    auto back = world_spec_from_json(world_spec_to_json(s));
    EXPECT_EQ(world_spec_to_json(back), world_spec_to_json(s));
  }
}

TEST(WorldIo, ReadBackMatches) {
  auto dir = oracle::temp_dir("world_rt");
  auto s = preset_world("hard");
  auto w = generate_world(s);
  write_world(w, s, dir);
  WorldSpec echo;
  auto r = read_world(dir, &echo);
  EXPECT_EQ(r.source_features, w.source_features);
  EXPECT_EQ(r.target_labels, w.target_labels);
  EXPECT_EQ(echo.num_classes(), 3);
}

TEST(Evaluate, IdentityAndComplement) {
  LabelMap t(2, 2, 0);
  t.labels = {0, 1, 1, 0};
  auto r = evaluate(t, t, 2);
  EXPECT_EQ(r.miou, 1.0);
  EXPECT_EQ(r.accuracy, 1.0);
  LabelMap c = t;
  for (auto& l : c.labels) l = 1 - l;
  auto rc = evaluate(c, t, 2);
  EXPECT_EQ(rc.iou[0], 0.0);
  EXPECT_EQ(rc.iou[1], 0.0);
}

TEST(Evaluate, MatchesConfusionOracle) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> lab(-1, 3);
  LabelMap p(8, 8, 0), t(8, 8, 0);
  for (std::size_t i = 0; i < 64; ++i) p.labels[i] = lab(rng), t.labels[i] = lab(rng);
  auto r = evaluate(p, t, 4);
  double sum = 0;
  int present = 0;
  std::size_t correct = 0, labeled = 0, evaluated = 0;
  for (int c = 0; c < 4; ++c) {
    std::size_t tp = 0, fp = 0, fn = 0, in_truth = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      if (t.labels[i] < 0) continue;
      bool pc = p.labels[i] == c, tc = t.labels[i] == c;
      in_truth += tc;
      tp += pc && tc;
      fp += pc && !tc;
      fn += tc && !pc;
    }
    if (in_truth == 0) {
      EXPECT_FALSE(r.present[std::size_t(c)]);
      continue;
    }
    double iou = double(tp) / double(tp + fp + fn);
    EXPECT_DOUBLE_EQ(r.iou[std::size_t(c)], iou);
    sum += iou;
    ++present;
  }
  for (std::size_t i = 0; i < 64; ++i) {
    if (t.labels[i] < 0) continue;
    ++evaluated;
    if (p.labels[i] < 0) continue;
    ++labeled;
    correct += p.labels[i] == t.labels[i];
  }
  EXPECT_DOUBLE_EQ(r.miou, sum / present);
  EXPECT_DOUBLE_EQ(r.accuracy, double(correct) / double(labeled));
  EXPECT_DOUBLE_EQ(r.coverage, double(labeled) / double(evaluated));
}

TEST(Evaluate, PermutationEquivariant) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> lab(0, 2);
  LabelMap p(6, 6, 0), t(6, 6, 0);
  for (std::size_t i = 0; i < 36; ++i) p.labels[i] = lab(rng), t.labels[i] = lab(rng);
  const int perm[3] = {2, 0, 1};
  LabelMap pp = p, tp = t;
  for (auto& l : pp.labels) l = perm[l];
  for (auto& l : tp.labels) l = perm[l];
  auto a = evaluate(p, t, 3), b = evaluate(pp, tp, 3);
  EXPECT_DOUBLE_EQ(a.miou, b.miou);
  for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(a.iou[std::size_t(c)], b.iou[std::size_t(perm[c])]);
}

TEST(Evaluate, ShapeMismatchThrows) {
  EXPECT_THROW(evaluate(LabelMap(2, 2, 0), LabelMap(2, 3, 0), 2), Error);
}

TEST(Evaluate, CsvHasHeader) {
  LabelMap t(1, 2, 0);
  t.labels = {0, 1};
  auto csv = eval_report_csv(evaluate(t, t, 2), "x");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "tag,metric,class,value");
}
