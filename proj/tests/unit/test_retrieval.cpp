#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "doctest.h"
#include "openvox/retrieval.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace openvox;
using testing::block;

namespace {

constexpr double kRes = 0.05;

TextEmbeddingTable axis_table(int classes) {
  TextEmbeddingTable t;
  t.dim = classes;
  for (int c = 0; c < classes; ++c) t.names.push_back("c" + std::to_string(c));
  t.embeddings.assign(static_cast<std::size_t>(classes) * classes, 0.0f);
  for (int c = 0; c < classes; ++c) t.embeddings[static_cast<std::size_t>(c) * classes + c] = 1.0f;
  return t;
}

Instance inst(std::uint64_t id, VoxelSet voxels, std::vector<float> semantic) {
  Instance i;
  i.id = id;
  i.voxels = std::move(voxels);
  i.semantic = {std::move(semantic), 1.0f};
  i.tracking = {1.0f};
  return i;
}

}  // namespace

TEST_SUITE("retrieval") {
  TEST_CASE("ranking orders by cosine then id") {
    auto map = InstanceMap::restore(kRes, {}, {inst(0, block(0, 0, 0, 1, 1, 1, kRes), {0, 1}),
                                               inst(1, block(9, 0, 0, 1, 1, 1, kRes), {1, 0}),
                                               inst(2, block(19, 0, 0, 1, 1, 1, kRes), {1, 0})},
                                    3);
    const std::vector<float> q{1, 0};
    const auto r = rank_instances(map, q, 2);
    REQUIRE(r.size() == 2);
    CHECK(r[0].id == 1);
    CHECK(r[1].id == 2);
    CHECK(rank_instances(map, q, 10).size() == 3);
    CHECK(rank_instances(map, q, 10).back().id == 0);
  }

  TEST_CASE("topk and rank agree") {
    const auto t = axis_table(4);
    const std::vector<float> f{0.1f, 0.7f, 0.7f, -0.1f};
    CHECK(classify_topk(f, t, 2) == std::vector<int>{1, 2});
    CHECK(class_rank(f, t, 1) == 1);
    CHECK(class_rank(f, t, 2) == 2);
    CHECK(class_rank(f, t, 3) == 4);
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      const auto g = testing::random_unit(rng, 4);
      const auto all = classify_topk(g, t, 4);
      for (int c = 0; c < 4; ++c) {
        const auto pos = std::find(all.begin(), all.end(), c) - all.begin();
        CHECK(class_rank(g, t, c) == static_cast<std::size_t>(pos + 1));
      }
    }
  }

  TEST_CASE("dense transfer labels, ties and the distance cutoff") {
    const auto t = axis_table(2);
    // Quarter-meter voxels keep every coordinate exact in binary.
    constexpr double r = 0.25;
    auto map = InstanceMap::restore(r, {}, {inst(4, VoxelSet::from_keys({{0, 0, 0}}, r), {1, 0}),
                                            inst(7, VoxelSet::from_keys({{2, 0, 0}}, r), {0, 1})},
                                    8);
    // Voxel centers at x = 0.125 and 0.625; x = 0.375 is equidistant.
    const std::vector<Eigen::Vector3f> pts{{0.25f, 0.125f, 0.125f}, {0.375f, 0.125f, 0.125f},
                                           {0.5f, 0.125f, 0.125f}, {5.0f, 0.0f, 0.0f}};
    const auto d = dense_transfer(map, pts, t, 1.0);
    CHECK(d.labels == std::vector<int>{0, 0, 1, kUnassigned});
    CHECK(d.instance_ids == std::vector<std::int64_t>{4, 4, 7, -1});
    CHECK(d.unassigned == 1);
    CHECK(d.unassigned_fraction() == 0.25);
  }

  TEST_CASE("dense transfer matches brute force") {
    std::mt19937_64 rng(4);
    const auto t = axis_table(3);
    std::vector<Instance> insts;
    for (std::uint64_t i = 0; i < 6; ++i) {
      std::vector<float> s(3, 0.0f);
      s[i % 3] = 1.0f;
      insts.push_back(inst(i, testing::random_voxels(rng, 30, 40, kRes), s));
    }
    auto map = InstanceMap::restore(kRes, {}, insts, 6);
    std::uniform_real_distribution<float> u(-0.5f, 2.5f);
    std::vector<Eigen::Vector3f> pts(500);
    for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
    const double d_assign = 0.3;
    const auto d = dense_transfer(map, pts, t, d_assign);
    for (std::size_t p = 0; p < pts.size(); ++p) {
      double best = std::numeric_limits<double>::infinity();
      std::int64_t owner = -1;
      for (const auto& x : insts) {
        for (const auto& k : x.voxels.keys()) {
          const double dist = (x.voxels.center(k) - pts[p].cast<double>()).norm();
          if (dist < best) {
            best = dist;
            owner = static_cast<std::int64_t>(x.id);
          }
        }
      }
      if (best > d_assign) {
        CHECK(d.labels[p] == kUnassigned);
      } else {
        CHECK(d.instance_ids[p] == owner);
        CHECK(d.labels[p] == static_cast<int>(owner % 3));
      }
    }
  }

  TEST_CASE("segmentation metrics by hand") {
    ConfusionMatrix m(2);
    m.add(0, 0, 5);
    m.add(0, 1, 5);
    m.add(1, 1, 10);
    const auto s = segmentation_metrics(m);
    CHECK(s.macc == doctest::Approx(0.75));
    // IoU: 5 / 10 and 10 / 15.
    CHECK(s.miou == doctest::Approx((0.5 + 10.0 / 15.0) / 2));
    CHECK(s.miou == doctest::Approx(0.5833).epsilon(1e-4));
    CHECK(s.fmiou == doctest::Approx(0.5 * 0.5 + 0.5 * 10.0 / 15.0));
    CHECK(s.present_classes == 2);
  }

  TEST_CASE("absent classes do not enter the means") {
    const std::vector<int> gt{0, 0, 2, 2}, pred{0, 1, 2, kUnassigned};
    const auto m = ConfusionMatrix::from_labels(3, gt, pred);
    CHECK(m.total() == 3);
    const auto s = segmentation_metrics(m);
    CHECK(s.present_classes == 2);
    CHECK(s.macc == doctest::Approx((0.5 + 1.0) / 2));
    CHECK(s.class_accuracy[1] == 0.0);
  }

  TEST_CASE("assignment on a 2x2 matrix") {
    const std::vector<std::vector<double>> s{{0.9, 0.8}, {0.85, 0.1}};
    auto a = solve_assignment(s);
    std::sort(a.begin(), a.end());
    CHECK(a == std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}, {1, 0}});
  }

  TEST_CASE("assignment reaches the permutation optimum") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
      std::vector<std::vector<double>> s(7, std::vector<double>(7));
      for (auto& row : s)
        for (auto& v : row) v = u(rng);
      const auto a = solve_assignment(s);
      REQUIRE(a.size() == 7);
      double v = 0;
      std::vector<bool> used(7, false);
      for (auto [r, c] : a) {
        CHECK_FALSE(used[c]);
        used[c] = true;
        v += s[r][c];
      }
      CHECK(v == doctest::Approx(oracle::best_assignment(s)));
    }
  }

  TEST_CASE("rectangular assignment covers the smaller side") {
    const std::vector<std::vector<double>> wide{{0.1, 0.9, 0.3}, {0.8, 0.2, 0.4}};
    CHECK(solve_assignment(wide).size() == 2);
    const std::vector<std::vector<double>> tall{{0.1}, {0.9}, {0.3}};
    const auto a = solve_assignment(tall);
    REQUIRE(a.size() == 1);
    CHECK(a[0] == std::pair<std::size_t, std::size_t>{1, 0});
  }

  TEST_CASE("strict matching drops weak pairs") {
    const std::vector<std::vector<double>> iou{{0.9, 0.0}, {0.0, 0.5}};
    CHECK(hungarian_match(iou, MatchMode::AllPairs).size() == 2);
    const auto strict = hungarian_match(iou, MatchMode::StrictIou);
    REQUIRE(strict.size() == 1);
    CHECK(strict[0].pred == 0);
    CHECK(strict[0].iou == 0.9);
  }

  TEST_CASE("iou matrix") {
    const std::vector<VoxelSet> pred{block(0, 0, 0, 2, 1, 1, kRes)};
    const std::vector<VoxelSet> gt{block(1, 0, 0, 2, 1, 1, kRes), block(5, 0, 0, 1, 1, 1, kRes)};
    const auto m = iou_matrix(pred, gt);
    CHECK(m[0][0] == doctest::Approx(1.0 / 3.0));
    CHECK(m[0][1] == 0.0);
  }

  TEST_CASE("accuracy at k from ranks") {
    const std::vector<std::size_t> ranks{1, 2, 3, 1};
    const std::vector<std::size_t> ks{1, 2, 5};
    const auto r = retrieval_metrics_from_ranks(ranks, 5, ks);
    CHECK(r.acc_at_k.at(1) == 0.5);
    CHECK(r.acc_at_k.at(2) == 0.75);
    CHECK(r.acc_at_k.at(5) == 1.0);
    CHECK(r.curve == std::vector<double>{0.5, 0.75, 1.0, 1.0, 1.0});
    CHECK(r.auc == doctest::Approx(0.85));
    CHECK(r.matched == 4);
  }

  TEST_CASE("auc equals the rank histogram oracle") {
    std::mt19937_64 rng(10);
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t classes = 2 + rng() % 20;
      std::vector<std::size_t> ranks(1 + rng() % 50);
      for (auto& r : ranks) r = 1 + rng() % classes;
      const std::vector<std::size_t> ks{1};
      const auto m = retrieval_metrics_from_ranks(ranks, classes, ks);
      // Mean over k of P(rank <= k) is (C + 1 - E[rank]) / C.
      const double mean_rank = std::accumulate(ranks.begin(), ranks.end(), 0.0) / ranks.size();
      CHECK(m.auc == doctest::Approx((classes + 1 - mean_rank) / classes));
      CHECK(m.curve.back() == 1.0);
    }
  }

  TEST_CASE("retrieval metrics through the table") {
    const auto t = axis_table(3);
    const std::vector<MatchedObject> objs{{{1, 0, 0}, 0}, {{0.2f, 0.9f, 0.1f}, 0}, {{0, 0, 1}, 2}};
    const std::vector<std::size_t> ks{1, 2};
    const auto r = retrieval_metrics(objs, t, ks);
    CHECK(r.acc_at_k.at(1) == doctest::Approx(2.0 / 3.0));
    CHECK(r.acc_at_k.at(2) == 1.0);
  }

  TEST_CASE("table and ground truth round-trip") {
    testing::TempDir dir("retrieval_io");
    const auto t = axis_table(3);
    write_table(t, dir / "classes.json");
    const auto back = read_table(dir / "classes.json");
    CHECK(back.names == t.names);
    CHECK(back.embeddings == t.embeddings);

    GroundTruth gt;
    gt.resolution = kRes;
    gt.points = {{0, 0, 0}, {1, 2, 3}};
    gt.labels = {0, 2};
    gt.instances.push_back({5, 2, block(0, 0, 0, 2, 2, 2, kRes)});
    write_ground_truth(gt, dir / "gt");
    const auto g2 = read_ground_truth(dir / "gt");
    CHECK(g2.points == gt.points);
    CHECK(g2.labels == gt.labels);
    REQUIRE(g2.instances.size() == 1);
    CHECK(g2.instances[0].id == 5);
    CHECK(g2.instances[0].class_index == 2);
    CHECK(g2.instances[0].voxels == gt.instances[0].voxels);

    TextEmbeddingTable bad = t;
    bad.embeddings[0] = 2.0f;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }
}
