#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "common.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/metrics.hpp"
#include "scenehgn/synth.hpp"

using namespace scenehgn;
using namespace scenehgn::testing;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<double> random_histogram(Rng& rng, int n) {
  std::vector<double> h(static_cast<std::size_t>(n));
  double t = 0.0;
  for (auto& v : h) t += v = rng.below(4) == 0 ? 0.0 : rng.uniform(0, 1);
  if (t == 0.0) h[0] = t = 1.0;
  for (auto& v : h) v /= t;
  return h;
}

SceneHierarchy scene_with(const std::string& room_type, const std::vector<std::string>& cats) {
  std::vector<ObjectNode> objs;
  for (std::size_t i = 0; i < cats.size(); ++i) {
    objs.push_back(make_object("o" + std::to_string(i), cats[i], {1.0 * i, 0.5, 0}, {0.5, 1, 0.5}, 0));
  }
  auto s = scene_of(objs);
  s.room_type = room_type;
  return s;
}

Corpus corpus_of(int n, std::uint64_t seed) {
  Corpus out;
  for (const auto& g : gen_corpus(n, seed)) out.push_back(g.scene);
  return out;
}

}  // namespace

TEST(Emd, Basics) {
  EXPECT_EQ(emd_categorical({0.2, 0.3, 0.5}, {0.2, 0.3, 0.5}), 0.0);
  EXPECT_DOUBLE_EQ(emd_categorical({1, 0}, {0, 1}), 1.0);
  EXPECT_THROW(emd_categorical({1, 0}, {0, 0, 1}), DomainError);
  EXPECT_EQ(zero_one_cost(3), (Eigen::Matrix3d() << 0, 1, 1, 1, 0, 1, 1, 1, 0).finished());
}

TEST(Emd, MatchesTransportUnderZeroOneCosts) {
  Rng rng(130);
  for (int t = 0; t < 300; ++t) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const auto p = random_histogram(rng, n), q = random_histogram(rng, n);
    EXPECT_NEAR(emd_categorical(p, q), emd_transport(p, q, zero_one_cost(n)), 1e-9) << t;
  }
}

// On a line with cost |i - j| the optimum is the L1 distance between CDFs.
TEST(Emd, TransportMatchesLineClosedForm) {
  Rng rng(131);
  for (int t = 0; t < 200; ++t) {
    const int n = 2 + static_cast<int>(rng.below(8));
    const auto p = random_histogram(rng, n), q = random_histogram(rng, n);
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) cost(i, j) = std::abs(i - j);
    }
    double cdf = 0.0, expected = 0.0;
    for (int i = 0; i < n; ++i) {
      cdf += p[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)];
      expected += std::abs(cdf);
    }
    EXPECT_NEAR(emd_transport(p, q, cost), expected, 1e-9) << t;
  }
}

TEST(Emd, MetricAxioms) {
  Rng rng(132);
  for (int t = 0; t < 200; ++t) {
    const auto a = random_histogram(rng, 5), b = random_histogram(rng, 5), c = random_histogram(rng, 5);
    EXPECT_EQ(emd_categorical(a, a), 0.0);
    EXPECT_DOUBLE_EQ(emd_categorical(a, b), emd_categorical(b, a));
    EXPECT_LE(emd_categorical(a, c), emd_categorical(a, b) + emd_categorical(b, c) + 1e-12);
  }
}

TEST(Histogram, NormalizesToOne) {
  const auto h = category_histogram(corpus_of(10, 133));
  double s = 0.0;
  for (double v : h.normalized()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-12);
  EXPECT_EQ(CategoryHistogram{std::vector<double>(4, 0.0)}.normalized(), std::vector<double>(4, 0.0));
}

TEST(Corpus, SelfDistanceIsZero) {
  const auto c = corpus_of(12, 134);
  EXPECT_EQ(o1(c, c), 0.0);
  EXPECT_EQ(o2(c, c), 0.0);
  EXPECT_EQ(o3(c, c), 0.0);
}

TEST(Corpus, HandComputedValues) {
  const Corpus a = {scene_with("bedroom", {"bed", "nightstand", "nightstand"}),
                    scene_with("living_room", {"sofa", "coffee_table"}), scene_with("living_room", {"sofa"})};
  const Corpus b = {scene_with("bedroom", {"bed", "wardrobe"}),
                    scene_with("living_room", {"sofa", "coffee_table", "armchair"}),
                    scene_with("office", {"desk", "office_chair"})};
  // Pooled: A = {bed 1, nightstand 2, sofa 2, coffee_table 1} / 6, B = seven singletons / 7.
  EXPECT_NEAR(o1(a, b), 4.0 / 7.0, 1e-12);
  EXPECT_DOUBLE_EQ(o1(a, b), o1(b, a));
  // bedroom: (1/3, 2/3, 0) vs (1/2, 0, 1/2) -> 2/3; living: (2/3, 1/3, 0) vs thirds -> 1/3.
  std::vector<std::string> warnings;
  EXPECT_NEAR(o2(a, b, default_config(), &warnings), 0.5, 1e-12);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("office"), std::string::npos);
  // bedroom pairs are disjoint -> 1; living: {sofa-coffee} vs three equal pairs -> 2/3.
  EXPECT_NEAR(o3(a, b), (1.0 + 2.0 / 3.0) / 2.0, 1e-12);
}

TEST(Corpus, PairCooccurrenceCountsOncePerScene) {
  const Corpus c = {scene_with("x", {"bed", "nightstand", "nightstand"}), scene_with("x", {"bed", "nightstand"})};
  const auto v = pair_cooccurrence(c);
  const int n = static_cast<int>(default_config().categories.size());
  EXPECT_EQ(v.size(), static_cast<std::size_t>(n * (n - 1) / 2));
  double s = 0.0;
  int nonzero = 0;
  for (double x : v) {
    s += x;
    nonzero += x > 0.0;
  }
  EXPECT_DOUBLE_EQ(s, 1.0);
  EXPECT_EQ(nonzero, 1);
}

TEST(Heatmap, CellIndexing) {
  EXPECT_EQ(heatmap_cell(0.0), 500);
  EXPECT_EQ(heatmap_cell(-1.75), 0);
  EXPECT_EQ(heatmap_cell(1.75), -1);
  EXPECT_EQ(heatmap_cell(1.7499999), 999);
  EXPECT_EQ(heatmap_cell(2.0), -1);
  EXPECT_EQ(heatmap_cell(-1.7500001), -1);
  EXPECT_EQ(heatmap_cell(0.0035), 501);
}

TEST(Heatmap, CenterAndOutside) {
  const Corpus same = {scene_of({make_object("a", "bed", {1, 0.3, 1}, {1, 0.5, 1}, 0),
                                 make_object("b", "nightstand", {1, 0.3, 1}, {0.5, 0.5, 0.5}, 0)})};
  const auto h = o4_heatmap(same, "bed", "nightstand");
  EXPECT_EQ(h.total(), 1u);
  EXPECT_EQ(h.at(500, 500), 1u);
  const Corpus far = {scene_of({make_object("a", "bed", {0, 0.3, 0}, {1, 0.5, 1}, 0),
                                make_object("b", "nightstand", {2, 0.3, 0}, {0.5, 0.5, 0.5}, 0)})};
  EXPECT_EQ(o4_heatmap(far, "bed", "nightstand").total(), 0u);
}

TEST(Heatmap, MatchesEnumerationAndIsTranslationInvariant) {
  const auto c = corpus_of(20, 135);
  for (const auto& [ca, cb] : std::vector<std::pair<std::string, std::string>>{
           {"dining_chair", "dining_table"}, {"dining_chair", "dining_chair"}, {"nightstand", "bed"}}) {
    std::uint64_t expected = 0;
    for (const auto& s : c) {
      for (const auto& a : s.objects) {
        for (const auto& b : s.objects) {
          if (&a == &b || a.category != ca || b.category != cb) continue;
          const double dx = b.placement.center.x() - a.placement.center.x();
          const double dz = b.placement.center.z() - a.placement.center.z();
          expected += std::abs(dx) < 1.75 - 1e-9 && std::abs(dz) < 1.75 - 1e-9;
        }
      }
    }
    const auto h = o4_heatmap(c, ca, cb);
    EXPECT_EQ(h.total(), expected) << ca << " " << cb;

    Corpus moved = c;
    for (auto& s : moved) {
      for (auto& o : s.objects) o.placement.center += Vec3(2.5, 0, -1.5);
    }
    Corpus reversed(c.rbegin(), c.rend());
    EXPECT_EQ(o4_heatmap(reversed, ca, cb).grid, h.grid);
    // Offsets are differences, so only rounding at cell edges could differ.
    EXPECT_EQ(o4_heatmap(moved, ca, cb).total(), h.total());
  }
}

TEST(Heatmap, ExportFormats) {
  const Corpus one = {scene_of({make_object("a", "bed", {0, 0.3, 0}, {1, 0.5, 1}, 0),
                                make_object("b", "nightstand", {0.5, 0.3, 0}, {0.5, 0.5, 0.5}, 0)})};
  const auto h = o4_heatmap(one, "bed", "nightstand");
  const std::string pgm = heatmap_pgm(h);
  const std::string header = "P5\n1000 1000\n255\n";
  ASSERT_EQ(pgm.size(), header.size() + 1000u * 1000u);
  EXPECT_EQ(pgm.substr(0, header.size()), header);
  EXPECT_EQ(static_cast<unsigned char>(pgm[header.size() + 500 * 1000 + heatmap_cell(0.5)]), 255);
  const std::string raw = heatmap_raw(h);
  EXPECT_EQ(raw.size(), 4u * 1000u * 1000u);
}

TEST(Orientation, DefaultAndLiteralFormulas) {
  EXPECT_DOUBLE_EQ(orientation_score(0.0), 1.0);
  EXPECT_NEAR(orientation_score(kPi / 8), 0.0, 1e-30);
  EXPECT_NEAR(orientation_score(kPi / 4), 1.0, 1e-15);
  EXPECT_NEAR(orientation_score(kPi / 4, OrientationFormula::Literal), 0.0, 1e-30);
  for (int k = 0; k < 8; ++k) EXPECT_NEAR(orientation_score(k * kPi / 4), 1.0, 1e-15);

  Corpus all45 = {scene_of({make_object("a", "sofa", {0, 0.4, 0}, {2, 0.8, 1}, kPi / 4),
                            make_object("b", "sofa", {3, 0.4, 0}, {2, 0.8, 1}, -3 * kPi / 4)})};
  EXPECT_NEAR(orientation_score(all45), 1.0, 1e-15);
  EXPECT_NEAR(orientation_score(all45, OrientationFormula::Literal), 0.0, 1e-30);
  EXPECT_THROW(orientation_score(Corpus{}), DomainError);
}

TEST(Orientation, StaysInUnitInterval) {
  Rng rng(136);
  for (int i = 0; i < 1000; ++i) {
    const double y = rng.uniform(-10, 10);
    for (auto f : {OrientationFormula::Default, OrientationFormula::Literal}) {
      EXPECT_GE(orientation_score(y, f), 0.0);
      EXPECT_LE(orientation_score(y, f), 1.0);
    }
  }
}

TEST(Frechet, GaussianClosedForm) {
  Rng rng(137);
  Eigen::MatrixXd a(500, 2);
  for (Eigen::Index i = 0; i < a.rows(); ++i) a.row(i) << rng.normal(), rng.normal();
  EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-9);
  Eigen::MatrixXd b = a;
  b.col(0).array() += 3.0;
  EXPECT_NEAR(frechet_distance(a, b), 9.0, 1e-9);
  // Scaling one axis by 2 adds (sigma - 2 sigma)^2 on that axis.
  Eigen::MatrixXd c = a;
  c.col(1) *= 2.0;
  const double mean = a.col(1).mean();
  const double var = (a.col(1).array() - mean).square().sum() / static_cast<double>(a.rows() - 1);
  EXPECT_NEAR(frechet_distance(a, c), mean * mean + var, 1e-6);
}
