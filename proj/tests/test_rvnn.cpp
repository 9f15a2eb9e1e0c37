#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/floor.hpp"
#include "scenehgn/rvnn.hpp"
#include "scenehgn/synth.hpp"

using namespace scenehgn;
using namespace scenehgn::testing;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.feature_dim = 6;
  c.latent_dim = 4;
  c.condition_dim = 4;
  return c;
}

Model tiny_model(std::uint64_t seed = 5) { return Model(tiny_config(), default_config(), seed); }

SceneHierarchy pair_scene(std::uint64_t seed) {
  SceneTemplate t;
  t.regions = {{Pattern::Pair, 0}};
  return gen_scene(t, seed).scene;
}

std::vector<SceneHierarchy> corpus(int n, std::uint64_t seed) {
  std::vector<SceneHierarchy> out;
  for (const auto& g : gen_corpus(n, seed)) out.push_back(g.scene);
  return out;
}

// Object categories and placements, ignoring ids and edges.
void expect_same_layout(const SceneHierarchy& a, const SceneHierarchy& b) {
  ASSERT_EQ(a.objects.size(), b.objects.size());
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    EXPECT_EQ(a.objects[i].category, b.objects[i].category);
    EXPECT_EQ(a.objects[i].placement, b.objects[i].placement);
  }
  EXPECT_EQ(a.regions, b.regions);
}

}  // namespace

TEST(Model, ConfigAndVocabularyChecks) {
  ModelConfig c = tiny_config();
  c.max_children = 8;
  EXPECT_THROW(c.check(), ConfigError);
  c = tiny_config();
  c.feature_dim = 0;
  EXPECT_THROW(c.check(), ConfigError);
  SceneConfig vocab = default_config();
  vocab.categories.pop_back();
  EXPECT_THROW(Model(tiny_config(), vocab, 1), ConfigError);
  vocab = default_config();
  vocab.feature_dim = 3;
  EXPECT_THROW(Model(tiny_config(), vocab, 1), ConfigError);
}

TEST(Encoder, ZeroWeightsGiveZeroObjectCodes) {
  Model m = tiny_model();
  for (auto* p : m.params.all()) p->value.setZero();
  const auto s = pair_scene(110);
  std::vector<const ObjectNode*> objs;
  for (const auto& o : s.objects) objs.push_back(&o);
  nn::Graph g;
  const auto& code = g.value(enc_objects(g, m, objs));
  EXPECT_EQ(code.rows(), m.config.feature_dim);
  EXPECT_EQ(code.cols(), static_cast<Eigen::Index>(objs.size()));
  EXPECT_EQ(code, nn::Mat::Zero(code.rows(), code.cols()));
}

TEST(Encoder, ObjectCodesArePerObject) {
  const Model m = tiny_model();
  const auto s = pair_scene(111);
  std::vector<const ObjectNode*> objs;
  for (const auto& o : s.objects) objs.push_back(&o);
  auto swapped = objs;
  std::swap(swapped[0], swapped[2]);
  nn::Graph g;
  const nn::Mat a = g.value(enc_objects(g, m, objs));
  const nn::Mat b = g.value(enc_objects(g, m, swapped));
  EXPECT_EQ(a.col(0), b.col(2));
  EXPECT_EQ(a.col(1), b.col(1));
  EXPECT_EQ(a.col(2), b.col(0));
}

TEST(Encoder, RegionCodeIgnoresChildOrder) {
  const Model m = tiny_model();
  for (const auto& s : corpus(6, 112)) {
    for (const auto& r : s.regions) {
      RegionNode rev = r;
      std::reverse(rev.children.begin(), rev.children.end());
      nn::Graph g;
      const nn::Mat a = g.value(enc_region(g, m, s, r));
      const nn::Mat b = g.value(enc_region(g, m, s, rev));
      EXPECT_LT((a - b).norm(), 1e-12 * std::max(1.0, a.norm())) << r.id;
    }
  }
}

TEST(Encoder, EmptyEdgeSetSkipsMessagePassing) {
  const Model with_mp = tiny_model();
  ModelConfig c = tiny_config();
  c.mp_iterations = 0;
  Model without_mp(c, default_config(), 5);
  for (auto* p : without_mp.params.all()) p->value = with_mp.params.get(p->name).value;

  SceneHierarchy s = pair_scene(113);
  s.edges.binary.clear();
  nn::Graph g;
  const nn::Mat a = g.value(enc_region(g, with_mp, s, s.regions[0]));
  const nn::Mat b = g.value(enc_region(g, without_mp, s, s.regions[0]));
  EXPECT_EQ(a, b);
  // With edges present the message-passing layers do contribute.
  const SceneHierarchy full = pair_scene(113);
  ASSERT_FALSE(full.edges.binary.empty());
  EXPECT_NE(g.value(enc_region(g, with_mp, full, full.regions[0])), a);
}

TEST(Encoder, RejectsOversizedRegion) {
  const Model m = tiny_model();
  std::vector<ObjectNode> objs;
  for (int i = 0; i < 11; ++i) objs.push_back(make_object("o" + std::to_string(i), "bookshelf", {0.5 * i, 1, 0}, {0.4, 2, 0.3}, 0));
  const auto s = scene_of(objs);
  nn::Graph g;
  EXPECT_THROW(enc_region(g, m, s, s.regions[0]), ConfigError);
}

TEST(Encoder, ShapesAndDeterminism) {
  const Model m = tiny_model();
  const auto s = corpus(1, 114).front();
  const auto cond = scene_condition(s, m.config.condition_dim);
  const auto a = encode_scene(m, s, cond, 9), b = encode_scene(m, s, cond, 9), c = encode_scene(m, s, cond, 10);
  EXPECT_EQ(a.mu.size(), m.config.latent_dim);
  EXPECT_EQ(a.logvar.size(), m.config.latent_dim);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.mu, c.mu);
  EXPECT_NE(a.z, c.z);
}

TEST(Encoder, MovedObjectChangesTheMean) {
  const Model m = tiny_model();
  for (const auto& s : corpus(10, 115)) {
    SceneHierarchy moved = s;
    moved.objects.front().placement.center.x() += 0.1;
    const auto cond = scene_condition(s, m.config.condition_dim);
    EXPECT_NE(encode_scene(m, s, cond, 1).mu, encode_scene(m, moved, cond, 1).mu) << s.room_id;
  }
}

TEST(Condition, EmptyFloorIsZero) {
  SceneHierarchy s = pair_scene(116);
  const auto c = scene_condition(s, 4);
  EXPECT_EQ(c.size(), 4);
  const Eigen::VectorXd pooled = pool_condition(ring_to_features(register_ring(s.floor)), 4);
  for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(c[i], std::asinh(pooled[i]));
  s.floor.clear();
  EXPECT_EQ(scene_condition(s, 4), Eigen::VectorXd::Zero(4));
}

TEST(Decoder, RandomLatentsDecodeToValidScenes) {
  const Model m = tiny_model();
  Rng rng(117);
  const auto floor = rect_floor(-5, -4, 5, 4);
  for (int t = 0; t < 30; ++t) {
    Eigen::VectorXd z(m.config.latent_dim), cond(m.config.condition_dim);
    for (auto& v : z) v = rng.normal(0, 3);
    for (auto& v : cond) v = rng.normal();
    const auto s = decode_scene(m, z, cond, floor);
    EXPECT_TRUE(validate(s).empty()) << t;
    EXPECT_LE(s.regions.size(), 10u);
    for (const auto& r : s.regions) EXPECT_LE(r.children.size(), 10u);
  }
}

TEST(Canonical, OrderIsSortedAndIdempotent) {
  const SceneConfig vocab = default_config();
  for (const auto& s : corpus(5, 118)) {
    const auto c = canonical_order(s, vocab);
    EXPECT_EQ(canonical_order(c, vocab), c);
    for (const auto& r : c.regions) {
      for (std::size_t i = 1; i < r.children.size(); ++i) {
        EXPECT_LE(vocab.category_index(c.find_object(r.children[i - 1])->category),
                  vocab.category_index(c.find_object(r.children[i])->category));
      }
    }
    EXPECT_TRUE(validate(c).empty());
  }
}

TEST(Canonical, RemoveObjectDropsItsRelations) {
  const auto s = pair_scene(119);
  for (const auto& o : s.objects) {
    const auto r = remove_object(s, o.id);
    EXPECT_EQ(r.objects.size(), s.objects.size() - 1);
    EXPECT_TRUE(validate(r).empty()) << o.id;
    for (const auto& e : r.edges.binary) EXPECT_TRUE(e.a != o.id && e.b != o.id);
  }
  EXPECT_THROW(remove_object(s, "missing"), ConfigError);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Model m = tiny_model();
  const SceneHierarchy s = pair_scene(120);
  TrainConfig tc;
  m.params.zero_grad();
  const double base = scene_loss(m, s, s, tc, 3, true).total();
  EXPECT_TRUE(std::isfinite(base));
  Rng pick(121);
  constexpr double h = 1e-5;
  int checked = 0;
  for (auto* p : m.params.all()) {
    const nn::Mat analytic = p->grad;
    // A few entries per tensor keeps the run short.
    for (int trial = 0; trial < 3; ++trial) {
      const auto k = static_cast<Eigen::Index>(pick.below(static_cast<std::uint64_t>(p->value.size())));
      const double x = p->value(k);
      p->value(k) = x + h;
      const double up = scene_loss(m, s, s, tc, 3, false).total();
      p->value(k) = x - h;
      const double down = scene_loss(m, s, s, tc, 3, false).total();
      p->value(k) = x;
      const double fd = (up - down) / (2 * h);
      EXPECT_LE(std::abs(analytic(k) - fd), 1e-4 * std::max(1.0, std::abs(fd))) << p->name << "[" << k << "]";
      ++checked;
    }
  }
  EXPECT_GT(checked, 60);
}

TEST(Train, DeterministicAndFinite) {
  const auto data = corpus(3, 122);
  TrainConfig tc;
  tc.steps = 15;
  tc.batch_size = 2;
  Model a = tiny_model(), b = tiny_model();
  const auto ra = train(a, data, tc), rb = train(b, data, tc);
  ASSERT_EQ(ra.loss_curve.size(), 15u);
  EXPECT_EQ(ra.loss_curve, rb.loss_curve);
  for (double l : ra.loss_curve) EXPECT_TRUE(std::isfinite(l));
  EXPECT_EQ(encode_checkpoint(a), encode_checkpoint(b));
}

TEST(Inference, EndpointsAndCompletionPaths) {
  Model m = tiny_model();
  const auto data = corpus(2, 123);
  expect_same_layout(interpolate(m, data[0], data[1], 0.0), reconstruct(m, data[0]));
  expect_same_layout(interpolate(m, data[0], data[1], 1.0), reconstruct(m, data[1]));
  expect_same_layout(complete(m, data[0]), reconstruct(m, data[0]));
  for (double t = 0.1; t < 0.95; t += 0.1) EXPECT_TRUE(validate(interpolate(m, data[0], data[1], t)).empty());
}

TEST(Inference, BoxLayoutIsSeeded) {
  const Model m = tiny_model();
  const auto s = corpus(1, 124).front();
  const auto a = box_layout_to_scene(m, s, 7), b = box_layout_to_scene(m, s, 7);
  expect_same_layout(a, b);
  EXPECT_TRUE(validate(a).empty());
}

TEST(Checkpoint, RoundTripAndCorruption) {
  Model m = tiny_model();
  const std::string bytes = encode_checkpoint(m);
  const Model back = decode_checkpoint(bytes);
  EXPECT_EQ(encode_checkpoint(back), bytes);
  ASSERT_EQ(back.params.all().size(), m.params.all().size());
  for (const auto* p : m.params.all()) EXPECT_EQ(back.params.get(p->name).value, p->value);
  EXPECT_EQ(back.vocab.categories, m.vocab.categories);
  std::string bad = bytes;
  bad[0] ^= 0x20;
  EXPECT_THROW(decode_checkpoint(bad), ParseError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), ParseError);
}
