#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "common.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/layout_opt.hpp"
#include "scenehgn/synth.hpp"

using namespace scenehgn;
using namespace scenehgn::testing;

namespace {

constexpr double kPi = std::numbers::pi;

GeneratedScene dining(std::uint64_t seed) {
  SceneTemplate t;
  t.regions = {{Pattern::NFold, 4}};
  return gen_scene(t, seed);
}

const HyperEdge& rotation_edge(const SceneHierarchy& s) {
  for (const auto& h : s.edges.hyper) {
    if (h.type == HyperEdgeType::NFoldRotation) return h;
  }
  throw std::runtime_error("no rotational hyper-edge");
}

Vec2 barycenter(const SceneHierarchy& s, const std::vector<std::string>& ids) {
  Vec2 b = Vec2::Zero();
  for (const auto& id : ids) b += ground(s.find_object(id)->placement.center) / static_cast<double>(ids.size());
  return b;
}

EditConstraint pin_all(const ObjectNode& o) {
  EditConstraint c;
  c.object = o.id;
  c.pin_center = c.pin_scale = c.pin_orientation = true;
  c.target = o.placement;
  return c;
}

double residual_terms(const std::map<std::string, double>& terms) {
  return terms.at("hyper_rotation") + terms.at("hyper_hub") + terms.at("hyper_parallel") + terms.at("binary");
}

void expect_non_increasing(const std::vector<TraceEntry>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_LE(trace[i].total, trace[i - 1].total) << i;
}

}  // namespace

TEST(Refine, PlantedSceneIsAFixedPoint) {
  for (const auto& g : gen_corpus(5, 80)) {
    const auto r = refine(g.scene, {});
    EXPECT_EQ(r.scene, g.scene);
    ASSERT_EQ(r.trace.size(), 1u);
    EXPECT_EQ(r.trace[0].iteration, 0);
  }
}

TEST(Refine, RecoversJitteredChairRing) {
  for (std::uint64_t seed = 81; seed < 84; ++seed) {
    const auto g = dining(seed);
    const SceneHierarchy noisy = perturb(g.scene, 0.05, 0.05, seed);
    const auto& h = rotation_edge(noisy);
    ASSERT_TRUE(h.hub.has_value());
    const auto r = refine(noisy, {pin_all(*noisy.find_object(*h.hub))});
    EXPECT_LE(r.trace.back().terms.at("hyper_rotation"), 1e-6) << seed;
    EXPECT_LE(r.trace.back().total, r.trace.front().total);
    expect_non_increasing(r.trace);
  }
}

TEST(Refine, PinnedTableDragsTheChairs) {
  const auto g = dining(85);
  const auto& h = rotation_edge(g.scene);
  const ObjectNode& table = *g.scene.find_object(*h.hub);
  EditConstraint c = pin_all(table);
  c.target.center.x() -= 1.0;
  const auto r = refine(g.scene, {c});
  const Vec2 moved = barycenter(r.scene, h.members) - barycenter(g.scene, h.members);
  EXPECT_NEAR(moved.x(), -1.0, 0.05);
  EXPECT_NEAR(moved.y(), 0.0, 0.05);
}

TEST(EditPropagate, RotatedTableCarriesTheChairs) {
  const auto g = dining(86);
  const auto& h = rotation_edge(g.scene);
  const ObjectNode& table = *g.scene.find_object(*h.hub);
  EditConstraint c = pin_all(table);
  c.target.orientation += kPi / 2;
  const auto r = edit_propagate(g.scene, {c});
  const Vec2 pivot = ground(table.placement.center);
  for (const auto& id : h.members) {
    const Vec2 before = ground(g.scene.find_object(id)->placement.center);
    const Vec2 expected = pivot + rotate_ground(before - pivot, kPi / 2);
    EXPECT_LT((ground(r.scene.find_object(id)->placement.center) - expected).norm(), 0.05) << id;
  }
  EXPECT_TRUE(validate(r.scene).empty());
}

TEST(EditPropagate, IdentityEditIsIdentity) {
  for (const auto& g : gen_corpus(4, 87)) {
    const auto r = edit_propagate(g.scene, {pin_all(g.scene.objects.front())});
    ASSERT_EQ(r.scene.objects.size(), g.scene.objects.size());
    for (std::size_t i = 0; i < g.scene.objects.size(); ++i) {
      const auto &a = r.scene.objects[i].placement, &b = g.scene.objects[i].placement;
      EXPECT_LT((a.center - b.center).norm(), 1e-9);
      EXPECT_LT((a.scale - b.scale).norm(), 1e-9);
      EXPECT_LT(std::abs(wrap_angle(a.orientation - b.orientation)), 1e-9);
    }
  }
}

TEST(EditPropagate, IsolatedObjectMovesAlone) {
  SceneTemplate t;
  t.regions = {{Pattern::NFold, 4}, {Pattern::Single, 0}};
  const auto g = gen_scene(t, 88);
  const ObjectNode* shelf = nullptr;
  for (const auto& o : g.scene.objects) {
    if (o.category == "bookshelf") shelf = &o;
  }
  ASSERT_NE(shelf, nullptr);
  EditConstraint c = pin_all(*shelf);
  c.target.center += Vec3(0.2, 0, 0.1);
  const auto r = edit_propagate(g.scene, {c});
  for (std::size_t i = 0; i < g.scene.objects.size(); ++i) {
    if (g.scene.objects[i].id == shelf->id) {
      EXPECT_EQ(r.scene.objects[i].placement.center, c.target.center);
    } else {
      EXPECT_EQ(r.scene.objects[i].placement, g.scene.objects[i].placement) << g.scene.objects[i].id;
    }
  }
}

TEST(Refine, PinnedFieldsAreBitExact) {
  const auto g = dining(89);
  const SceneHierarchy noisy = perturb(g.scene, 0.05, 0.05, 89);
  EditConstraint c;
  c.object = noisy.objects[1].id;
  c.pin_center = true;
  c.target = noisy.objects[1].placement;
  c.target.center += Vec3(0.013, 0, -0.021);
  const auto r = refine(noisy, {c});
  EXPECT_EQ(r.scene.objects[1].placement.center, c.target.center);
}

TEST(Refine, DeterministicAndMonotone) {
  const SceneHierarchy noisy = perturb(dining(90).scene, 0.05, 0.05, 90);
  OptimizerConfig cfg;
  cfg.max_iterations = 300;
  const auto a = refine(noisy, {}, cfg), b = refine(noisy, {}, cfg);
  EXPECT_EQ(a.scene, b.scene);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].total, b.trace[i].total);
  expect_non_increasing(a.trace);
  EXPECT_LT(residual_terms(a.trace.back().terms), residual_terms(a.trace.front().terms));
}

TEST(Refine, EditOutsideFloorWarns) {
  const auto g = dining(91);
  EditConstraint c = pin_all(g.scene.objects.front());
  c.target.center = Vec3(100, c.target.center.y(), 100);
  OptimizerConfig cfg;
  cfg.max_iterations = 5;
  const auto r = refine(g.scene, {c}, cfg);
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_GT(r.trace.front().terms.at("containment"), 0.0);
}

TEST(Refine, RejectsBadConfig) {
  const auto g = dining(92);
  OptimizerConfig cfg;
  cfg.step = 0.0;
  EXPECT_THROW(refine(g.scene, {}, cfg), ConfigError);
  EditConstraint none;
  none.object = g.scene.objects.front().id;
  EXPECT_THROW(refine(g.scene, {none}), ConfigError);
  EditConstraint missing = pin_all(g.scene.objects.front());
  missing.object = "nope";
  EXPECT_THROW(refine(g.scene, {missing}), ConfigError);
}

TEST(Edits, LoadFromJson) {
  const auto g = dining(93);
  const auto path = std::filesystem::temp_directory_path() / "scenehgn_edits_test.json";
  const auto& id = g.scene.objects.front().id;
  {
    std::ofstream out(path);
    out << R"([{"object": ")" << id << R"(", "orientation": 1.5}])";
  }
  const auto edits = load_edits(path.string(), g.scene);
  ASSERT_EQ(edits.size(), 1u);
  EXPECT_TRUE(edits[0].pin_orientation);
  EXPECT_FALSE(edits[0].pin_center);
  EXPECT_EQ(edits[0].target.orientation, 1.5);
  EXPECT_EQ(edits[0].target.center, g.scene.objects.front().placement.center);
  {
    std::ofstream out(path);
    out << R"([{"object": "nope", "orientation": 1.5}])";
  }
  EXPECT_THROW(load_edits(path.string(), g.scene), ParseError);
  std::filesystem::remove(path);
}

TEST(Edits, TraceCsvHeader) {
  TraceEntry e;
  e.iteration = 3;
  for (const auto& name : energy_term_names()) e.terms[name] = 0.0;
  e.total = 0.5;
  const std::string csv = trace_csv({e});
  std::string header = "iteration";
  for (const auto& name : energy_term_names()) header += "," + name;
  header += ",total";
  EXPECT_EQ(csv.substr(0, csv.find('\n')), header);
}
