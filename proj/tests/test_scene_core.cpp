#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "common.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/serialize.hpp"
#include "scenehgn/synth.hpp"

using namespace scenehgn;
using namespace scenehgn::testing;

namespace {

constexpr double kPi = std::numbers::pi;

std::vector<Vec3> sorted(std::vector<Vec3> v) {
  for (auto& p : v) {
    for (int k = 0; k < 3; ++k) p[k] = std::round(p[k] * 1e9) / 1e9 + 0.0;
  }
  std::sort(v.begin(), v.end(), [](const Vec3& a, const Vec3& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  return v;
}

SceneHierarchy two_region_scene() {
  auto bed = make_object("bed", "bed", {0, 0.25, 0}, {1.6, 0.5, 2.0}, 0);
  auto ns = make_object("ns", "nightstand", {1.1, 0.275, 0}, {0.45, 0.55, 0.4}, 0);
  auto desk = make_object("desk", "desk", {3, 0.375, 2}, {1.4, 0.75, 0.7}, 0);
  SceneHierarchy s = scene_of({bed, ns, desk});
  s.regions[0].children = {"bed", "ns"};
  s.regions.push_back({"region_1", RegionType::Office, {"desk"}});
  return s;
}

}  // namespace

TEST(Geometry, WrapAngleRange) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-15);
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.uniform(-50, 50), w = wrap_angle(a);
    EXPECT_GT(w, -kPi);
    EXPECT_LE(w, kPi);
    EXPECT_NEAR(std::remainder(a - w, 2 * kPi), 0.0, 1e-12);
  }
}

TEST(Geometry, AxisAlignedCornersAreUnitCube) {
  const auto c = obb_corners(PlacementParams({0, 0, 0}, {2, 2, 2}, 0));
  std::set<std::array<double, 3>> got;
  for (const auto& p : c) got.insert({p.x(), p.y(), p.z()});
  EXPECT_EQ(got.size(), 8u);
  for (const auto& p : got) {
    for (double v : p) EXPECT_DOUBLE_EQ(std::abs(v), 1.0);
  }
}

TEST(Geometry, QuarterTurnCubeKeepsCornerSet) {
  const auto a = obb_corners(PlacementParams({0, 0, 0}, {2, 2, 2}, 0));
  const auto b = obb_corners(PlacementParams({0, 0, 0}, {2, 2, 2}, kPi / 2));
  EXPECT_EQ(sorted({a.begin(), a.end()}), sorted({b.begin(), b.end()}));
}

TEST(Geometry, CornersMatchHomogeneousTransform) {
  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const PlacementParams p = random_placement(rng);
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    const double c = std::cos(p.orientation), s = std::sin(p.orientation);
    m.block<3, 3>(0, 0) << c, 0, s, 0, 1, 0, -s, 0, c;
    m.block<3, 1>(0, 3) = p.center;
    const auto corners = obb_corners(p);
    for (int i = 0; i < 8; ++i) {
      Eigen::Vector4d local(((i & 1) ? 0.5 : -0.5) * p.scale.x(), ((i & 2) ? 0.5 : -0.5) * p.scale.y(),
                            ((i & 4) ? 0.5 : -0.5) * p.scale.z(), 1.0);
      EXPECT_LT((corners[i] - (m * local).head<3>()).norm(), 1e-12);
    }
  }
}

TEST(Geometry, NormalsAtYawZeroAndQuarterTurn) {
  const auto n0 = obb_normals(PlacementParams({0, 0, 0}, {1, 1, 1}, 0));
  const std::vector<Vec3> axes = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int i = 0; i < 6; ++i) EXPECT_LT((n0[i] - axes[i]).norm(), 1e-15);
  const auto n90 = obb_normals(PlacementParams({0, 0, 0}, {1, 1, 1}, kPi / 2));
  EXPECT_EQ(sorted({n0.begin(), n0.end()}), sorted({n90.begin(), n90.end()}));
}

TEST(Geometry, NormalsMatchExplicitRotation) {
  const auto n = obb_normals(PlacementParams({1, 2, 3}, {1, 2, 3}, 0.3));
  const std::vector<Vec3> axes = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (int i = 0; i < 6; ++i) {
    EXPECT_LT((n[i] - yaw_rotate(axes[i], 0.3)).norm(), 1e-15);
    EXPECT_NEAR(n[i].norm(), 1.0, 1e-15);
  }
}

TEST(Geometry, CornersAndNormalsAreYawEquivariant) {
  Rng rng(12);
  for (int t = 0; t < 100; ++t) {
    PlacementParams p = random_placement(rng);
    const double d = rng.uniform(-3, 3);
    PlacementParams q = p;
    q.center = yaw_rotate(p.center, d);
    q.orientation = wrap_angle(p.orientation + d);
    const auto cp = obb_corners(p), cq = obb_corners(q);
    for (int i = 0; i < 8; ++i) EXPECT_LT((yaw_rotate(cp[i], d) - cq[i]).norm(), 1e-9);
    const auto np = obb_normals(p), nq = obb_normals(q);
    for (int i = 0; i < 6; ++i) EXPECT_LT((yaw_rotate(np[i], d) - nq[i]).norm(), 1e-9);
  }
}

TEST(Geometry, InvalidPlacementThrows) {
  EXPECT_THROW(PlacementParams({0, 0, 0}, {1, 0, 1}, 0), InvalidPlacement);
  EXPECT_THROW(PlacementParams({0, 0, 0}, {1, -2, 1}, 0), InvalidPlacement);
  PlacementParams p;
  p.scale.x() = 0.0;
  EXPECT_THROW(obb_corners(p), InvalidPlacement);
}

TEST(Chamfer, KnownValues) {
  const std::vector<Vec3> a = {{0, 0, 0}}, b = {{1, 0, 0}};
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), 2.0);
  EXPECT_DOUBLE_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_THROW(chamfer_distance(a, std::vector<Vec3>{}), DomainError);
}

TEST(Chamfer, MatchesDoubleLoop) {
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    std::vector<Vec3> a(50), b(50);
    for (auto& p : a) p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (auto& p : b) p = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    auto one_way = [](const std::vector<Vec3>& x, const std::vector<Vec3>& y) {
      double s = 0;
      for (const auto& p : x) {
        double best = 1e300;
        for (const auto& q : y) best = std::min(best, (p - q).squaredNorm());
        s += best;
      }
      return s / static_cast<double>(x.size());
    };
    const double oracle = one_way(a, b) + one_way(b, a);
    EXPECT_LE(rel_err(chamfer_distance(a, b), oracle), 1e-12);
    EXPECT_DOUBLE_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
    // Common rigid motion.
    const double yaw = rng.uniform(-3, 3);
    const Vec3 shift(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    std::vector<Vec3> ra, rb;
    for (const auto& p : a) ra.push_back(yaw_rotate(p, yaw) + shift);
    for (const auto& p : b) rb.push_back(yaw_rotate(p, yaw) + shift);
    EXPECT_NEAR(chamfer_distance(ra, rb), oracle, 1e-9);
  }
}

TEST(Chamfer, ZeroOnlyForEqualSets) {
  std::vector<Vec3> a = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  std::vector<Vec3> b = {{0, 1, 0}, {0, 0, 0}, {1, 0, 0}, {1, 0, 0}};
  EXPECT_EQ(chamfer_distance(a, b), 0.0);
  b.push_back({0, 0, 1e-3});
  EXPECT_GT(chamfer_distance(a, b), 0.0);
}

TEST(SurfaceSamples, OnePointPerFaceOfCube) {
  const auto pts = sample_surface_points(PlacementParams({0, 0, 0}, {1, 1, 1}, 0), 6, 3);
  ASSERT_EQ(pts.size(), 6u);
  std::set<int> faces;
  for (const auto& p : pts) {
    int k;
    p.cwiseAbs().maxCoeff(&k);
    EXPECT_NEAR(std::abs(p[k]), 0.5, 1e-15);
    faces.insert(2 * k + (p[k] < 0));
  }
  EXPECT_EQ(faces.size(), 6u);
}

TEST(SurfaceSamples, FaceCountsFollowAreas) {
  Rng rng(6);
  for (int t = 0; t < 100; ++t) {
    const Vec3 s(rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3));
    const int n = 1 + static_cast<int>(rng.below(5000));
    const auto counts = face_sample_counts(s, n);
    const double areas[3] = {s.y() * s.z(), s.x() * s.z(), s.x() * s.y()};
    const double total = 2 * (areas[0] + areas[1] + areas[2]);
    int sum = 0;
    for (int f = 0; f < 6; ++f) {
      EXPECT_LE(std::abs(counts[f] - n * areas[f / 2] / total), 1.0);
      sum += counts[f];
    }
    EXPECT_EQ(sum, n);
  }
}

TEST(SurfaceSamples, DeterministicPerSeed) {
  const PlacementParams p({1, 0, 2}, {1, 2, 3}, 0.4);
  EXPECT_EQ(sample_surface_points(p, 500, 9), sample_surface_points(p, 500, 9));
  EXPECT_NE(sample_surface_points(p, 500, 9), sample_surface_points(p, 500, 10));
}

TEST(Polygon, PointInPolygonMatchesRayCasting) {
  const std::vector<Vec2> l = {{0, 0}, {4, 0}, {4, 2}, {2, 2}, {2, 4}, {0, 4}};
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const Vec2 q(rng.uniform(-1, 5), rng.uniform(-1, 5));
    bool inside = false;
    for (std::size_t a = 0, b = l.size() - 1; a < l.size(); b = a++) {
      if ((l[a].y() > q.y()) != (l[b].y() > q.y()) &&
          q.x() < (l[b].x() - l[a].x()) * (q.y() - l[a].y()) / (l[b].y() - l[a].y()) + l[a].x()) {
        inside = !inside;
      }
    }
    EXPECT_EQ(point_in_polygon(l, q), inside) << q.transpose();
  }
  EXPECT_TRUE(point_in_polygon(l, Vec2(4, 1)));
  EXPECT_GT(signed_area(l), 0.0);
  EXPECT_TRUE(is_simple_polygon(l));
  const std::vector<Vec2> bowtie = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
  EXPECT_FALSE(is_simple_polygon(bowtie));
}

TEST(Validate, WellFormedTwoRegionScene) { EXPECT_TRUE(validate(two_region_scene()).empty()); }

TEST(Validate, ElevenChildrenViolatesCap) {
  std::vector<ObjectNode> objs;
  for (int i = 0; i < 11; ++i) objs.push_back(make_object("c" + std::to_string(i), "dining_chair", {i * 1.0, 0.45, 0}, {0.45, 0.9, 0.5}, 0));
  const auto v = validate(scene_of(objs));
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "region_child_count");
  EXPECT_EQ(v[0].node, "region_0");
}

TEST(Validate, HyperEdgeAcrossRegions) {
  auto s = two_region_scene();
  s.objects.push_back(make_object("ns2", "nightstand", {-1.1, 0.275, 0}, {0.45, 0.55, 0.4}, 0));
  s.regions[0].children.push_back("ns2");
  HyperEdge h;
  h.type = HyperEdgeType::ParallelCollinear;
  h.members = {"ns", "desk", "ns2"};
  h.direction = {1, 0};
  s.edges.hyper.push_back(h);
  const auto v = validate(s);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "hyper_same_region");
}

TEST(Validate, ReportsBrokenInvariants) {
  auto s = two_region_scene();
  s.objects[0].category = "spaceship";
  s.objects[1].feature.pop_back();
  s.edges.binary.push_back({BinaryEdgeType::Adjacency, "bed", "ghost"});
  std::set<std::string> rules;
  for (const auto& v : validate(s)) rules.insert(v.rule);
  EXPECT_EQ(rules, (std::set<std::string>{"category_vocab", "feature_dim", "edge_endpoint"}));
}

TEST(Validate, OrphanObject) {
  auto s = two_region_scene();
  s.regions[1].children.clear();
  std::set<std::string> rules;
  for (const auto& v : validate(s)) rules.insert(v.rule);
  EXPECT_TRUE(rules.count("single_region"));
  EXPECT_TRUE(rules.count("region_child_count"));
}

TEST(Validate, AcceptsGeneratedScenes) {
  for (const auto& g : gen_corpus(40, 77)) EXPECT_TRUE(validate(g.scene).empty()) << g.scene.room_id;
}

TEST(Serialize, EmptyRoomRoundTrip) {
  SceneHierarchy s;
  s.room_id = "empty";
  s.floor = rect_floor(0, 0, 3, 4);
  const std::string text = serialize_scene(s);
  EXPECT_EQ(deserialize_scene(text), s);
  EXPECT_EQ(serialize_scene(deserialize_scene(text)), text);
}

TEST(Serialize, AllEdgeTypesRoundTrip) {
  for (const auto& g : gen_corpus(30, 3)) {
    const std::string text = serialize_scene(g.scene);
    const SceneHierarchy back = deserialize_scene(text);
    EXPECT_EQ(back, g.scene);
    EXPECT_EQ(serialize_scene(back), text);
  }
  auto s = two_region_scene();
  s.objects[0].placement.center.x() = 0.1 + 0.2;  // not representable in 15 digits
  s.edges.binary = {{BinaryEdgeType::Adjacency, "bed", "ns"}, {BinaryEdgeType::Translational, "bed", "ns"},
                    {BinaryEdgeType::Reflective, "bed", "ns"}, {BinaryEdgeType::Rotational, "bed", "ns"}};
  HyperEdge rot;
  rot.type = HyperEdgeType::NFoldRotation;
  rot.members = {"bed", "ns", "desk"};
  rot.center = {1.0 / 3.0, -2.0 / 7.0};
  rot.fold = 3;
  rot.hub = "desk";
  s.edges.hyper.push_back(rot);
  s.edges.vertical = {{"bed", true, false}, {"ns", false, true}, {"desk", true, true}};
  EXPECT_EQ(deserialize_scene(serialize_scene(s)), s);
}

TEST(Serialize, TruncatedInputNeverAborts) {
  const std::string text = serialize_scene(gen_corpus(1, 9)[0].scene);
  Rng rng(13);
  int parse_errors = 0;
  for (int i = 0; i < 300; ++i) {
    std::string fuzzed = text.substr(0, rng.below(text.size()));
    if (i % 3 == 1 && !fuzzed.empty()) fuzzed[rng.below(fuzzed.size())] = static_cast<char>(rng.below(128));
    try {
      deserialize_scene(fuzzed);
    } catch (const ParseError& e) {
      ++parse_errors;
      EXPECT_FALSE(e.where().empty());
    }
  }
  EXPECT_GT(parse_errors, 250);
}

TEST(Serialize, WrongFieldTypeNamesLocation) {
  Json j = scene_to_json(two_region_scene());
  j["objects"][1]["center"] = "oops";
  try {
    scene_from_json(j);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_NE(e.where().find("/objects/1/center"), std::string::npos) << e.where();
  }
}
