#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numbers>
#include <set>

#include "common.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/regions.hpp"
#include "scenehgn/synth.hpp"

using namespace scenehgn;
using namespace scenehgn::testing;

namespace {

// Textbook quadratic DBSCAN with the same border rule (lowest-index core
// neighbour).
std::vector<int> reference_dbscan(const std::vector<Vec3>& pts, double eps, int min_pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if ((pts[i] - pts[j]).norm() <= eps) nb[i].push_back(j);
    }
  }
  std::vector<int> label(n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(nb[i].size()) < min_pts || label[i] != -1) continue;
    std::vector<std::size_t> stack = {i};
    label[i] = next;
    while (!stack.empty()) {
      const auto p = stack.back();
      stack.pop_back();
      for (auto q : nb[p]) {
        if (static_cast<int>(nb[q].size()) >= min_pts && label[q] == -1) {
          label[q] = next;
          stack.push_back(q);
        }
      }
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (static_cast<int>(nb[i].size()) >= min_pts) continue;
    for (auto q : nb[i]) {  // neighbours are listed in index order
      if (static_cast<int>(nb[q].size()) >= min_pts) {
        label[i] = label[q];
        break;
      }
    }
  }
  return label;
}

bool same_up_to_permutation(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] == kNoise) != (b[i] == kNoise)) return false;
    if (a[i] == kNoise) continue;
    if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
    if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
  }
  return true;
}

std::set<std::set<std::string>> partition(const std::vector<RegionNode>& regions) {
  std::set<std::set<std::string>> out;
  for (const auto& r : regions) out.insert({r.children.begin(), r.children.end()});
  return out;
}

ClusterParams fast_params() {
  ClusterParams p;
  p.samples_per_object = 1000;
  p.min_pts = 10;
  return p;
}

}  // namespace

TEST(Dbscan, TwoBlobsFarApart) {
  Rng rng(41);
  std::vector<Vec3> pts;
  for (int i = 0; i < 200; ++i) {
    const Vec3 base = i < 100 ? Vec3(0, 0, 0) : Vec3(10, 0, 0);
    pts.push_back(base + Vec3(rng.normal(0, 0.1), rng.normal(0, 0.1), rng.normal(0, 0.1)));
  }
  const auto labels = dbscan(pts, 0.5, 5);
  EXPECT_EQ(std::set<int>(labels.begin(), labels.end()), (std::set<int>{0, 1}));
}

TEST(Dbscan, ChainIsOneCluster) {
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.push_back({0.3 * i, 0, 0});
  const auto labels = dbscan(pts, 0.5, 2);
  EXPECT_EQ(std::set<int>(labels.begin(), labels.end()), (std::set<int>{0}));
}

TEST(Dbscan, MatchesQuadraticReference) {
  Rng rng(42);
  for (int t = 0; t < 30; ++t) {
    std::vector<Vec3> pts;
    const int n = 50 + static_cast<int>(rng.below(250));
    for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(0, 4), rng.uniform(0, 1), rng.uniform(0, 4)});
    const double eps = rng.uniform(0.15, 0.6);
    const int min_pts = 1 + static_cast<int>(rng.below(8));
    EXPECT_TRUE(same_up_to_permutation(dbscan(pts, eps, min_pts), reference_dbscan(pts, eps, min_pts))) << t;
  }
}

TEST(Regions, ParamsRejectInvalid) {
  ClusterParams p;
  p.eps = 0.0;
  EXPECT_THROW(p.check(), ConfigError);
  p = {};
  p.min_pts = 0;
  EXPECT_THROW(p.check(), ConfigError);
}

TEST(Regions, BedroomWithFarWardrobe) {
  const std::vector<ObjectNode> objs = {
      make_object("bed", "bed", {0, 0.25, 0}, {1.6, 0.5, 2.0}, 0),
      make_object("ns_l", "nightstand", {-1.025, 0.275, -0.7}, {0.45, 0.55, 0.4}, 0),
      make_object("ns_r", "nightstand", {1.025, 0.275, -0.7}, {0.45, 0.55, 0.4}, 0),
      make_object("wardrobe", "wardrobe", {4.5, 1.0, 0}, {1.0, 2.0, 0.6}, 0)};
  const auto regions = extract_regions(objs, fast_params());
  ASSERT_EQ(regions.size(), 2u);
  EXPECT_EQ(partition(regions), (std::set<std::set<std::string>>{{"bed", "ns_l", "ns_r"}, {"wardrobe"}}));
  for (const auto& r : regions) {
    EXPECT_EQ(r.region_type, r.children.size() == 3 ? RegionType::Living : RegionType::Cabinet);
  }
}

TEST(Regions, DiningGroupIsOneDiningRegion) {
  std::vector<ObjectNode> objs = {make_object("table", "dining_table", {0, 0.375, 0}, {1.2, 0.75, 1.2}, 0)};
  for (int i = 0; i < 4; ++i) {
    const double phi = i * std::numbers::pi / 2;
    objs.push_back(make_object("chair" + std::to_string(i), "dining_chair",
                               {1.0 * std::cos(phi), 0.45, -1.0 * std::sin(phi)}, {0.45, 0.9, 0.5}, phi));
  }
  const auto regions = extract_regions(objs, fast_params());
  ASSERT_EQ(regions.size(), 1u);
  EXPECT_EQ(regions[0].region_type, RegionType::Dining);
}

TEST(Regions, RecoversPlantedPartition) {
  for (const auto& g : gen_corpus(15, 43)) {
    const auto regions = extract_regions(g.scene.objects, fast_params());
    EXPECT_EQ(partition(regions), partition(g.scene.regions)) << g.scene.room_id;
  }
}

TEST(Regions, PartitionAndInvariances) {
  const auto g = gen_corpus(6, 44);
  for (const auto& s : g) {
    const auto base = extract_regions(s.scene.objects, fast_params());
    std::multiset<std::string> seen;
    for (const auto& r : base) seen.insert(r.children.begin(), r.children.end());
    EXPECT_EQ(seen.size(), s.scene.objects.size());
    EXPECT_EQ(std::set<std::string>(seen.begin(), seen.end()).size(), seen.size());

    auto shifted = s.scene.objects;
    for (auto& o : shifted) o.placement.center += Vec3(13.7, 0, -4.2);
    EXPECT_EQ(partition(extract_regions(shifted, fast_params())), partition(base));

    auto renamed = s.scene.objects;
    std::map<std::string, std::string> rename;
    for (auto& o : renamed) o.id = rename[o.id] = "x_" + std::to_string(renamed.size() * 7 % 13) + o.id;
    std::set<std::set<std::string>> expected;
    for (const auto& part : partition(base)) {
      std::set<std::string> p;
      for (const auto& id : part) p.insert(rename[id]);
      expected.insert(p);
    }
    EXPECT_EQ(partition(extract_regions(renamed, fast_params())), expected);
  }
}

TEST(Regions, SmallerEpsOnlySplits) {
  for (const auto& g : gen_corpus(8, 45)) {
    ClusterParams wide = fast_params(), narrow = fast_params();
    narrow.eps = 0.3;
    const auto coarse = partition(extract_regions(g.scene.objects, wide));
    for (const auto& fine : partition(extract_regions(g.scene.objects, narrow))) {
      bool contained = false;
      for (const auto& c : coarse) contained |= std::includes(c.begin(), c.end(), fine.begin(), fine.end());
      EXPECT_TRUE(contained) << g.scene.room_id;
    }
  }
}

TEST(Regions, ChildCapIsEnforced) {
  std::vector<ObjectNode> objs;
  for (int i = 0; i < 14; ++i) {
    objs.push_back(make_object("w" + std::to_string(i), "wardrobe", {1.0 * i, 1.0, 0}, {1.0, 2.0, 0.6}, 0));
  }
  const auto regions = extract_regions(objs, fast_params());
  std::size_t total = 0;
  for (const auto& r : regions) {
    EXPECT_LE(r.children.size(), 10u);
    total += r.children.size();
  }
  EXPECT_EQ(total, objs.size());
}

TEST(Regions, AssignKeepsSceneValid) {
  for (const auto& g : gen_corpus(5, 46)) {
    const auto s = assign_regions(g.scene, fast_params());
    EXPECT_TRUE(validate(s).empty()) << g.scene.room_id;
  }
}
