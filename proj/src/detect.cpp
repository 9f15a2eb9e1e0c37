#include "scenehgn/detect.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "json.hpp"
#include "scenehgn/energy.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/serialize.hpp"

namespace scenehgn {

namespace {

constexpr double kPi = std::numbers::pi;

// Distance to the nearest multiple of `period`.
double wrap_period(double x, double period) { return x - period * std::round(x / period); }

std::vector<Vec2> ground_centers(std::span<const ObjectNode> objects) {
  std::vector<Vec2> out;
  for (const auto& o : objects) out.push_back(ground(o.placement.center));
  return out;
}

Vec2 mean_of(std::span<const Vec2> pts) {
  Vec2 m = Vec2::Zero();
  for (const auto& p : pts) m += p;
  return m / static_cast<double>(pts.size());
}

struct SampleCache {
  explicit SampleCache(std::span<const ObjectNode> objects) : objects(objects), pts(objects.size()) {}
  const std::vector<Vec3>& get(std::size_t i) {
    if (pts[i].empty()) pts[i] = sample_surface_points(objects[i].placement, kDetectionSamples);
    return pts[i];
  }
  std::span<const ObjectNode> objects;
  std::vector<std::vector<Vec3>> pts;
};

bool adjacency_with(const ObjectNode& a, const ObjectNode& b, const DetectionThresholds& th,
                    const std::vector<Vec3>* sa, const std::vector<Vec3>* sb) {
  const double threshold =
      th.adjacency_factor * 0.5 * (bounding_radius(a.placement) + bounding_radius(b.placement));
  // Every sample lies within its bounding sphere, so a large sphere gap decides early.
  const double gap = (a.placement.center - b.placement.center).norm() - bounding_radius(a.placement) -
                     bounding_radius(b.placement);
  if (gap >= threshold) return false;
  std::vector<Vec3> la, lb;
  if (!sa) sa = &(la = sample_surface_points(a.placement, kDetectionSamples));
  if (!sb) sb = &(lb = sample_surface_points(b.placement, kDetectionSamples));
  return min_pairwise_distance(*sa, *sb) < threshold;
}

SymmetrySet classify(const PairResiduals& r, const PlacementParams& a, const PlacementParams& b,
                     const DetectionThresholds& th) {
  SymmetrySet s;
  s.residuals = r;
  const bool congruent = r.extent <= th.symmetry_tol;
  const bool level = r.height <= th.symmetry_tol;
  const double separation = (ground(a.center) - ground(b.center)).norm();
  s.translational = congruent && r.yaw <= th.align_angle_tol;
  s.reflective = congruent && level && separation > th.symmetry_tol && r.mirror_yaw <= th.align_angle_tol;
  s.rotational = congruent && level && r.yaw > th.align_angle_tol;
  return s;
}

struct UnionFind {
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
  std::vector<std::size_t> parent;
};

std::vector<ObjectNode> region_objects(const SceneHierarchy& scene, const RegionNode& region) {
  std::vector<ObjectNode> out;
  for (const auto& id : region.children) {
    if (const auto* o = scene.find_object(id)) out.push_back(*o);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  return out;
}

std::vector<std::string> sorted_ids(std::span<const ObjectNode> objects) {
  std::vector<std::string> ids;
  for (const auto& o : objects) ids.push_back(o.id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

void DetectionThresholds::check() const {
  for (double v : {adjacency_factor, symmetry_tol, eps_r, eps_t, align_angle_tol, parallel_angle_tol,
                   merge_factor}) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("detection thresholds must be strictly positive");
  }
}

DetectionThresholds load_thresholds(const std::string& path) {
  const Json j = parse_json(read_text_file(path), path);
  DetectionThresholds th;
  const std::pair<const char*, double*> keys[] = {
      {"adjacency_factor", &th.adjacency_factor}, {"symmetry_tol", &th.symmetry_tol},
      {"eps_r", &th.eps_r},                       {"eps_t", &th.eps_t},
      {"align_angle_tol", &th.align_angle_tol},   {"parallel_angle_tol", &th.parallel_angle_tol},
      {"merge_factor", &th.merge_factor}};
  for (const auto& [key, dst] : keys) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number()) throw ParseError(path + ":/" + key, "expected a number");
    *dst = j[key].get<double>();
  }
  th.check();
  return th;
}

double mirrored_yaw(const PlacementParams& a, const PlacementParams& b) {
  const Vec2 d = ground(b.center) - ground(a.center);
  const double psi = std::atan2(d.y(), d.x());
  return wrap_angle(-a.orientation - 2.0 * psi - kPi);
}

Vec2 rotation_center(const Vec2& a, const Vec2& b, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  const Eigen::Matrix2d m = Eigen::Matrix2d::Identity() - r;
  return m.partialPivLu().solve(b - r * a);
}

PairResiduals pair_residuals(const PlacementParams& a, const PlacementParams& b) {
  PairResiduals r;
  r.extent = (a.scale - b.scale).cwiseAbs().maxCoeff();
  r.height = std::abs(a.center.y() - b.center.y());
  r.rotation_angle = wrap_angle(b.orientation - a.orientation);
  r.yaw = std::abs(r.rotation_angle);
  if ((ground(a.center) - ground(b.center)).norm() > 0.0) {
    r.mirror_yaw = std::abs(wrap_period(b.orientation - mirrored_yaw(a, b), kPi));
  } else {
    r.mirror_yaw = kPi;
  }
  if (r.yaw > 0.0) r.rotation_center = rotation_center(ground(a.center), ground(b.center), r.rotation_angle);
  return r;
}

bool detect_adjacency(const ObjectNode& a, const ObjectNode& b, const DetectionThresholds& th) {
  return adjacency_with(a, b, th, nullptr, nullptr);
}

SymmetrySet detect_binary_symmetries(const ObjectNode& a, const ObjectNode& b, const DetectionThresholds& th) {
  return classify(pair_residuals(a.placement, b.placement), a.placement, b.placement, th);
}

NFoldFit fit_nfold(std::span<const ObjectNode> objects, int samples) {
  NFoldFit fit;
  const std::size_t n = objects.size();
  const auto centers = ground_centers(objects);
  fit.center = mean_of(centers);
  std::vector<double> angle(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 d = centers[i] - fit.center;
    angle[i] = std::atan2(-d.y(), d.x());
  }
  fit.order.resize(n);
  std::iota(fit.order.begin(), fit.order.end(), 0);
  // Ties broken by id so the order does not depend on the input permutation.
  std::sort(fit.order.begin(), fit.order.end(), [&](int x, int y) {
    if (angle[x] != angle[y]) return angle[x] < angle[y];
    return objects[x].id < objects[y].id;
  });
  const double step = 2.0 * kPi / static_cast<double>(n);
  std::vector<std::vector<Vec3>> pts(n);
  for (std::size_t i = 0; i < n; ++i) pts[i] = sample_surface_points(objects[i].placement, samples);
  for (std::size_t k = 0; k < n; ++k) {
    const int cur = fit.order[k];
    const int next = fit.order[(k + 1) % n];
    const auto rotated = rotate_about(pts[cur], fit.center, step);
    fit.chamfer.push_back(chamfer_distance(pts[next], rotated));
  }
  return fit;
}

std::optional<HyperEdge> detect_nfold_rotation(std::span<const ObjectNode> objects, const DetectionThresholds& th) {
  if (objects.size() < 3) return std::nullopt;
  const NFoldFit fit = fit_nfold(objects);
  for (double cd : fit.chamfer) {
    if (!(cd <= th.eps_r)) return std::nullopt;
  }
  HyperEdge e;
  e.type = HyperEdgeType::NFoldRotation;
  e.members = sorted_ids(objects);
  e.center = fit.center;
  e.fold = static_cast<int>(objects.size());
  return e;
}

Vec2 parallel_direction(std::span<const Vec2> centers) {
  std::vector<Vec2> c(centers.begin(), centers.end());
  std::sort(c.begin(), c.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  if (c.size() < 2) return Vec2::Zero();
  const Vec2 ref = c.back() - c.front();
  Vec2 sum = Vec2::Zero();
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = i + 1; j < c.size(); ++j) {
      const Vec2 d = c[j] - c[i];
      sum += d.dot(ref) < 0.0 ? Vec2(-d) : d;
    }
  }
  const double n = sum.norm();
  return n > 0.0 ? Vec2(sum / n) : Vec2::Zero();
}

std::optional<HyperEdge> detect_parallel_collinear(std::span<const ObjectNode> objects,
                                                   const DetectionThresholds& th) {
  if (objects.size() < 3) return std::nullopt;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    for (std::size_t j = i + 1; j < objects.size(); ++j) {
      const double d = objects[j].placement.orientation - objects[i].placement.orientation;
      if (std::abs(wrap_period(d, kPi / 2)) > th.parallel_angle_tol) return std::nullopt;
    }
  }
  const auto centers = ground_centers(objects);
  const Vec2 v = parallel_direction(centers);
  if (v.isZero()) return std::nullopt;
  const Vec2 p = mean_of(centers);
  for (const auto& c : centers) {
    const Vec2 d = c - p;
    const double along = d.dot(v);
    if (d.squaredNorm() - along * along > th.eps_t) return std::nullopt;
  }
  HyperEdge e;
  e.type = HyperEdgeType::ParallelCollinear;
  e.members = sorted_ids(objects);
  e.direction = v;
  return e;
}

std::vector<HyperEdge> extract_hyperedges(const SceneHierarchy& scene, const RegionNode& region,
                                          const DetectionThresholds& th) {
  std::vector<HyperEdge> out;
  const auto objs = region_objects(scene, region);
  const std::size_t n = objs.size();
  if (n <= 2) return out;

  // Parallel: greedy merging of index sets, kept sorted by smallest member.
  {
    std::vector<std::vector<std::size_t>> sets;
    for (std::size_t i = 0; i < n; ++i) sets.push_back({i});
    const double bound = th.merge_factor * th.eps_t;
    auto same_facing = [&](const std::vector<std::size_t>& s) {
      for (std::size_t k = 1; k < s.size(); ++k) {
        const double d = wrap_angle(objs[s[k]].placement.orientation - objs[s[0]].placement.orientation);
        if (std::abs(d) > th.align_angle_tol) return false;
      }
      return true;
    };
    bool merged = true;
    while (merged) {
      merged = false;
      for (std::size_t a = 0; a < sets.size() && !merged; ++a) {
        for (std::size_t b = a + 1; b < sets.size() && !merged; ++b) {
          std::vector<std::size_t> u = sets[a];
          u.insert(u.end(), sets[b].begin(), sets[b].end());
          std::sort(u.begin(), u.end());
          if (!same_facing(u)) continue;
          std::vector<PlacementParams> ps;
          for (auto i : u) ps.push_back(objs[i].placement);
          if (hyper_parallel_loss(ps).total() > bound) continue;
          sets[a] = std::move(u);
          sets.erase(sets.begin() + static_cast<std::ptrdiff_t>(b));
          merged = true;
        }
      }
    }
    for (const auto& s : sets) {
      if (s.size() < 3) continue;
      std::vector<ObjectNode> members;
      for (auto i : s) members.push_back(objs[i]);
      if (auto e = detect_parallel_collinear(members, th)) out.push_back(std::move(*e));
    }
  }

  // Rotational: pairs with nearby rotation centers are merged, then validated.
  {
    struct Pair {
      std::size_t a, b;
      Vec2 center;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const auto s = detect_binary_symmetries(objs[i], objs[j], th);
        if (s.rotational) pairs.push_back({i, j, s.residuals.rotation_center});
      }
    }
    UnionFind uf(pairs.size());
    const double radius = th.merge_factor * th.symmetry_tol;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      for (std::size_t q = p + 1; q < pairs.size(); ++q) {
        if ((pairs[p].center - pairs[q].center).norm() <= radius) uf.unite(p, q);
      }
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      auto& g = groups[uf.find(p)];
      g.push_back(pairs[p].a);
      g.push_back(pairs[p].b);
    }
    for (auto& [root, g] : groups) {
      std::sort(g.begin(), g.end());
      g.erase(std::unique(g.begin(), g.end()), g.end());
      if (g.size() < 3) continue;
      std::vector<ObjectNode> members;
      for (auto i : g) members.push_back(objs[i]);
      auto e = detect_nfold_rotation(members, th);
      if (!e) continue;
      // Members must face the common center.
      bool facing = true;
      for (const auto& m : members) {
        const Vec2 to_center = e->center - ground(m.placement.center);
        const double dev = wrap_angle(direction_yaw(to_center) - m.placement.orientation);
        if (to_center.norm() == 0.0 || std::abs(dev) > th.align_angle_tol) facing = false;
      }
      if (!facing) continue;
      double best = radius;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::binary_search(g.begin(), g.end(), i)) continue;
        const double d = (ground(objs[i].placement.center) - e->center).norm();
        if (d <= best) {
          best = d;
          e->hub = objs[i].id;
        }
      }
      out.push_back(std::move(*e));
    }
  }
  std::sort(out.begin(), out.end(), [](const HyperEdge& x, const HyperEdge& y) {
    return x.members.front() < y.members.front();
  });
  return out;
}

std::vector<VerticalFlags> detect_room_object_edges(const SceneHierarchy& scene, const DetectionThresholds& th) {
  if (!is_simple_polygon(scene.floor)) throw InvalidFloor("floor polygon is not simple");
  std::vector<VerticalFlags> out;
  for (const auto& o : scene.objects) {
    VerticalFlags f;
    f.object = o.id;
    f.align = std::abs(wrap_period(o.placement.orientation, kPi / 2)) <= th.align_angle_tol;
    f.inside = true;
    for (const auto& c : ground_corners(o.placement)) {
      if (!point_in_polygon(scene.floor, c)) f.inside = false;
    }
    out.push_back(f);
  }
  return out;
}

std::vector<BinaryEdge> detect_binary_edges(const SceneHierarchy& scene, const DetectionThresholds& th) {
  std::vector<std::vector<ObjectNode>> groups;
  if (scene.regions.empty()) {
    groups.push_back(scene.objects);
    std::sort(groups[0].begin(), groups[0].end(), [](const auto& x, const auto& y) { return x.id < y.id; });
  } else {
    for (const auto& r : scene.regions) groups.push_back(region_objects(scene, r));
  }
  std::vector<BinaryEdge> out;
  for (const auto& objs : groups) {
    SampleCache cache(objs);
    for (std::size_t i = 0; i < objs.size(); ++i) {
      for (std::size_t j = i + 1; j < objs.size(); ++j) {
        const auto& a = objs[i];
        const auto& b = objs[j];
        const double threshold =
            th.adjacency_factor * 0.5 * (bounding_radius(a.placement) + bounding_radius(b.placement));
        const double gap = (a.placement.center - b.placement.center).norm() -
                           bounding_radius(a.placement) - bounding_radius(b.placement);
        bool adjacent = false;
        if (gap < threshold) adjacent = adjacency_with(a, b, th, &cache.get(i), &cache.get(j));
        if (adjacent) out.push_back({BinaryEdgeType::Adjacency, a.id, b.id});
        const auto s = detect_binary_symmetries(a, b, th);
        if (s.translational) out.push_back({BinaryEdgeType::Translational, a.id, b.id});
        if (s.reflective) out.push_back({BinaryEdgeType::Reflective, a.id, b.id});
        if (s.rotational) out.push_back({BinaryEdgeType::Rotational, a.id, b.id});
      }
    }
  }
  return out;
}

void canonicalize_edges(EdgeSet& edges, const SceneHierarchy& scene) {
  for (auto& e : edges.binary) {
    if (e.b < e.a) std::swap(e.a, e.b);
  }
  std::sort(edges.binary.begin(), edges.binary.end(), [](const BinaryEdge& x, const BinaryEdge& y) {
    return std::tie(x.type, x.a, x.b) < std::tie(y.type, y.a, y.b);
  });
  for (auto& h : edges.hyper) std::sort(h.members.begin(), h.members.end());
  std::sort(edges.hyper.begin(), edges.hyper.end(), [](const HyperEdge& x, const HyperEdge& y) {
    if (x.members.empty() || y.members.empty()) return x.members.size() < y.members.size();
    return std::tie(x.members.front(), x.type) < std::tie(y.members.front(), y.type);
  });
  std::stable_sort(edges.vertical.begin(), edges.vertical.end(),
                   [&](const VerticalFlags& x, const VerticalFlags& y) {
                     return scene.object_index(x.object) < scene.object_index(y.object);
                   });
}

SceneHierarchy detect_relations(const SceneHierarchy& scene, const DetectionThresholds& th) {
  th.check();
  SceneHierarchy out = scene;
  out.edges = {};
  out.edges.binary = detect_binary_edges(scene, th);
  for (const auto& r : scene.regions) {
    auto h = extract_hyperedges(scene, r, th);
    out.edges.hyper.insert(out.edges.hyper.end(), h.begin(), h.end());
  }
  if (!scene.objects.empty()) out.edges.vertical = detect_room_object_edges(scene, th);
  canonicalize_edges(out.edges, out);
  return out;
}

}  // namespace scenehgn
