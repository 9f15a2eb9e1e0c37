#include "scenehgn/regions.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <unordered_map>

#include "scenehgn/errors.hpp"

namespace scenehgn {

namespace {

// Uniform grid with cell size eps; neighbours of a point lie in the 27
// surrounding cells.
class Grid {
 public:
  Grid(std::span<const Vec3> pts, double eps) : pts_(pts), eps_(eps) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell(pts[i]))].push_back(i);
  }

  template <typename F>
  void for_each_neighbor(std::size_t i, F&& f) const {
    const auto c = cell(pts_[i]);
    const double eps2 = eps_ * eps_;
    for (long dx = -1; dx <= 1; ++dx) {
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find(key({c[0] + dx, c[1] + dy, c[2] + dz}));
          if (it == cells_.end()) continue;
          for (std::size_t j : it->second) {
            if ((pts_[j] - pts_[i]).squaredNorm() <= eps2) f(j);
          }
        }
      }
    }
  }

 private:
  std::array<long, 3> cell(const Vec3& p) const {
    return {static_cast<long>(std::floor(p.x() / eps_)), static_cast<long>(std::floor(p.y() / eps_)),
            static_cast<long>(std::floor(p.z() / eps_))};
  }
  static std::uint64_t key(const std::array<long, 3>& c) {
    auto u = [](long v) { return static_cast<std::uint64_t>(v + (1L << 20)) & 0x1FFFFF; };
    return (u(c[0]) << 42) | (u(c[1]) << 21) | u(c[2]);
  }

  std::span<const Vec3> pts_;
  double eps_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

double floor_area(const ObjectNode& o) { return o.placement.scale.x() * o.placement.scale.z(); }

// Clusters a subset of objects (indices into `objects`), returning groups of
// object indices: clusters in label order, then noise-only singletons.
std::vector<std::vector<std::size_t>> cluster_objects(std::span<const ObjectNode> objects,
                                                      const std::vector<std::size_t>& subset, double eps,
                                                      const ClusterParams& params) {
  std::vector<Vec3> pts;
  std::vector<std::size_t> owner;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto s = sample_surface_points(objects[subset[k]].placement, params.samples_per_object);
    pts.insert(pts.end(), s.begin(), s.end());
    owner.insert(owner.end(), s.size(), k);
  }
  const auto labels = dbscan(pts, eps, params.min_pts);
  std::vector<std::map<int, int>> votes(subset.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (labels[i] != kNoise) ++votes[owner[i]][labels[i]];
  }
  std::map<int, std::vector<std::size_t>> clusters;
  std::vector<std::vector<std::size_t>> singletons;
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (votes[k].empty()) {
      singletons.push_back({subset[k]});
      continue;
    }
    int best = -1, best_count = -1;
    for (const auto& [label, count] : votes[k]) {
      if (count > best_count) {
        best = label;
        best_count = count;
      }
    }
    clusters[best].push_back(subset[k]);
  }
  std::vector<std::vector<std::size_t>> out;
  for (auto& [label, members] : clusters) out.push_back(std::move(members));
  for (auto& s : singletons) out.push_back(std::move(s));
  return out;
}

void split_until_capped(std::span<const ObjectNode> objects, std::vector<std::size_t> group, double eps,
                        const ClusterParams& params, std::vector<std::vector<std::size_t>>& out) {
  if (static_cast<int>(group.size()) <= kMaxChildren) {
    out.push_back(std::move(group));
    return;
  }
  const double half = eps / 2.0;
  if (half >= 1e-3) {
    auto parts = cluster_objects(objects, group, half, params);
    if (parts.size() > 1) {
      for (auto& p : parts) split_until_capped(objects, std::move(p), half, params, out);
      return;
    }
    split_until_capped(objects, std::move(group), half, params, out);
    return;
  }
  // Fallback when shrinking the radius no longer separates anything.
  for (std::size_t i = 0; i < group.size(); i += kMaxChildren) {
    const auto end = std::min(group.size(), i + kMaxChildren);
    out.emplace_back(group.begin() + static_cast<std::ptrdiff_t>(i), group.begin() + static_cast<std::ptrdiff_t>(end));
  }
}

}  // namespace

void ClusterParams::check() const {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("eps must be positive");
  if (min_pts < 1) throw ConfigError("min_pts must be at least 1");
  if (samples_per_object < 1) throw ConfigError("samples_per_object must be at least 1");
}

std::vector<int> dbscan(std::span<const Vec3> points, double eps, int min_pts) {
  const std::size_t n = points.size();
  std::vector<int> labels(n, kNoise);
  if (n == 0) return labels;
  const Grid grid(points, eps);
  std::vector<char> core(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    int count = 0;
    grid.for_each_neighbor(i, [&](std::size_t) { ++count; });
    core[i] = count >= min_pts;
  }
  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t i = 0; i < n; ++i) {
    if (!core[i] || labels[i] != kNoise) continue;
    labels[i] = next;
    queue.push_back(i);
    while (!queue.empty()) {
      const std::size_t p = queue.front();
      queue.pop_front();
      grid.for_each_neighbor(p, [&](std::size_t q) {
        if (core[q] && labels[q] == kNoise) {
          labels[q] = next;
          queue.push_back(q);
        }
      });
    }
    ++next;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (core[i]) continue;
    std::size_t first = n;
    grid.for_each_neighbor(i, [&](std::size_t q) {
      if (core[q] && q < first) first = q;
    });
    if (first < n) labels[i] = labels[first];
  }
  return labels;
}

std::vector<RegionNode> extract_regions(std::span<const ObjectNode> objects, const ClusterParams& params,
                                        const SceneConfig& config) {
  params.check();
  if (objects.empty()) throw DomainError("region extraction needs at least one object");
  std::vector<std::size_t> all(objects.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::vector<std::size_t>> groups;
  for (auto& g : cluster_objects(objects, all, params.eps, params)) {
    split_until_capped(objects, std::move(g), params.eps, params, groups);
  }
  std::vector<RegionNode> out;
  for (auto& g : groups) {
    std::sort(g.begin(), g.end());
    RegionNode r;
    r.id = "region_" + std::to_string(out.size());
    std::size_t largest = g.front();
    for (auto i : g) {
      if (floor_area(objects[i]) > floor_area(objects[largest])) largest = i;
      r.children.push_back(objects[i].id);
    }
    r.region_type = config.region_for(objects[largest].category);
    out.push_back(std::move(r));
  }
  return out;
}

SceneHierarchy assign_regions(const SceneHierarchy& scene, const ClusterParams& params, const SceneConfig& config) {
  SceneHierarchy out = scene;
  out.regions = extract_regions(scene.objects, params, config);
  // Edges across the new partition may no longer be meaningful; hyper-edges
  // spanning two regions are dropped so the result stays valid.
  std::erase_if(out.edges.hyper, [&](const HyperEdge& h) {
    const RegionNode* first = nullptr;
    for (const auto& m : h.members) {
      const auto* r = out.region_of(m);
      if (first && r != first) return true;
      first = r;
    }
    return false;
  });
  for (auto& h : out.edges.hyper) {
    if (h.hub && !h.members.empty() && out.region_of(*h.hub) != out.region_of(h.members.front())) h.hub.reset();
  }
  return out;
}

}  // namespace scenehgn
