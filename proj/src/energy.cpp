#include "scenehgn/energy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Geometry>

#include "scenehgn/autodiff.hpp"
#include "scenehgn/detect.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/kdtree.hpp"
#include "scenehgn/serialize.hpp"

namespace scenehgn {

namespace {

constexpr double kPi = std::numbers::pi;
using ad::Var;
using ad::value;
using std::atan2;
using std::cos;
using std::sin;
using std::sqrt;

template <typename T>
struct P3 {
  T x, y, z;
};

template <typename T>
struct Pose {
  T cx, cy, cz, sx, sy, sz, th;
};

template <typename T>
Pose<T> constant_pose(const PlacementParams& p) {
  return {T(p.center.x()), T(p.center.y()), T(p.center.z()), T(p.scale.x()), T(p.scale.y()),
          T(p.scale.z()), T(p.orientation)};
}

// Subtracting a constant multiple of 2 pi keeps derivatives intact.
template <typename T>
T wrap_t(const T& x) {
  const double v = value(x);
  return x - T(v - wrap_angle(v));
}

template <typename T>
T wrap_half_pi(const T& x) {
  return x - T(kPi * std::round(value(x) / kPi));
}

template <typename T>
Vec3 to_vec(const P3<T>& p) {
  return {value(p.x), value(p.y), value(p.z)};
}

template <typename T>
std::vector<Vec3> values_of(const std::vector<P3<T>>& pts) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.push_back(to_vec(p));
  return out;
}

// Index of the nearest point of `to` for every point of `from`.
std::vector<std::size_t> nearest_indices(const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
  std::vector<std::size_t> idx(from.size());
  if (from.size() * to.size() <= 4096) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < to.size(); ++j) {
        const double d = (from[i] - to[j]).squaredNorm();
        if (d < best) {
          best = d;
          idx[i] = j;
        }
      }
    }
    return idx;
  }
  KdTree<double> tree(to);
  for (std::size_t i = 0; i < from.size(); ++i) idx[i] = tree.nearest(from[i]).index;
  return idx;
}

template <typename T>
T sq_dist(const P3<T>& a, const P3<T>& b) {
  const T dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

template <typename T>
T directed(const std::vector<P3<T>>& from, const std::vector<P3<T>>& to, const std::vector<std::size_t>& idx) {
  T sum(0.0);
  for (std::size_t i = 0; i < from.size(); ++i) sum += sq_dist(from[i], to[idx[i]]);
  return sum / T(static_cast<double>(from.size()));
}

template <typename T>
T chamfer_t(const std::vector<P3<T>>& a, const std::vector<P3<T>>& b) {
  const auto va = values_of(a), vb = values_of(b);
  return directed(a, b, nearest_indices(va, vb)) + directed(b, a, nearest_indices(vb, va));
}

template <typename T>
std::vector<P3<T>> rotated_normals(const T& th) {
  const T c = cos(th), s = sin(th);
  const T zero(0.0), one(1.0);
  // Yaw rotation of +x, -x, +y, -y, +z, -z.
  return {{c, zero, -s}, {-c, zero, s}, {zero, one, zero}, {zero, -one, zero}, {s, zero, c}, {-s, zero, -c}};
}

template <typename T>
std::vector<P3<T>> canonical_normals() {
  std::vector<P3<T>> out;
  for (const auto& n : unit_box_normals()) out.push_back({T(n.x()), T(n.y()), T(n.z())});
  return out;
}

template <typename T>
T room_object_t(const T& th) {
  return chamfer_t(rotated_normals(th), canonical_normals<T>());
}

template <typename T>
std::array<std::pair<T, T>, 4> ground_corners_t(const Pose<T>& p) {
  const T c = cos(p.th), s = sin(p.th);
  const T hx = p.sx * T(0.5), hz = p.sz * T(0.5);
  std::array<std::pair<T, T>, 4> out;
  const double sx[4] = {-1, 1, 1, -1};
  const double sz[4] = {-1, -1, 1, 1};
  for (int k = 0; k < 4; ++k) {
    const T lx = hx * T(sx[k]), lz = hz * T(sz[k]);
    out[k] = {p.cx + c * lx + s * lz, p.cz - s * lx + c * lz};
  }
  return out;
}

template <typename T>
T containment_t(std::span<const Vec2> floor, const Pose<T>& p) {
  T sum(0.0);
  for (const auto& [x, z] : ground_corners_t(p)) {
    const Vec2 q(value(x), value(z));
    if (point_in_polygon(floor, q)) continue;
    const Vec2 b = closest_boundary_point(floor, q);
    const T dx = x - T(b.x()), dz = z - T(b.y());
    sum += dx * dx + dz * dz;
  }
  return sum;
}

template <typename T>
std::vector<P3<T>> pose_points(const std::vector<Vec3>& unit, const Pose<T>& p) {
  const T c = cos(p.th), s = sin(p.th);
  std::vector<P3<T>> out;
  out.reserve(unit.size());
  for (const auto& u : unit) {
    const T lx = p.sx * T(u.x()), ly = p.sy * T(u.y()), lz = p.sz * T(u.z());
    out.push_back({p.cx + c * lx + s * lz, p.cy + ly, p.cz - s * lx + c * lz});
  }
  return out;
}

template <typename T>
std::vector<P3<T>> rotate_points(const std::vector<P3<T>>& pts, const T& px, const T& pz, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  std::vector<P3<T>> out;
  out.reserve(pts.size());
  for (const auto& q : pts) {
    const T dx = q.x - px, dz = q.z - pz;
    out.push_back({px + T(c) * dx + T(s) * dz, q.y, pz - T(s) * dx + T(c) * dz});
  }
  return out;
}

std::vector<Vec3> shared_unit_samples(std::span<const PlacementParams> members, int samples) {
  Vec3 mean = Vec3::Zero();
  for (const auto& m : members) mean += m.scale;
  mean /= static_cast<double>(members.size());
  return unit_surface_samples(mean, samples, kSurfaceSampleSeed);
}

template <typename T>
T hyper_rotation_t(const std::vector<Pose<T>>& poses, const std::vector<Vec3>& unit) {
  const std::size_t n = poses.size();
  T px(0.0), pz(0.0);
  for (const auto& p : poses) {
    px += p.cx;
    pz += p.cz;
  }
  px = px / T(static_cast<double>(n));
  pz = pz / T(static_cast<double>(n));
  const double angle = 2.0 * kPi / static_cast<double>(n);
  std::vector<std::vector<P3<T>>> pts(n), rot(n);
  std::vector<std::vector<Vec3>> vpts(n), vrot(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts[i] = pose_points(unit, poses[i]);
    rot[i] = rotate_points(pts[i], px, pz, angle);
    vpts[i] = values_of(pts[i]);
    vrot[i] = values_of(rot[i]);
  }
  // One tree per point set; the nearest indices of the winning pair are
  // reused for the differentiable pass.
  std::vector<KdTree<double>> pts_tree, rot_tree;
  for (std::size_t i = 0; i < n; ++i) {
    pts_tree.emplace_back(vpts[i]);
    rot_tree.emplace_back(vrot[i]);
  }
  auto directed_hits = [](const std::vector<Vec3>& from, const KdTree<double>& to, std::vector<std::size_t>& idx) {
    idx.resize(from.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < from.size(); ++k) {
      const auto hit = to.nearest(from[k]);
      idx[k] = hit.index;
      sum += hit.sq_dist;
    }
    return sum / static_cast<double>(from.size());
  };
  // Every nearest distance is at least the gap between bounding boxes, so
  // 2 * gap^2 bounds the Chamfer distance from below. Candidates are visited
  // by increasing bound and skipped once the bound cannot win.
  auto bbox = [](const std::vector<Vec3>& v) {
    Eigen::AlignedBox3d b;
    for (const auto& p : v) b.extend(p);
    return b;
  };
  std::vector<Eigen::AlignedBox3d> pts_box, rot_box;
  for (std::size_t i = 0; i < n; ++i) {
    pts_box.push_back(bbox(vpts[i]));
    rot_box.push_back(bbox(vrot[i]));
  }
  T sum(0.0);
  std::vector<std::size_t> ab, ba, best_ab, best_ba;
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < n; ++i) {
    cand.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) cand.emplace_back(2.0 * pts_box[i].squaredExteriorDistance(rot_box[j]), j);
    }
    std::sort(cand.begin(), cand.end());
    std::size_t best_j = i;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& [bound, j] : cand) {
      if (bound > best) break;
      const double cd = directed_hits(vpts[i], rot_tree[j], ab) + directed_hits(vrot[j], pts_tree[i], ba);
      if (cd < best || (cd == best && j < best_j)) {
        best = cd;
        best_j = j;
        std::swap(ab, best_ab);
        std::swap(ba, best_ba);
      }
    }
    sum += directed(pts[i], rot[best_j], best_ab) + directed(rot[best_j], pts[i], best_ba);
  }
  return sum;
}

template <typename T>
T hub_t(const std::vector<Pose<T>>& poses, const Pose<T>& hub) {
  T px(0.0), pz(0.0);
  for (const auto& p : poses) {
    px += p.cx;
    pz += p.cz;
  }
  const T inv(1.0 / static_cast<double>(poses.size()));
  const T dx = hub.cx - px * inv, dz = hub.cz - pz * inv;
  return dx * dx + dz * dz;
}

template <typename T>
std::pair<T, T> hyper_parallel_t(const std::vector<Pose<T>>& poses) {
  const std::size_t n = poses.size();
  T normals(0.0);
  std::vector<std::vector<P3<T>>> ns;
  for (const auto& p : poses) ns.push_back(rotated_normals(p.th));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) normals += chamfer_t(ns[i], ns[j]);
  }

  // Order and sign choices follow parallel_direction on the current values.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ax = value(poses[a].cx), bx = value(poses[b].cx);
    if (ax != bx) return ax < bx;
    return value(poses[a].cz) < value(poses[b].cz);
  });
  const double rx = value(poses[order.back()].cx) - value(poses[order.front()].cx);
  const double rz = value(poses[order.back()].cz) - value(poses[order.front()].cz);
  T vx(0.0), vz(0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto& pi = poses[order[a]];
      const auto& pj = poses[order[b]];
      T dx = pj.cx - pi.cx, dz = pj.cz - pi.cz;
      if (value(dx) * rx + value(dz) * rz < 0.0) {
        dx = -dx;
        dz = -dz;
      }
      vx += dx;
      vz += dz;
    }
  }
  const double vn = std::hypot(value(vx), value(vz));
  T line(0.0);
  if (vn > 0.0) {
    const T len = sqrt(vx * vx + vz * vz);
    vx = vx / len;
    vz = vz / len;
    T px(0.0), pz(0.0);
    for (const auto& p : poses) {
      px += p.cx;
      pz += p.cz;
    }
    const T inv(1.0 / static_cast<double>(n));
    px = px * inv;
    pz = pz * inv;
    for (const auto& p : poses) {
      const T dx = p.cx - px, dz = p.cz - pz;
      const T perp = dx * vz - dz * vx;
      line += perp * perp;
    }
  }
  return {normals, line};
}

template <typename T>
T extent_sq(const Pose<T>& a, const Pose<T>& b) {
  const T dx = a.sx - b.sx, dy = a.sy - b.sy, dz = a.sz - b.sz;
  return dx * dx + dy * dy + dz * dz;
}

template <typename T>
T binary_t(BinaryEdgeType type, const Pose<T>& a, const Pose<T>& b) {
  switch (type) {
    case BinaryEdgeType::Adjacency:
      return T(0.0);
    case BinaryEdgeType::Translational: {
      const T d = wrap_t(b.th - a.th);
      return extent_sq(a, b) + d * d;
    }
    case BinaryEdgeType::Reflective: {
      const T dy = b.cy - a.cy;
      T r = extent_sq(a, b) + dy * dy;
      const T dx = b.cx - a.cx, dz = b.cz - a.cz;
      if (value(dx) != 0.0 || value(dz) != 0.0) {
        const T psi = atan2(dz, dx);
        const T mirrored = -a.th - T(2.0) * psi - T(kPi);
        const T m = wrap_half_pi(b.th - mirrored);
        r += m * m;
      }
      return r;
    }
    case BinaryEdgeType::Rotational: {
      const T dy = b.cy - a.cy;
      return extent_sq(a, b) + dy * dy;
    }
  }
  return T(0.0);
}

}  // namespace

void EnergyWeights::check() const {
  for (double w : {w_locate, w_ro, w_inside, w_hrot, w_hpara, w_binary}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("energy weights must be finite and non-negative");
  }
}

EnergyWeights load_weights(const std::string& path) {
  const Json j = parse_json(read_text_file(path), path);
  EnergyWeights w;
  const std::pair<const char*, double*> keys[] = {{"w_locate", &w.w_locate}, {"w_ro", &w.w_ro},
                                                  {"w_inside", &w.w_inside}, {"w_hrot", &w.w_hrot},
                                                  {"w_hpara", &w.w_hpara},   {"w_binary", &w.w_binary}};
  for (const auto& [key, dst] : keys) {
    if (!j.contains(key)) continue;
    if (!j[key].is_number()) throw ParseError(path + ":/" + key, "expected a number");
    *dst = j[key].get<double>();
  }
  w.check();
  return w;
}

AngleClass nearest_angle_class(double yaw) {
  AngleClass best;
  double best_abs = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 8; ++k) {
    const double r = wrap_angle(yaw - kAngleTable[k]);
    if (std::abs(r) < best_abs) {
      best_abs = std::abs(r);
      best = {k, r};
    }
  }
  return best;
}

double placement_loss(const PlacementParams& pred, const OrientationPrediction& orient, const PlacementParams& gt) {
  if (!(std::abs(orient.b) <= kMaxAngleOffset)) throw DomainError("orientation offset outside [-22.5, 22.5] degrees");
  const int k = static_cast<int>(std::max_element(orient.rho.begin(), orient.rho.end()) - orient.rho.begin());
  const double d_orient = wrap_angle(kAngleTable[k] + orient.b - gt.orientation);
  return (pred.center - gt.center).squaredNorm() + (pred.scale - gt.scale).squaredNorm() + d_orient * d_orient;
}

double room_object_loss(double yaw) { return room_object_t<double>(yaw); }

double room_object_loss(const SceneHierarchy& scene) {
  double sum = 0.0;
  for (const auto& v : scene.edges.vertical) {
    if (!v.align) continue;
    if (const auto* o = scene.find_object(v.object)) sum += room_object_loss(o->placement.orientation);
  }
  return sum;
}

double containment_penalty(std::span<const Vec2> floor, const PlacementParams& p) {
  return containment_t(floor, constant_pose<double>(p));
}

double containment_penalty(const SceneHierarchy& scene) {
  double sum = 0.0;
  for (const auto& o : scene.objects) sum += containment_penalty(scene.floor, o.placement);
  return sum;
}

double hyper_rotation_loss(std::span<const PlacementParams> members, int samples) {
  if (members.size() < 3) throw DomainError("rotational hyper-edge needs at least 3 members");
  std::vector<Pose<double>> poses;
  for (const auto& m : members) poses.push_back(constant_pose<double>(m));
  return hyper_rotation_t(poses, shared_unit_samples(members, samples));
}

double hyper_hub_loss(std::span<const PlacementParams> members, const PlacementParams& hub) {
  std::vector<Pose<double>> poses;
  for (const auto& m : members) poses.push_back(constant_pose<double>(m));
  return hub_t(poses, constant_pose<double>(hub));
}

ParallelLoss hyper_parallel_loss(std::span<const PlacementParams> members) {
  std::vector<Pose<double>> poses;
  for (const auto& m : members) poses.push_back(constant_pose<double>(m));
  const auto [normals, line] = hyper_parallel_t(poses);
  return {normals, line};
}

double binary_symmetry_residual(BinaryEdgeType type, const PlacementParams& a, const PlacementParams& b) {
  return binary_t(type, constant_pose<double>(a), constant_pose<double>(b));
}

double binary_symmetry_residual(const BinaryEdge& edge, const SceneHierarchy& scene) {
  const auto* a = scene.find_object(edge.a);
  const auto* b = scene.find_object(edge.b);
  if (!a || !b) throw DomainError("binary edge endpoint missing");
  return binary_symmetry_residual(edge.type, a->placement, b->placement);
}

const std::vector<std::string>& energy_term_names() {
  static const std::vector<std::string> names = {"locate",         "room_object", "containment",
                                                 "hyper_rotation", "hyper_hub",   "hyper_parallel",
                                                 "binary"};
  return names;
}

EnergyReport total_energy(const SceneHierarchy& scene, const EnergyOptions& options) {
  options.weights.check();
  const auto& w = options.weights;
  ad::Tape tape;
  const std::size_t n = scene.objects.size();
  std::vector<Pose<Var>> poses(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = scene.objects[i].placement;
    auto var = [&](double x) { return options.compute_gradient ? tape.variable(x) : Var(x); };
    poses[i] = {var(p.center.x()), var(p.center.y()), var(p.center.z()), var(p.scale.x()),
                var(p.scale.y()),  var(p.scale.z()),  var(p.orientation)};
  }
  auto pose_of = [&](const std::string& id) -> const Pose<Var>* {
    const int i = scene.object_index(id);
    return i < 0 ? nullptr : &poses[static_cast<std::size_t>(i)];
  };

  std::map<std::string, Var> terms;
  for (const auto& name : energy_term_names()) terms[name] = Var(0.0);

  if (options.reference) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto* ref = options.reference->find_object(scene.objects[i].id);
      if (!ref) continue;
      const auto r = constant_pose<Var>(ref->placement);
      const auto& p = poses[i];
      const Var dth = wrap_t(p.th - r.th);
      const Var d[6] = {p.cx - r.cx, p.cy - r.cy, p.cz - r.cz, p.sx - r.sx, p.sy - r.sy, p.sz - r.sz};
      Var s = dth * dth;
      for (const auto& x : d) s += x * x;
      terms["locate"] += s;
    }
  }
  for (const auto& v : scene.edges.vertical) {
    if (!v.align) continue;
    if (const auto* p = pose_of(v.object)) terms["room_object"] += room_object_t(p->th);
  }
  if (scene.floor.size() >= 3) {
    for (const auto& p : poses) terms["containment"] += containment_t(scene.floor, p);
  }
  for (const auto& h : scene.edges.hyper) {
    std::vector<Pose<Var>> members;
    std::vector<PlacementParams> placements;
    for (const auto& id : h.members) {
      if (const auto* p = pose_of(id)) {
        members.push_back(*p);
        placements.push_back(scene.find_object(id)->placement);
      }
    }
    if (members.size() < 3) continue;
    if (h.type == HyperEdgeType::NFoldRotation) {
      terms["hyper_rotation"] += hyper_rotation_t(members, shared_unit_samples(placements, options.samples));
      if (h.hub) {
        if (const auto* hub = pose_of(*h.hub)) terms["hyper_hub"] += hub_t(members, *hub);
      }
    } else {
      const auto [normals, line] = hyper_parallel_t(members);
      terms["hyper_parallel"] += normals + line;
    }
  }
  for (const auto& e : scene.edges.binary) {
    const auto* a = pose_of(e.a);
    const auto* b = pose_of(e.b);
    if (a && b) terms["binary"] += binary_t(e.type, *a, *b);
  }

  const std::map<std::string, double> weight = {
      {"locate", w.w_locate},         {"room_object", w.w_ro}, {"containment", w.w_inside},
      {"hyper_rotation", w.w_hrot},   {"hyper_hub", w.w_hrot}, {"hyper_parallel", w.w_hpara},
      {"binary", w.w_binary}};
  Var total(0.0);
  EnergyReport report;
  for (const auto& name : energy_term_names()) {
    report.terms[name] = terms[name].v;
    total += Var(weight.at(name)) * terms[name];
  }
  report.total = total.v;

  if (options.compute_gradient) {
    const auto adj = tape.backward(total);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = poses[i];
      const Var* vars[7] = {&p.cx, &p.cy, &p.cz, &p.sx, &p.sy, &p.sz, &p.th};
      Gradient7 g;
      for (int k = 0; k < 7; ++k) g[k] = vars[k]->id >= 0 ? adj[vars[k]->id] : 0.0;
      report.gradient[scene.objects[i].id] = g;
    }
  }
  return report;
}

}  // namespace scenehgn
