#include "scenehgn/synth.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "scenehgn/detect.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/rng.hpp"
#include "scenehgn/serialize.hpp"

namespace scenehgn {

namespace {

constexpr double kPi = std::numbers::pi;

struct Dims {
  const char* category;
  Vec3 scale;
};

constexpr double kChairRing = 1.25;  // chair center distance from the table
constexpr double kGap = 0.2;         // clearance between non-touching boxes

const Dims kTable{"dining_table", {1.2, 0.75, 1.2}};
const Dims kChair{"dining_chair", {0.45, 0.9, 0.5}};
const Dims kBed{"bed", {1.6, 0.5, 2.0}};
const Dims kNightstand{"nightstand", {0.45, 0.55, 0.4}};
const Dims kWardrobe{"wardrobe", {1.0, 2.0, 0.6}};
const Dims kCoffeeTable{"coffee_table", {1.0, 0.45, 0.6}};
const Dims kArmchair{"armchair", {0.8, 0.8, 0.8}};
const Dims kDesk{"desk", {1.4, 0.75, 0.7}};
const Dims kOfficeChair{"office_chair", {0.6, 1.0, 0.6}};
const Dims kBookshelf{"bookshelf", {1.0, 1.8, 0.4}};

struct LocalBox {
  const Dims* dims;
  Vec2 at;  // ground position relative to the pattern origin
  double yaw = 0.0;
  bool align = true;
};

struct LocalHyper {
  HyperEdgeType type;
  std::vector<int> members;
  int hub = -1;
  int fold = 0;
};

struct LocalPattern {
  std::vector<LocalBox> boxes;
  std::vector<std::tuple<BinaryEdgeType, int, int>> binary;
  std::vector<LocalHyper> hyper;
};

/// Boxes side by side along local x, touching, yaw 0. Equal boxes are
/// translational and reflective copies; neighbors are adjacent.
LocalPattern chain(const std::vector<const Dims*>& row) {
  LocalPattern p;
  double width = 0.0;
  for (const auto* d : row) width += d->scale.x();
  double x = -0.5 * width;
  for (const auto* d : row) {
    p.boxes.push_back({d, Vec2(x + 0.5 * d->scale.x(), 0.0), 0.0, true});
    x += d->scale.x();
  }
  const int n = static_cast<int>(row.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (j == i + 1) p.binary.emplace_back(BinaryEdgeType::Adjacency, i, j);
      if (row[i] == row[j]) {
        p.binary.emplace_back(BinaryEdgeType::Translational, i, j);
        p.binary.emplace_back(BinaryEdgeType::Reflective, i, j);
      }
    }
  }
  if (n >= 3) {
    LocalHyper h{HyperEdgeType::ParallelCollinear, {}, -1, 0};
    for (int i = 0; i < n; ++i) h.members.push_back(i);
    p.hyper.push_back(h);
  }
  return p;
}

LocalPattern build(const RegionSpec& spec) {
  LocalPattern p;
  switch (spec.pattern) {
    case Pattern::NFold: {
      p.boxes.push_back({&kTable, Vec2::Zero(), 0.0, true});
      LocalHyper h{HyperEdgeType::NFoldRotation, {}, 0, spec.count};
      for (int i = 0; i < spec.count; ++i) {
        const double phi = 2.0 * kPi * i / spec.count;
        // Chair on the ring, local +x pointing at the table.
        p.boxes.push_back({&kChair, kChairRing * yaw_direction(phi), wrap_angle(phi + kPi), (4 * i) % spec.count == 0});
        h.members.push_back(i + 1);
      }
      for (int i = 1; i <= spec.count; ++i) {
        for (int j = i + 1; j <= spec.count; ++j) {
          p.binary.emplace_back(BinaryEdgeType::Reflective, i, j);
          p.binary.emplace_back(BinaryEdgeType::Rotational, i, j);
        }
      }
      p.hyper.push_back(h);
      break;
    }
    case Pattern::Collinear: {
      const int left = spec.count / 2, right = spec.count - 1 - left;
      std::vector<const Dims*> row(static_cast<std::size_t>(left), &kNightstand);
      row.push_back(&kBed);
      row.insert(row.end(), static_cast<std::size_t>(right), &kNightstand);
      p = chain(row);
      break;
    }
    case Pattern::WardrobeRow:
      p = chain(std::vector<const Dims*>(static_cast<std::size_t>(spec.count), &kWardrobe));
      break;
    case Pattern::Pair: {
      const double off = 0.5 * kCoffeeTable.scale.x() + kGap + 0.5 * kArmchair.scale.x();
      p.boxes.push_back({&kCoffeeTable, Vec2::Zero(), 0.0, true});
      p.boxes.push_back({&kArmchair, Vec2(-off, 0.0), 0.0, true});
      p.boxes.push_back({&kArmchair, Vec2(off, 0.0), kPi, true});
      p.binary.emplace_back(BinaryEdgeType::Reflective, 1, 2);
      p.binary.emplace_back(BinaryEdgeType::Rotational, 1, 2);
      break;
    }
    case Pattern::Office: {
      const double off = 0.5 * kDesk.scale.z() + kGap + 0.5 * kOfficeChair.scale.z();
      p.boxes.push_back({&kDesk, Vec2::Zero(), 0.0, true});
      p.boxes.push_back({&kOfficeChair, Vec2(0.0, off), kPi / 2, true});
      break;
    }
    case Pattern::Single:
      p.boxes.push_back({&kBookshelf, Vec2::Zero(), 0.0, true});
      break;
  }
  return p;
}

double footprint_radius(const LocalPattern& p) {
  double r = 0.0;
  for (const auto& b : p.boxes) {
    r = std::max(r, b.at.norm() + 0.5 * std::hypot(b.dims->scale.x(), b.dims->scale.z()));
  }
  return r;
}

/// Exact rotation by quarter turns (no rounding from cos/sin of pi/2).
Vec2 quarter_turn(const Vec2& v, int k) {
  switch (k & 3) {
    case 1: return {v.y(), -v.x()};
    case 2: return {-v.x(), -v.y()};
    case 3: return {-v.y(), v.x()};
    default: return v;
  }
}

std::vector<double> stub_feature(int category, int dim) {
  std::vector<double> f(static_cast<std::size_t>(dim));
  for (int k = 0; k < dim; ++k) f[static_cast<std::size_t>(k)] = std::cos(0.7 * (category + 1) * (k + 1));
  return f;
}

std::vector<Vec2> make_floor(FloorShape shape, double x0, double x1, double z0, double z1, Rng& rng) {
  std::vector<Vec2> f;
  switch (shape) {
    case FloorShape::Rectangle:
      f = {{x0, z0}, {x0, z1}, {x1, z1}, {x1, z0}};
      break;
    case FloorShape::LShape: {
      const double w = std::round(0.5 * (x1 - x0) * 10.0) / 10.0;
      const double h = 1.5 + 0.5 * static_cast<double>(rng.below(3));
      f = {{x0, z0}, {x0, z1}, {x1 - w, z1}, {x1 - w, z1 + h}, {x1, z1 + h}, {x1, z0}};
      break;
    }
    case FloorShape::Rectilinear: {
      const int m = 3 + static_cast<int>(rng.below(3));
      std::vector<int> rank(static_cast<std::size_t>(m));
      for (int i = 0; i < m; ++i) rank[static_cast<std::size_t>(i)] = i;
      for (int i = m - 1; i > 0; --i) std::swap(rank[static_cast<std::size_t>(i)], rank[rng.below(i + 1)]);
      f = {{x0, z0}};
      for (int i = 0; i < m; ++i) {
        const double top = z1 + 0.25 * (rank[static_cast<std::size_t>(i)] + 1);
        const double a = x0 + (x1 - x0) * i / m, b = (i + 1 == m) ? x1 : x0 + (x1 - x0) * (i + 1) / m;
        f.emplace_back(a, top);
        f.emplace_back(b, top);
      }
      f.emplace_back(x1, z0);
      break;
    }
  }
  if (signed_area(f) < 0.0) std::reverse(f.begin(), f.end());
  return f;
}

std::string object_id(int n) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "obj_%03d", n);
  return buf;
}

}  // namespace

std::string_view to_string(Pattern p) {
  switch (p) {
    case Pattern::NFold: return "nfold";
    case Pattern::Collinear: return "collinear";
    case Pattern::WardrobeRow: return "wardrobe_row";
    case Pattern::Pair: return "pair";
    case Pattern::Office: return "office";
    case Pattern::Single: return "single";
  }
  return "?";
}

std::string_view to_string(FloorShape f) {
  switch (f) {
    case FloorShape::Rectangle: return "rectangle";
    case FloorShape::LShape: return "l_shape";
    case FloorShape::Rectilinear: return "rectilinear";
  }
  return "?";
}

void SceneTemplate::check() const {
  if (regions.empty() || static_cast<int>(regions.size()) > kMaxChildren) {
    throw GenerationError("template needs 1 to 10 regions");
  }
  if (!(sigma_pos >= 0.0) || !(sigma_yaw >= 0.0)) throw GenerationError("noise levels must be >= 0");
  for (const auto& r : regions) {
    const int n = r.count;
    const bool ok = (r.pattern == Pattern::NFold && n >= 3 && n <= 8) ||
                    (r.pattern == Pattern::Collinear && n >= 3 && n <= kMaxChildren) ||
                    (r.pattern == Pattern::WardrobeRow && n >= 2 && n <= kMaxChildren) ||
                    r.pattern == Pattern::Pair || r.pattern == Pattern::Office || r.pattern == Pattern::Single;
    if (!ok) {
      throw GenerationError("pattern " + std::string(to_string(r.pattern)) + " cannot hold " + std::to_string(n) +
                            " objects");
    }
  }
}

GeneratedScene gen_scene(const SceneTemplate& t, std::uint64_t seed) {
  t.check();
  Rng rng(seed);
  const SceneConfig& cfg = default_config();
  SceneHierarchy s;
  s.room_id = "synth";
  s.room_type = t.room_type;

  constexpr double kRegionGap = 1.2;
  constexpr double kMargin = 0.4;
  double cursor = 0.0, zmin = 0.0, zmax = 0.0;
  int next_id = 0;
  for (std::size_t k = 0; k < t.regions.size(); ++k) {
    const LocalPattern p = build(t.regions[k]);
    const double r = footprint_radius(p);
    const int turns = static_cast<int>(rng.below(4));
    const Vec2 origin(cursor + r, std::round(rng.uniform(-3.0, 3.0)) / 10.0);
    cursor += 2.0 * r + kRegionGap;
    zmin = std::min(zmin, origin.y() - r);
    zmax = std::max(zmax, origin.y() + r);

    RegionNode region;
    region.id = "region_" + std::to_string(k);
    std::vector<std::string> ids;
    double largest = -1.0;
    for (const auto& b : p.boxes) {
      ObjectNode o;
      o.id = object_id(next_id++);
      o.category = b.dims->category;
      const Vec2 g = origin + quarter_turn(b.at, turns);
      o.placement.center = Vec3(g.x(), 0.5 * b.dims->scale.y(), g.y());
      o.placement.scale = b.dims->scale;
      o.placement.orientation = wrap_angle(b.yaw + turns * (kPi / 2));
      o.feature = stub_feature(cfg.category_index(o.category), cfg.feature_dim);
      const double area = b.dims->scale.x() * b.dims->scale.z();
      if (area > largest) {
        largest = area;
        region.region_type = cfg.region_for(o.category);
      }
      s.edges.vertical.push_back({o.id, b.align, true});
      region.children.push_back(o.id);
      ids.push_back(o.id);
      s.objects.push_back(std::move(o));
    }
    for (const auto& [type, i, j] : p.binary) {
      s.edges.binary.push_back({type, ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(j)]});
    }
    for (const auto& lh : p.hyper) {
      HyperEdge h;
      h.type = lh.type;
      for (int i : lh.members) h.members.push_back(ids[static_cast<std::size_t>(i)]);
      if (lh.type == HyperEdgeType::NFoldRotation) {
        h.fold = lh.fold;
        h.center = origin;
        if (lh.hub >= 0) h.hub = ids[static_cast<std::size_t>(lh.hub)];
      } else {
        // Chains run along local x; after whole quarter turns the line is
        // axis aligned, pointing toward increasing (x, z).
        h.direction = (turns % 2 == 0) ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
      }
      s.edges.hyper.push_back(std::move(h));
    }
    s.regions.push_back(std::move(region));
  }
  const double x0 = -kMargin, x1 = cursor - kRegionGap + kMargin;
  s.floor = make_floor(t.floor, std::floor(x0 * 10.0) / 10.0, std::ceil(x1 * 10.0) / 10.0,
                       std::floor((zmin - kMargin) * 10.0) / 10.0, std::ceil((zmax + kMargin) * 10.0) / 10.0, rng);
  canonicalize_edges(s.edges, s);

  const auto issues = validate(s, cfg);
  if (!issues.empty()) throw GenerationError("generated scene is invalid: " + issues.front().message);

  GeneratedScene out;
  out.annotations = s.edges;
  if (t.sigma_pos > 0.0 || t.sigma_yaw > 0.0) s = perturb(s, t.sigma_pos, t.sigma_yaw, mix_seed(seed, 0x5EED));
  out.scene = std::move(s);
  return out;
}

SceneTemplate random_template(std::uint64_t seed) {
  Rng rng(seed);
  SceneTemplate t;
  t.floor = static_cast<FloorShape>(rng.below(3));
  const int n = 1 + static_cast<int>(rng.below(4));
  for (int i = 0; i < n; ++i) {
    RegionSpec r;
    r.pattern = static_cast<Pattern>(rng.below(6));
    switch (r.pattern) {
      case Pattern::NFold: r.count = 3 + static_cast<int>(rng.below(4)); break;
      case Pattern::Collinear: r.count = 3 + static_cast<int>(rng.below(3)); break;
      case Pattern::WardrobeRow: r.count = 2 + static_cast<int>(rng.below(3)); break;
      default: break;
    }
    t.regions.push_back(r);
  }
  switch (t.regions.front().pattern) {
    case Pattern::NFold: t.room_type = "dining_room"; break;
    case Pattern::Collinear:
    case Pattern::WardrobeRow: t.room_type = "bedroom"; break;
    case Pattern::Office: t.room_type = "study"; break;
    default: t.room_type = "living_room"; break;
  }
  return t;
}

SceneHierarchy perturb(const SceneHierarchy& scene, double sigma_pos, double sigma_yaw, std::uint64_t seed) {
  if (!(sigma_pos >= 0.0) || !(sigma_yaw >= 0.0)) throw DomainError("noise levels must be >= 0");
  SceneHierarchy s = scene;
  Rng rng(seed);
  for (auto& o : s.objects) {
    const double dx = rng.normal(), dz = rng.normal(), dyaw = rng.normal();
    o.placement.center.x() += sigma_pos * dx;
    o.placement.center.z() += sigma_pos * dz;
    o.placement.orientation = wrap_angle(o.placement.orientation + sigma_yaw * dyaw);
  }
  return s;
}

std::vector<GeneratedScene> gen_corpus(int count, std::uint64_t seed) {
  std::vector<GeneratedScene> out;
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = mix_seed(seed, static_cast<std::uint64_t>(i));
    GeneratedScene g = gen_scene(random_template(s), s);
    char buf[32];
    std::snprintf(buf, sizeof buf, "scene_%04d", i);
    g.scene.room_id = buf;
    out.push_back(std::move(g));
  }
  return out;
}

void write_corpus(const std::string& dir, const std::vector<GeneratedScene>& corpus) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  Json gt = Json::array();
  for (const auto& g : corpus) {
    const std::string file = g.scene.room_id + ".json";
    save_scene((std::filesystem::path(dir) / file).string(), g.scene);
    SceneHierarchy annotated = g.scene;
    annotated.edges = g.annotations;
    const Json j = scene_to_json(annotated);
    gt.push_back({{"file", file}, {"regions", j["regions"]}, {"edges", j["edges"]}});
  }
  write_text_file((std::filesystem::path(dir) / "ground_truth.json").string(), dump_json(gt));
}

}  // namespace scenehgn
