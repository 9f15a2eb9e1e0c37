#include "scenehgn/layout_opt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "scenehgn/errors.hpp"
#include "scenehgn/serialize.hpp"

namespace scenehgn {

namespace {

using Params = Eigen::VectorXd;

Params pack(const SceneHierarchy& s) {
  Params x(7 * static_cast<Eigen::Index>(s.objects.size()));
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const auto& p = s.objects[i].placement;
    x.segment<3>(7 * i) = p.center;
    x.segment<3>(7 * i + 3) = p.scale;
    x[7 * i + 6] = p.orientation;
  }
  return x;
}

void unpack(const Params& x, SceneHierarchy& s) {
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    auto& p = s.objects[i].placement;
    p.center = x.segment<3>(7 * i);
    p.scale = x.segment<3>(7 * i + 3);
    p.orientation = x[7 * i + 6];
  }
}

Params gradient_vector(const EnergyReport& r, const SceneHierarchy& s) {
  Params g(7 * static_cast<Eigen::Index>(s.objects.size()));
  for (std::size_t i = 0; i < s.objects.size(); ++i) g.segment<7>(7 * i) = r.gradient.at(s.objects[i].id);
  return g;
}

TraceEntry entry(int it, const EnergyReport& r) { return {it, r.terms, r.total}; }

}  // namespace

void EditConstraint::check() const {
  if (!pin_center && !pin_scale && !pin_orientation) throw ConfigError("edit for " + object + " pins nothing");
  try {
    check_placement(target);
  } catch (const InvalidPlacement& e) {
    throw ConfigError("edit for " + object + ": " + e.what());
  }
}

void OptimizerConfig::check() const {
  if (!(step > 0.0) || max_iterations < 1) throw ConfigError("optimizer needs a positive step and iteration cap");
  if (!(tolerance >= 0.0) || !(min_scale > 0.0) || samples < 1) throw ConfigError("invalid optimizer settings");
}

RefineResult refine(const SceneHierarchy& scene, const std::vector<EditConstraint>& constraints,
                    const OptimizerConfig& config, const EnergyWeights& weights) {
  config.check();
  weights.check();
  RefineResult result;
  result.scene = scene;
  SceneHierarchy& s = result.scene;

  const auto n = static_cast<Eigen::Index>(7 * s.objects.size());
  Eigen::VectorXd free = Eigen::VectorXd::Ones(n);
  for (const auto& c : constraints) {
    c.check();
    const int i = s.object_index(c.object);
    if (i < 0) throw ConfigError("edit references unknown object " + c.object);
    auto& p = s.objects[static_cast<std::size_t>(i)].placement;
    if (c.pin_center) {
      p.center = c.target.center;
      free.segment<3>(7 * i).setZero();
    }
    if (c.pin_scale) {
      p.scale = c.target.scale;
      free.segment<3>(7 * i + 3).setZero();
    }
    if (c.pin_orientation) {
      p.orientation = wrap_angle(c.target.orientation);
      free[7 * i + 6] = 0.0;
    }
    if (c.pin_center && !s.floor.empty() && s.floor.size() >= 3) {
      for (const auto& g : ground_corners(p)) {
        if (!point_in_polygon(s.floor, g)) {
          result.warnings.push_back("edit target for " + c.object + " lies outside the floor");
          break;
        }
      }
    }
  }

  EnergyOptions opts;
  opts.weights = weights;
  opts.samples = config.samples;
  Params x = pack(s);
  const Params pinned_values = x;
  EnergyReport cur = total_energy(s, opts);
  if (!std::isfinite(cur.total)) throw OptimizerError(0, "energy is not finite");
  result.trace.push_back(entry(0, cur));

  Params m = Params::Zero(n), v = Params::Zero(n);
  double lr = config.step;
  int t = 0;
  int stall = 0;
  constexpr int kStallSteps = 20;
  // Adam steps are scale-free, so rounding-level residuals would still move
  // an exact layout by a full step; treat them as zero.
  constexpr double kZeroEnergy = 1e-20;
  for (int it = 1; it <= config.max_iterations && cur.total > kZeroEnergy; ++it) {
    const Params g = gradient_vector(cur, s).cwiseProduct(free);
    if (!g.allFinite()) throw OptimizerError(it, "gradient is not finite");
    if (g.squaredNorm() == 0.0) break;
    ++t;
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    double bc1 = 1.0 - std::pow(config.beta1, t), bc2 = 1.0 - std::pow(config.beta2, t);

    bool accepted = false;
    while (!accepted && lr > 1e-12) {
      Params y = x - lr * (m / bc1).cwiseQuotient(((v / bc2).cwiseSqrt().array() + config.epsilon).matrix());
      for (Eigen::Index k = 0; k < n; ++k) {
        if (free[k] == 0.0) y[k] = pinned_values[k];
      }
      for (std::size_t i = 0; i < s.objects.size(); ++i) {
        for (int k = 3; k < 6; ++k) y[7 * i + k] = std::max(y[7 * i + k], config.min_scale);
        y[7 * i + 6] = wrap_angle(y[7 * i + 6]);
      }
      SceneHierarchy trial = s;
      unpack(y, trial);
      EnergyReport next = total_energy(trial, opts);
      if (std::isnan(next.total)) throw OptimizerError(it, "energy is NaN");
      if (next.total <= cur.total) {
        const double drop = cur.total - next.total;
        x = y;
        s = std::move(trial);
        cur = std::move(next);
        result.trace.push_back(entry(it, cur));
        accepted = true;
        // Converged once the energy stalls for a run of accepted steps.
        stall = drop < config.tolerance ? stall + 1 : 0;
        if (stall >= kStallSteps) it = config.max_iterations;
        lr = std::min(config.step, 2.0 * lr);
      } else {
        // Stale moments can point uphill; restart them from the current
        // gradient, whose sign step is a descent direction for small lr.
        lr *= 0.5;
        t = 1;
        m = (1.0 - config.beta1) * g;
        v = (1.0 - config.beta2) * g.cwiseProduct(g);
        bc1 = 1.0 - config.beta1;
        bc2 = 1.0 - config.beta2;
      }
    }
    if (!accepted) break;
  }
  return result;
}

RefineResult edit_propagate(const SceneHierarchy& scene, const std::vector<EditConstraint>& edits,
                            const OptimizerConfig& config, const EnergyWeights& weights) {
  SceneHierarchy s = scene;
  std::set<std::string> moved;
  for (const auto& e : edits) {
    e.check();
    const auto* obj = s.find_object(e.object);
    if (!obj) throw ConfigError("edit references unknown object " + e.object);
    const PlacementParams before = obj->placement;
    const Vec2 pivot = ground(before.center);
    const Vec2 shift = e.pin_center ? Vec2(ground(e.target.center) - pivot) : Vec2::Zero();
    const double turn = e.pin_orientation ? wrap_angle(e.target.orientation - before.orientation) : 0.0;
    for (const auto& h : s.edges.hyper) {
      const bool involved = std::find(h.members.begin(), h.members.end(), e.object) != h.members.end() ||
                            (h.hub && *h.hub == e.object);
      if (!involved) continue;
      std::vector<std::string> carried = h.members;
      if (h.hub) carried.push_back(*h.hub);
      for (const auto& id : carried) {
        if (id == e.object || moved.count(id)) continue;
        auto* o = s.find_object(id);
        PlacementParams p = rotate_about(o->placement, pivot, turn);
        p.center.x() += shift.x();
        p.center.z() += shift.y();
        o->placement = p;
        moved.insert(id);
      }
    }
    auto* o = s.find_object(e.object);
    if (e.pin_center) o->placement.center = e.target.center;
    if (e.pin_scale) o->placement.scale = e.target.scale;
    if (e.pin_orientation) o->placement.orientation = wrap_angle(e.target.orientation);
    moved.insert(e.object);
  }
  return refine(s, edits, config, weights);
}

std::vector<EditConstraint> load_edits(const std::string& path, const SceneHierarchy& scene) {
  const Json j = parse_json(read_text_file(path), path);
  if (!j.is_array()) throw ParseError(path + ":/", "expected an array of edits");
  std::vector<EditConstraint> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + ":/" + std::to_string(i);
    const Json& e = j[i];
    if (!e.is_object() || !e.contains("object") || !e["object"].is_string()) throw ParseError(p, "edit needs an object id");
    EditConstraint c;
    c.object = e["object"].get<std::string>();
    const auto* o = scene.find_object(c.object);
    if (!o) throw ParseError(p + "/object", "unknown object " + c.object);
    c.target = o->placement;
    auto vec3 = [&](const char* key) {
      const Json& a = e[key];
      if (!a.is_array() || a.size() != 3 || !a[0].is_number() || !a[1].is_number() || !a[2].is_number()) {
        throw ParseError(p + "/" + key, "expected 3 numbers");
      }
      return Vec3(a[0].get<double>(), a[1].get<double>(), a[2].get<double>());
    };
    if (e.contains("center")) {
      c.pin_center = true;
      c.target.center = vec3("center");
    }
    if (e.contains("scale")) {
      c.pin_scale = true;
      c.target.scale = vec3("scale");
    }
    if (e.contains("orientation")) {
      if (!e["orientation"].is_number()) throw ParseError(p + "/orientation", "expected a number");
      c.pin_orientation = true;
      c.target.orientation = wrap_angle(e["orientation"].get<double>());
    }
    out.push_back(c);
  }
  return out;
}

std::string trace_csv(const std::vector<TraceEntry>& trace) {
  std::string out = "iteration";
  for (const auto& name : energy_term_names()) out += "," + name;
  out += ",total\n";
  char buf[40];
  for (const auto& e : trace) {
    out += std::to_string(e.iteration);
    for (const auto& name : energy_term_names()) {
      const auto it = e.terms.find(name);
      std::snprintf(buf, sizeof buf, ",%.17g", it == e.terms.end() ? 0.0 : it->second);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", e.total);
    out += buf;
  }
  return out;
}

}  // namespace scenehgn
