#include "scenehgn/render.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "scenehgn/serialize.hpp"

namespace scenehgn {

namespace {

constexpr std::array<const char*, 12> kPalette = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                                                  "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v * kPixelsPerMeter);
  // Avoid "-0.00".
  if (std::string(buf) == "-0.00") return "0.00";
  return buf;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  if (pts.size() < 3) return pts;
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vec2> h(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0.0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0.0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace

std::string render_svg(const SceneHierarchy& scene, const SceneConfig& vocab) {
  std::vector<Vec2> extent = scene.floor;
  for (const auto& o : scene.objects) {
    for (const auto& c : ground_corners(o.placement)) extent.push_back(c);
  }
  Vec2 lo(0.0, 0.0), hi(1.0, 1.0);
  if (!extent.empty()) {
    lo = hi = extent.front();
    for (const auto& p : extent) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  }
  constexpr double kMargin = 0.5;
  lo.array() -= kMargin;
  hi.array() += kMargin;

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" + num(lo.x()) + " " + num(lo.y()) + " " +
                    num(hi.x() - lo.x()) + " " + num(hi.y() - lo.y()) + "\" width=\"" + num(hi.x() - lo.x()) +
                    "\" height=\"" + num(hi.y() - lo.y()) + "\">\n";
  if (!scene.floor.empty()) {
    out += "<path class=\"floor\" d=\"";
    for (std::size_t i = 0; i < scene.floor.size(); ++i) {
      out += (i == 0 ? "M" : " L") + num(scene.floor[i].x()) + " " + num(scene.floor[i].y());
    }
    out += " Z\" fill=\"#f4f1ea\" stroke=\"#333333\" stroke-width=\"3\"/>\n";
  }
  for (const auto& r : scene.regions) {
    std::vector<Vec2> pts;
    for (const auto& id : r.children) {
      if (const auto* o = scene.find_object(id)) {
        for (const auto& c : ground_corners(o->placement)) pts.push_back(c);
      }
    }
    const auto hull = convex_hull(pts);
    if (hull.size() < 3) continue;
    out += "<polygon class=\"region\" data-id=\"" + r.id + "\" points=\"";
    for (std::size_t i = 0; i < hull.size(); ++i) out += (i ? " " : "") + num(hull[i].x()) + "," + num(hull[i].y());
    out += "\" fill=\"none\" stroke=\"#777777\" stroke-width=\"2\" stroke-dasharray=\"8 6\"/>\n";
  }
  for (const auto& o : scene.objects) {
    const int c = std::max(vocab.category_index(o.category), 0);
    const auto& p = o.placement;
    char deg[32];
    // Ground (x, z) maps to SVG (x, y), so the yaw becomes rotate(-yaw).
    std::snprintf(deg, sizeof deg, "%.3f", -p.orientation * 180.0 / std::numbers::pi + 0.0);
    std::string d = deg;
    if (d == "-0.000") d = "0.000";
    out += "<g class=\"object\" data-id=\"" + o.id + "\" data-category=\"" + o.category + "\" transform=\"translate(" +
           num(p.center.x()) + " " + num(p.center.z()) + ") rotate(" + d + ")\"><rect x=\"" + num(-0.5 * p.scale.x()) +
           "\" y=\"" + num(-0.5 * p.scale.z()) + "\" width=\"" + num(p.scale.x()) + "\" height=\"" + num(p.scale.z()) +
           "\" fill=\"" + kPalette[static_cast<std::size_t>(c) % kPalette.size()] +
           "\" stroke=\"#222222\" stroke-width=\"1\"/><line x1=\"0.00\" y1=\"0.00\" x2=\"" + num(0.5 * p.scale.x()) +
           "\" y2=\"0.00\" stroke=\"#222222\" stroke-width=\"1\"/></g>\n";
  }
  for (const auto& h : scene.edges.hyper) {
    Vec2 center = Vec2::Zero();
    int n = 0;
    for (const auto& id : h.members) {
      if (const auto* o = scene.find_object(id)) {
        center += ground(o->placement.center);
        ++n;
      }
    }
    if (n == 0) continue;
    center /= n;
    for (const auto& id : h.members) {
      const auto* o = scene.find_object(id);
      if (!o) continue;
      out += "<line class=\"hyper\" x1=\"" + num(center.x()) + "\" y1=\"" + num(center.y()) + "\" x2=\"" +
             num(o->placement.center.x()) + "\" y2=\"" + num(o->placement.center.z()) + "\" stroke=\"" +
             (h.type == HyperEdgeType::NFoldRotation ? "#c0392b" : "#2471a3") + "\" stroke-width=\"2\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

void write_svg(const std::string& path, const SceneHierarchy& scene, const SceneConfig& vocab) {
  write_text_file(path, render_svg(scene, vocab));
}

}  // namespace scenehgn
