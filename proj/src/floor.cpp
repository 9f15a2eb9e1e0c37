#include "scenehgn/floor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>

#include <Eigen/Sparse>

#include "scenehgn/errors.hpp"
#include "scenehgn/rng.hpp"
#include "scenehgn/serialize.hpp"

namespace scenehgn {

namespace {

constexpr char kMagic[8] = {'S', 'H', 'G', 'N', 'F', 'L', 'R', '1'};

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double turning_angle(const Vec2& prev, const Vec2& cur, const Vec2& next) {
  const Vec2 a = cur - prev, b = next - cur;
  return std::abs(std::atan2(cross2(a, b), a.dot(b)));
}

// Largest-remainder split of `total` into parts proportional to `weights`,
// each part at least 1.
std::vector<int> apportion(const std::vector<double>& weights, int total) {
  const std::size_t k = weights.size();
  double sum = 0.0;
  for (double w : weights) sum += w;
  std::vector<int> out(k);
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const double q = total * weights[i] / sum;
    out[i] = static_cast<int>(std::floor(q));
    used += out[i];
    rem.push_back({q - out[i], i});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int r = 0; r < total - used; ++r) ++out[rem[static_cast<std::size_t>(r) % k].second];
  for (std::size_t i = 0; i < k; ++i) {
    while (out[i] < 1) {
      const auto big = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
      --out[big];
      ++out[i];
    }
  }
  return out;
}

// 2x2 matrices act on (x, z) column vectors.
using Mat2 = Eigen::Matrix2d;

Mat2 yaw2(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  Mat2 r;
  r << c, s, -s, c;
  return r;
}

}  // namespace

void check_floor(std::span<const Vec2> polygon) {
  if (polygon.size() < 3) throw InvalidFloor("floor polygon needs at least 3 vertices");
  for (std::size_t i = 0; i < polygon.size(); ++i) {
    if (!polygon[i].allFinite()) throw InvalidFloor("floor vertex is not finite");
    if (polygon[i] == polygon[(i + 1) % polygon.size()]) throw InvalidFloor("floor polygon has a zero-length edge");
  }
  if (!is_simple_polygon(polygon)) throw InvalidFloor("floor polygon self-intersects");
  if (!(signed_area(polygon) > 0.0)) throw InvalidFloor("floor polygon must be counter-clockwise with positive area");
}

std::size_t anchor_vertex(std::span<const Vec2> polygon) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < polygon.size(); ++i) {
    const auto& p = polygon[i];
    const auto& b = polygon[best];
    if (p.x() < b.x() || (p.x() == b.x() && p.y() < b.y())) best = i;
  }
  return best;
}

FloorRing register_ring(std::span<const Vec2> polygon) {
  check_floor(polygon);
  const std::size_t n = polygon.size();
  const std::size_t a = anchor_vertex(polygon);
  // Polygon re-indexed so that the anchor comes first.
  std::vector<Vec2> poly(n);
  for (std::size_t i = 0; i < n; ++i) poly[i] = polygon[(a + i) % n];

  std::vector<std::size_t> breaks = {0};
  for (std::size_t i = 1; i < n; ++i) {
    if (turning_angle(poly[i - 1], poly[i], poly[(i + 1) % n]) > kSharpCornerAngle) breaks.push_back(i);
  }
  if (breaks.size() > static_cast<std::size_t>(kRingSize)) throw InvalidFloor("floor polygon has too many corners");

  const std::size_t k = breaks.size();
  std::vector<double> lengths(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t end = c + 1 < k ? breaks[c + 1] : n;
    for (std::size_t i = breaks[c]; i < end; ++i) lengths[c] += (poly[(i + 1) % n] - poly[i]).norm();
  }
  const auto counts = apportion(lengths, kRingSize);

  FloorRing ring;
  ring.reserve(kRingSize);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t end = c + 1 < k ? breaks[c + 1] : n;
    ring.push_back(poly[breaks[c]]);
    std::size_t edge = breaks[c];
    double edge_start = 0.0;  // arc length at the start of `edge`
    for (int j = 1; j < counts[c]; ++j) {
      const double t = lengths[c] * j / counts[c];
      double len = (poly[(edge + 1) % n] - poly[edge]).norm();
      while (edge + 1 < end && edge_start + len < t) {
        edge_start += len;
        ++edge;
        len = (poly[(edge + 1) % n] - poly[edge]).norm();
      }
      const double u = std::clamp((t - edge_start) / len, 0.0, 1.0);
      ring.push_back(poly[edge] + u * (poly[(edge + 1) % n] - poly[edge]));
    }
  }
  return ring;
}

const FloorRing& reference_ring() {
  static const FloorRing ring = [] {
    FloorRing r(kRingSize);
    for (int i = 0; i < kRingSize; ++i) {
      const double t = 2.0 * std::numbers::pi * i / kRingSize;
      r[i] = Vec2(std::cos(t), std::sin(t));
    }
    return r;
  }();
  return ring;
}

DeformationFeatures identity_features(std::size_t n) {
  DeformationFeatures f = DeformationFeatures::Zero(static_cast<Eigen::Index>(n), kFeatureChannels);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    f(i, 0) = 1.0;
    f(i, 3) = 1.0;
    f(i, 5) = 1.0;
  }
  return f;
}

DeformationFeatures ring_to_features(const FloorRing& ring, const FloorRing& reference) {
  const std::size_t n = ring.size();
  if (n != reference.size() || n < 3) throw DegenerateRing("ring and reference sizes differ");
  DeformationFeatures f = identity_features(n);
  // Per-edge rotation from reference to ring, unwrapped along the cycle. The
  // polar angle alone has an arbitrary 2*pi branch at concave corners, which
  // makes feature blends between rings wind differently; each vertex picks the
  // branch nearest the mean rotation of its two edges instead.
  std::vector<double> edge_rot(n);
  for (std::size_t e = 0; e < n; ++e) {
    const Vec2 d = ring[(e + 1) % n] - ring[e], d0 = reference[(e + 1) % n] - reference[e];
    double r = std::atan2(d0.y(), d0.x()) - std::atan2(d.y(), d.x());
    if (e == 0) {
      r = std::remainder(r, 2.0 * std::numbers::pi);
    } else {
      r = edge_rot[e - 1] + std::remainder(r - edge_rot[e - 1], 2.0 * std::numbers::pi);
    }
    edge_rot[e] = r;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = (i + n - 1) % n, q = (i + 1) % n;
    const Vec2 a = reference[i] - reference[p], b = reference[q] - reference[i];
    const Vec2 a2 = ring[i] - ring[p], b2 = ring[q] - ring[i];
    if (a2.squaredNorm() == 0.0 || b2.squaredNorm() == 0.0) throw DegenerateRing("ring has a zero-length edge");
    const double det = a.x() * b.y() - a.y() * b.x();
    if (det == 0.0) throw DegenerateRing("reference edges are parallel");
    // T = [a2 b2] adj([a b]) / det, written out so that a2 = a, b2 = b gives I exactly.
    Mat2 t;
    t(0, 0) = (a2.x() * b.y() - b2.x() * a.y()) / det;
    t(0, 1) = (-a2.x() * b.x() + b2.x() * a.x()) / det;
    t(1, 0) = (a2.y() * b.y() - b2.y() * a.y()) / det;
    t(1, 1) = (-a2.y() * b.x() + b2.y() * a.x()) / det;
    double theta = std::atan2(t(0, 1) - t(1, 0), t(0, 0) + t(1, 1));
    const Mat2 s = yaw2(theta).transpose() * t;
    const double prev_rot = i == 0 ? edge_rot[0] + std::remainder(edge_rot[n - 1] - edge_rot[0], 2.0 * std::numbers::pi)
                                   : edge_rot[i - 1];
    const double guide = 0.5 * (prev_rot + edge_rot[i]);
    theta += 2.0 * std::numbers::pi * std::round((guide - theta) / (2.0 * std::numbers::pi));
    const auto r = static_cast<Eigen::Index>(i);
    f(r, 0) = s(0, 0);
    f(r, 2) = 0.5 * (s(0, 1) + s(1, 0));
    f(r, 5) = s(1, 1);
    f(r, 7) = theta;
  }
  return f;
}

FloorRing features_to_ring(const DeformationFeatures& features, const FloorRing& reference,
                           std::size_t anchor_index, const Vec2& anchor_position) {
  const std::size_t n = reference.size();
  if (static_cast<std::size_t>(features.rows()) != n) throw DegenerateRing("feature rows do not match the reference");
  if (anchor_index >= n) throw DegenerateRing("anchor index out of range");
  // Edge targets: every vertex predicts both incident edges.
  std::vector<Vec2> target(n, Vec2::Zero());  // accumulated prediction for edge i -> i+1
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    Mat2 s;
    s << features(r, 0), features(r, 2), features(r, 2), features(r, 5);
    const Mat2 t = yaw2(features(r, 7)) * s;
    const std::size_t p = (i + n - 1) % n, q = (i + 1) % n;
    target[p] += t * (reference[i] - reference[p]);
    target[i] += t * (reference[q] - reference[i]);
  }
  // Normal equations: each edge counted twice, anchor eliminated.
  auto col = [&](std::size_t v) { return v < anchor_index ? v : v - 1; };
  const auto m = static_cast<Eigen::Index>(n - 1);
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixX2d rhs = Eigen::MatrixX2d::Zero(m, 2);
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t u = e, v = (e + 1) % n;
    // Residual: (x_v - x_u) - target[e] / 2, weight 2.
    const Vec2 d = target[e];
    const bool fu = u == anchor_index, fv = v == anchor_index;
    if (!fu) {
      trip.emplace_back(col(u), col(u), 2.0);
      rhs.row(col(u)) -= d.transpose();
    }
    if (!fv) {
      trip.emplace_back(col(v), col(v), 2.0);
      rhs.row(col(v)) += d.transpose();
    }
    if (!fu && !fv) {
      trip.emplace_back(col(u), col(v), -2.0);
      trip.emplace_back(col(v), col(u), -2.0);
    }
    if (fu) rhs.row(col(v)) += 2.0 * anchor_position.transpose();
    if (fv) rhs.row(col(u)) += 2.0 * anchor_position.transpose();
  }
  Eigen::SparseMatrix<double> a(m, m);
  a.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
  if (solver.info() != Eigen::Success) throw DegenerateRing("reconstruction system is singular");
  const Eigen::MatrixX2d x = solver.solve(rhs);
  FloorRing ring(n);
  for (std::size_t i = 0; i < n; ++i) {
    ring[i] = i == anchor_index ? anchor_position : Vec2(x.row(col(i)).transpose());
  }
  return ring;
}

Eigen::VectorXd pool_condition(const DeformationFeatures& features, int dim, std::uint64_t seed) {
  if (dim < 1) throw ConfigError("condition dimension must be positive");
  Eigen::Matrix<double, 2 * kFeatureChannels, 1> pooled;
  for (int c = 0; c < kFeatureChannels; ++c) {
    pooled[c] = features.col(c).mean();
    pooled[kFeatureChannels + c] = features.col(c).maxCoeff();
  }
  Rng rng(seed);
  Eigen::MatrixXd proj(dim, 2 * kFeatureChannels);
  const double scale = 1.0 / std::sqrt(2.0 * kFeatureChannels);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < 2 * kFeatureChannels; ++c) proj(r, c) = scale * rng.normal();
  }
  return proj * pooled;
}

std::vector<Vec2> simplify_ring(const FloorRing& ring, double tol) {
  std::vector<Vec2> out;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = ring[i] - ring[(i + n - 1) % n];
    const Vec2 b = ring[(i + 1) % n] - ring[i];
    const bool straight = std::abs(cross2(a, b)) <= tol * a.norm() * b.norm() && a.dot(b) > 0.0;
    if (!straight) out.push_back(ring[i]);
  }
  return out;
}

std::string encode_features(const DeformationFeatures& features) {
  std::string out(kMagic, sizeof kMagic);
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    for (int c = 0; c < kFeatureChannels; ++c) {
      auto bits = std::bit_cast<std::uint64_t>(features(r, c));
      for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
  }
  return out;
}

DeformationFeatures decode_features(std::string_view bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ParseError("byte 0", "missing feature-file magic");
  }
  const std::size_t payload = bytes.size() - sizeof kMagic;
  const std::size_t row_bytes = 8 * kFeatureChannels;
  if (payload % row_bytes != 0 || payload == 0) {
    throw ParseError("byte " + std::to_string(bytes.size()), "truncated feature rows");
  }
  DeformationFeatures f(static_cast<Eigen::Index>(payload / row_bytes), kFeatureChannels);
  std::size_t pos = sizeof kMagic;
  for (Eigen::Index r = 0; r < f.rows(); ++r) {
    for (int c = 0; c < kFeatureChannels; ++c) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
      f(r, c) = std::bit_cast<double>(bits);
    }
  }
  return f;
}

void write_features(const std::string& path, const DeformationFeatures& features) {
  write_text_file(path, encode_features(features));
}

DeformationFeatures read_features(const std::string& path) {
  const std::string bytes = read_text_file(path);
  try {
    return decode_features(bytes);
  } catch (const ParseError& e) {
    throw ParseError(path + ":" + e.where(), e.what());
  }
}

}  // namespace scenehgn
