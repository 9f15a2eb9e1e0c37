#include "scenehgn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>

#include <Eigen/Eigenvalues>

#include "scenehgn/errors.hpp"

namespace scenehgn {

double CategoryHistogram::total() const {
  double t = 0.0;
  for (double c : counts) t += c;
  return t;
}

std::vector<double> CategoryHistogram::normalized() const {
  const double t = total();
  std::vector<double> p(counts.size(), 0.0);
  if (t > 0.0) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = counts[i] / t;
  }
  return p;
}

CategoryHistogram category_histogram(const Corpus& corpus, const SceneConfig& vocab) {
  CategoryHistogram h;
  h.counts.assign(vocab.categories.size(), 0.0);
  for (const auto& s : corpus) {
    for (const auto& o : s.objects) {
      const int c = vocab.category_index(o.category);
      if (c < 0) throw DomainError("unknown category " + o.category);
      h.counts[static_cast<std::size_t>(c)] += 1.0;
    }
  }
  return h;
}

double emd_categorical(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DomainError("histograms have different supports");
  double l1 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) l1 += std::abs(p[i] - q[i]);
  return 0.5 * l1;
}

Eigen::MatrixXd zero_one_cost(int n) {
  return Eigen::MatrixXd::Ones(n, n) - Eigen::MatrixXd::Identity(n, n);
}

double emd_transport(const std::vector<double>& p, const std::vector<double>& q, const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(p.size()), m = static_cast<int>(q.size());
  if (cost.rows() != n || cost.cols() != m) throw DomainError("cost matrix does not match the histograms");
  // Nodes: source, n supplies, m demands, sink. Edges carry residual
  // capacity; supply->demand edges are uncapacitated.
  const int src = 0, sink = n + m + 1, nodes = n + m + 2;
  struct Edge {
    int to;
    double cap, cost;
    int rev;
  };
  std::vector<std::vector<Edge>> g(static_cast<std::size_t>(nodes));
  auto add = [&](int u, int v, double cap, double c) {
    g[u].push_back({v, cap, c, static_cast<int>(g[v].size())});
    g[v].push_back({u, 0.0, -c, static_cast<int>(g[u].size()) - 1});
  };
  const double inf = std::numeric_limits<double>::infinity();
  double supply = 0.0;
  for (int i = 0; i < n; ++i) {
    add(src, 1 + i, p[static_cast<std::size_t>(i)], 0.0);
    supply += p[static_cast<std::size_t>(i)];
  }
  for (int j = 0; j < m; ++j) add(1 + n + j, sink, q[static_cast<std::size_t>(j)], 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) add(1 + i, 1 + n + j, inf, cost(i, j));
  }
  double moved = 0.0, total = 0.0;
  const double eps = 1e-15;
  while (moved < supply - eps) {
    // Bellman-Ford: residual costs may be negative.
    std::vector<double> dist(static_cast<std::size_t>(nodes), inf);
    std::vector<std::pair<int, int>> prev(static_cast<std::size_t>(nodes), {-1, -1});
    dist[src] = 0.0;
    for (int round = 0; round < nodes; ++round) {
      bool changed = false;
      for (int u = 0; u < nodes; ++u) {
        if (dist[u] == inf) continue;
        for (int k = 0; k < static_cast<int>(g[u].size()); ++k) {
          const Edge& e = g[u][k];
          if (e.cap > eps && dist[u] + e.cost < dist[e.to] - 1e-15) {
            dist[e.to] = dist[u] + e.cost;
            prev[e.to] = {u, k};
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (dist[sink] == inf) break;
    double push = inf;
    for (int v = sink; v != src; v = prev[v].first) push = std::min(push, g[prev[v].first][prev[v].second].cap);
    for (int v = sink; v != src; v = prev[v].first) {
      Edge& e = g[prev[v].first][prev[v].second];
      e.cap -= push;
      g[v][e.rev].cap += push;
    }
    moved += push;
    total += push * dist[sink];
  }
  return total;
}

namespace {

std::map<std::string, Corpus> by_room_type(const Corpus& c) {
  std::map<std::string, Corpus> out;
  for (const auto& s : c) out[s.room_type].push_back(s);
  return out;
}

template <class F>
double mean_over_room_types(const Corpus& a, const Corpus& b, std::vector<std::string>* warnings, F per_type) {
  const auto ga = by_room_type(a), gb = by_room_type(b);
  std::set<std::string> types;
  for (const auto& [k, v] : ga) types.insert(k);
  for (const auto& [k, v] : gb) types.insert(k);
  double sum = 0.0;
  int n = 0;
  for (const auto& t : types) {
    const auto ia = ga.find(t), ib = gb.find(t);
    if (ia == ga.end() || ib == gb.end()) {
      if (warnings) warnings->push_back("room type '" + t + "' missing from one corpus; skipped");
      continue;
    }
    const auto v = per_type(ia->second, ib->second);
    if (!v) {
      if (warnings) warnings->push_back("room type '" + t + "' has no pairs on one side; skipped");
      continue;
    }
    sum += *v;
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

}  // namespace

double o1(const Corpus& a, const Corpus& b, const SceneConfig& vocab) {
  return emd_categorical(category_histogram(a, vocab).normalized(), category_histogram(b, vocab).normalized());
}

double o2(const Corpus& a, const Corpus& b, const SceneConfig& vocab, std::vector<std::string>* warnings) {
  return mean_over_room_types(a, b, warnings, [&](const Corpus& x, const Corpus& y) -> std::optional<double> {
    return o1(x, y, vocab);
  });
}

std::vector<double> pair_cooccurrence(const Corpus& corpus, const SceneConfig& vocab) {
  const std::size_t n = vocab.categories.size();
  std::vector<double> counts(n * (n - 1) / 2, 0.0);
  double total = 0.0;
  for (const auto& s : corpus) {
    std::set<int> present;
    for (const auto& o : s.objects) {
      const int c = vocab.category_index(o.category);
      if (c < 0) throw DomainError("unknown category " + o.category);
      present.insert(c);
    }
    for (auto i = present.begin(); i != present.end(); ++i) {
      for (auto j = std::next(i); j != present.end(); ++j) {
        const std::size_t a = static_cast<std::size_t>(*i), b = static_cast<std::size_t>(*j);
        counts[a * n - a * (a + 1) / 2 + (b - a - 1)] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total > 0.0) {
    for (auto& c : counts) c /= total;
  }
  return counts;
}

double o3(const Corpus& a, const Corpus& b, const SceneConfig& vocab, std::vector<std::string>* warnings) {
  return mean_over_room_types(a, b, warnings, [&](const Corpus& x, const Corpus& y) -> std::optional<double> {
    const auto px = pair_cooccurrence(x, vocab), py = pair_cooccurrence(y, vocab);
    auto empty = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; }); };
    if (empty(px) || empty(py)) return std::nullopt;
    return emd_categorical(px, py);
  });
}

std::uint64_t OffsetHeatmap::total() const {
  std::uint64_t t = 0;
  for (auto c : grid) t += c;
  return t;
}

int heatmap_cell(double offset) {
  const double half = 0.5 * kHeatmapExtent;
  if (!(offset >= -half && offset < half)) return -1;
  const int c = static_cast<int>(std::floor((offset + half) * kHeatmapCells / kHeatmapExtent));
  return std::min(c, kHeatmapCells - 1);
}

OffsetHeatmap o4_heatmap(const Corpus& corpus, const std::string& category_a, const std::string& category_b) {
  OffsetHeatmap h;
  h.category_a = category_a;
  h.category_b = category_b;
  for (const auto& s : corpus) {
    for (const auto& a : s.objects) {
      if (a.category != category_a) continue;
      for (const auto& b : s.objects) {
        if (&a == &b || b.category != category_b) continue;
        const int ix = heatmap_cell(b.placement.center.x() - a.placement.center.x());
        const int iz = heatmap_cell(b.placement.center.z() - a.placement.center.z());
        if (ix < 0 || iz < 0) continue;
        ++h.grid[static_cast<std::size_t>(iz) * kHeatmapCells + ix];
      }
    }
  }
  return h;
}

std::string heatmap_pgm(const OffsetHeatmap& h) {
  std::string out = "P5\n" + std::to_string(kHeatmapCells) + " " + std::to_string(kHeatmapCells) + "\n255\n";
  const std::uint32_t peak = *std::max_element(h.grid.begin(), h.grid.end());
  for (auto c : h.grid) {
    out.push_back(static_cast<char>(peak == 0 ? 0 : static_cast<unsigned>((255ULL * c + peak / 2) / peak)));
  }
  return out;
}

std::string heatmap_raw(const OffsetHeatmap& h) {
  std::string out;
  out.reserve(h.grid.size() * 4);
  for (auto c : h.grid) {
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((c >> (8 * k)) & 0xFF));
  }
  return out;
}

double orientation_score(double yaw, OrientationFormula f) {
  const double c = std::cos((f == OrientationFormula::Default ? 4.0 : 2.0) * yaw);
  return c * c;
}

double orientation_score(const Corpus& corpus, OrientationFormula f) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& s : corpus) {
    for (const auto& o : s.objects) {
      sum += orientation_score(o.placement.orientation, f);
      ++n;
    }
  }
  if (n == 0) throw DomainError("orientation score of a corpus without objects");
  return sum / static_cast<double>(n);
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.cols() != b.cols() || a.rows() < 2 || b.rows() < 2) throw DomainError("feature sets need matching widths and 2+ rows");
  auto stats = [](const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
    cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
  };
  Eigen::VectorXd ma, mb;
  Eigen::MatrixXd ca, cb;
  stats(a, ma, ca);
  stats(b, mb, cb);
  // Tr sqrt(Ca Cb) = Tr sqrt(Ca^1/2 Cb Ca^1/2), a symmetric PSD product.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(ca);
  const Eigen::MatrixXd ra = ea.eigenvectors() * ea.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                             ea.eigenvectors().transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(ra * cb * ra);
  const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  return (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_sqrt;
}

}  // namespace scenehgn
