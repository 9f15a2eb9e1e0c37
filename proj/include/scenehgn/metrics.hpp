#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scenehgn/scene.hpp"

namespace scenehgn {

using Corpus = std::vector<SceneHierarchy>;

struct CategoryHistogram {
  std::vector<double> counts;

  double total() const;
  /// counts / total; all zeros when the histogram is empty.
  std::vector<double> normalized() const;
};

CategoryHistogram category_histogram(const Corpus& corpus, const SceneConfig& vocab = default_config());

/// EMD under the 0/1 ground metric: half the L1 distance. Throws DomainError
/// on a support mismatch.
double emd_categorical(const std::vector<double>& p, const std::vector<double>& q);

/// Optimal transport cost between p and q (equal total mass) under an
/// arbitrary non-negative cost matrix, by successive shortest paths.
double emd_transport(const std::vector<double>& p, const std::vector<double>& q, const Eigen::MatrixXd& cost);

/// 0/1 cost matrix of size n.
Eigen::MatrixXd zero_one_cost(int n);

/// Room types present on only one side are skipped; their names are appended
/// to `warnings` when given.
double o1(const Corpus& a, const Corpus& b, const SceneConfig& vocab = default_config());
double o2(const Corpus& a, const Corpus& b, const SceneConfig& vocab = default_config(),
          std::vector<std::string>* warnings = nullptr);
double o3(const Corpus& a, const Corpus& b, const SceneConfig& vocab = default_config(),
          std::vector<std::string>* warnings = nullptr);

/// Normalized distribution over unordered distinct category pairs (i < j),
/// each pair counted once per scene where both occur.
std::vector<double> pair_cooccurrence(const Corpus& corpus, const SceneConfig& vocab = default_config());

inline constexpr int kHeatmapCells = 1000;
inline constexpr double kHeatmapExtent = 3.5;  // meters, centered at the origin

struct OffsetHeatmap {
  std::string category_a, category_b;
  std::vector<std::uint32_t> grid = std::vector<std::uint32_t>(kHeatmapCells * kHeatmapCells, 0);

  /// Column ix bins x offsets, row iz bins z offsets.
  std::uint32_t at(int ix, int iz) const { return grid[static_cast<std::size_t>(iz) * kHeatmapCells + ix]; }
  std::uint64_t total() const;
};

/// Cell of an offset, or -1 when it lies outside [-1.75, 1.75).
int heatmap_cell(double offset);

/// Bins (x_b - x_a, z_b - z_a) over ordered pairs of distinct objects with
/// categories (a, b) in each scene.
OffsetHeatmap o4_heatmap(const Corpus& corpus, const std::string& category_a, const std::string& category_b);

/// Binary 8-bit PGM scaled so the fullest cell is white.
std::string heatmap_pgm(const OffsetHeatmap& h);
/// Raw grid: little-endian uint32, row-major.
std::string heatmap_raw(const OffsetHeatmap& h);

enum class OrientationFormula {
  Default,  // cos^2(4 theta): peaks at every multiple of 45 degrees
  Literal   // cos^2(2 theta)
};

double orientation_score(double yaw, OrientationFormula f = OrientationFormula::Default);
/// Mean over all objects. Throws DomainError on an empty corpus.
double orientation_score(const Corpus& corpus, OrientationFormula f = OrientationFormula::Default);

/// Frechet distance between Gaussians fitted to two feature sets (rows are
/// samples). The features come from an external image network.
double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace scenehgn
