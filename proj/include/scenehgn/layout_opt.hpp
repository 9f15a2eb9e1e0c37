#pragma once

#include <map>
#include <string>
#include <vector>

#include "scenehgn/energy.hpp"
#include "scenehgn/scene.hpp"

namespace scenehgn {

struct EditConstraint {
  std::string object;
  bool pin_center = false;
  bool pin_scale = false;
  bool pin_orientation = false;
  PlacementParams target;

  /// Throws ConfigError when nothing is pinned or the target is invalid.
  void check() const;
};

struct OptimizerConfig {
  double step = 1e-2;
  int max_iterations = 2000;
  double tolerance = 1e-9;  // stop when an accepted step lowers the energy by less
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double min_scale = 0.01;
  int samples = kEnergySamples;

  void check() const;
};

struct TraceEntry {
  int iteration = 0;
  std::map<std::string, double> terms;
  double total = 0.0;
};

struct RefineResult {
  SceneHierarchy scene;
  std::vector<TraceEntry> trace;  // entry 0 is the starting point
  std::vector<std::string> warnings;
};

/// Adam descent on total_energy over all unpinned placement parameters.
/// A step that would raise the energy is rejected and the step size halved,
/// so the recorded energies never increase. Returns the best iterate.
/// Throws OptimizerError when the energy becomes NaN.
RefineResult refine(const SceneHierarchy& scene, const std::vector<EditConstraint>& constraints,
                    const OptimizerConfig& config = {}, const EnergyWeights& weights = {});

/// Applies each edit to the pinned object, carries the other members of its
/// hyper-edges along with the same rigid motion (about the edited object's
/// old center), then refines with the edits pinned.
RefineResult edit_propagate(const SceneHierarchy& scene, const std::vector<EditConstraint>& edits,
                            const OptimizerConfig& config = {}, const EnergyWeights& weights = {});

/// Edits JSON: [{object, center?, scale?, orientation?}]; present fields are
/// pinned to the given values, missing ones are taken from `scene`.
std::vector<EditConstraint> load_edits(const std::string& path, const SceneHierarchy& scene);

/// CSV with header iteration,<terms...>,total.
std::string trace_csv(const std::vector<TraceEntry>& trace);

}  // namespace scenehgn
