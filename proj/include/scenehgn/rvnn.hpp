#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scenehgn/nn.hpp"
#include "scenehgn/scene.hpp"

namespace scenehgn {

struct ModelConfig {
  int feature_dim = 64;
  int latent_dim = 128;
  int condition_dim = 32;
  int max_children = kMaxChildren;
  int mp_iterations = 2;
  int num_categories = 16;
  int num_region_types = kNumRegionTypes;
  int hyper_types = 3;  // none, n-fold rotation, parallel collinear
  int object_feature_dim = 8;

  void check() const;
};

struct TrainConfig {
  double learning_rate = 1e-3;
  double decay = 0.9;
  int decay_steps = 2000;
  int batch_size = 8;
  int steps = 2000;
  double kl_weight = 0.01;
  /// Weight of the relational energy on predicted placements.
  double energy_weight = 0.1;
  int energy_samples = 32;
  /// Probability of training a scene from a copy with one object removed
  /// (target stays the full scene).
  double deletion_rate = 0.0;
  std::uint64_t seed = 1;

  void check() const;
};

/// Parameters plus the vocabulary they were built for.
struct Model {
  ModelConfig config;
  SceneConfig vocab;
  nn::ParameterStore params;

  /// Registers every tensor with seeded initial values. The vocabulary size
  /// and object feature size must agree with `config`.
  Model(const ModelConfig& config, const SceneConfig& vocab, std::uint64_t seed);
};

/// asinh of the pooled floor condition (zeros when the floor is empty).
Eigen::VectorXd scene_condition(const SceneHierarchy& scene, int dim);

/// Children sorted by category index, then center (x, y, z); regions sorted
/// by type, then the mean child center. Edges are kept.
SceneHierarchy canonical_order(const SceneHierarchy& scene, const SceneConfig& vocab);

/// Copy of the scene without one object: its region entry, binary edges and
/// vertical flags go, hyper-edges that involve it are dropped, and an emptied
/// region is removed.
SceneHierarchy remove_object(const SceneHierarchy& scene, const std::string& id);

// Encoder pieces, exposed for tests. Codes are column vectors.
nn::Var enc_objects(nn::Graph& g, const Model& m, std::span<const ObjectNode* const> objects);
nn::Var enc_region(nn::Graph& g, const Model& m, const SceneHierarchy& scene, const RegionNode& region);

struct Encoding {
  Eigen::VectorXd mu, logvar, z;
};

/// z = mu + exp(logvar / 2) * eps with eps drawn from `seed`.
Encoding encode_scene(const Model& m, const SceneHierarchy& scene, const Eigen::VectorXd& condition,
                      std::uint64_t seed);

/// Top-down decoding. The output passes validate() for any finite input.
SceneHierarchy decode_scene(const Model& m, const Eigen::VectorXd& z, const Eigen::VectorXd& condition,
                            const std::vector<Vec2>& floor, const std::string& room_id = "decoded");

/// Raw decoder outputs for one region's child slots (columns = slots).
struct SlotOutputs {
  nn::Var exist;     // 1 x K
  nn::Var semantic;  // categories x K
  nn::Var feature;   // feature dim x K
  nn::Var center;    // 3 x K
  nn::Var scale;     // 3 x K
  nn::Var rho;       // 8 x K
  nn::Var offset;    // 1 x K, within +-22.5 degrees
  nn::Var vertical;  // 2 x K (align, inside)
  nn::Var hyper;     // 3 x n over the first n slots
  nn::Var edges;     // 4 x n(n-1)/2 over pairs (i < j) of the first n slots
};

struct DecoderOutputs {
  nn::Var region_exist;  // 1 x K
  nn::Var region_type;   // region types x K
  std::vector<SlotOutputs> regions;
};

struct LossBreakdown {
  double existence = 0.0;
  double semantic = 0.0;
  double feature = 0.0;
  double placement = 0.0;  // center + scale + orientation class + offset residual
  double edge = 0.0;
  double hyper = 0.0;
  double vertical = 0.0;
  double energy = 0.0;  // weighted relational energy of the predicted boxes
  double kl = 0.0;      // weighted
  double reconstruction() const { return existence + semantic + feature + placement + edge + hyper + vertical + energy; }
  double total() const { return reconstruction() + kl; }
};

/// Loss of decoder outputs against a canonically ordered target scene.
/// `outputs.regions[k]` must be evaluated with as many hyper/edge slots as
/// target region k has children. Returns the scalar node.
nn::Var reconstruction_loss(nn::Graph& g, const DecoderOutputs& outputs, const SceneHierarchy& target,
                            const Model& m, const TrainConfig& tc, LossBreakdown* breakdown = nullptr);

/// Full training loss for one (input, target) pair with teacher forcing.
/// With `backward` set the parameter gradients are accumulated.
LossBreakdown scene_loss(Model& m, const SceneHierarchy& input, const SceneHierarchy& target,
                         const TrainConfig& tc, std::uint64_t seed, bool backward);

struct TrainResult {
  std::vector<double> loss_curve;            // mean total loss per step
  std::vector<double> reconstruction_curve;  // mean reconstruction loss per step
};

/// Adam with step decay. Throws TrainingError on a non-finite loss.
TrainResult train(Model& m, const std::vector<SceneHierarchy>& corpus, const TrainConfig& tc);

/// Decodes the posterior mean.
SceneHierarchy reconstruct(const Model& m, const SceneHierarchy& scene);
SceneHierarchy interpolate(const Model& m, const SceneHierarchy& a, const SceneHierarchy& b, double t);
SceneHierarchy complete(const Model& m, const SceneHierarchy& partial);
/// Drops edges, refills object features from `seed`, encodes, samples z and
/// decodes.
SceneHierarchy box_layout_to_scene(const Model& m, const SceneHierarchy& boxes, std::uint64_t seed);

std::string encode_checkpoint(const Model& m);
Model decode_checkpoint(std::string_view bytes);
void save_checkpoint(const std::string& path, const Model& m);
Model load_checkpoint(const std::string& path);

}  // namespace scenehgn
