#include "scenehgn/rvnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <numbers>
#include <set>

#include "scenehgn/detect.hpp"
#include "scenehgn/energy.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/floor.hpp"
#include "scenehgn/rng.hpp"
#include "scenehgn/serialize.hpp"

namespace scenehgn {

using nn::Graph;
using nn::Mat;
using nn::Var;

void ModelConfig::check() const {
  if (feature_dim < 1 || latent_dim < 1 || condition_dim < 1 || num_categories < 1 || num_region_types < 1 ||
      object_feature_dim < 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (max_children != kMaxChildren) throw ConfigError("max_children must be " + std::to_string(kMaxChildren));
  if (mp_iterations < 0) throw ConfigError("mp_iterations must be >= 0");
  if (hyper_types != 3) throw ConfigError("hyper_types must be 3");
}

void TrainConfig::check() const {
  if (!(learning_rate > 0.0) || !(decay > 0.0) || decay_steps < 1 || batch_size < 1 || steps < 0) {
    throw ConfigError("training rates, batch size and steps must be positive");
  }
  if (!(kl_weight >= 0.0) || !(energy_weight >= 0.0) || energy_samples < 1) throw ConfigError("invalid loss weights");
  if (!(deletion_rate >= 0.0 && deletion_rate <= 1.0)) throw ConfigError("deletion_rate must be in [0, 1]");
}

Model::Model(const ModelConfig& cfg, const SceneConfig& v, std::uint64_t seed) : config(cfg), vocab(v) {
  config.check();
  if (static_cast<int>(vocab.categories.size()) != config.num_categories) {
    throw ConfigError("model expects " + std::to_string(config.num_categories) + " categories, vocabulary has " +
                      std::to_string(vocab.categories.size()));
  }
  if (vocab.feature_dim != config.object_feature_dim) throw ConfigError("object feature size mismatch");

  const int F = config.feature_dim, L = config.latent_dim, Cd = config.condition_dim;
  const int C = config.num_categories, D = config.object_feature_dim, R = config.num_region_types;
  const int K = config.max_children;
  std::uint64_t stream = 0;
  auto layer = [&](const std::string& name, int in, int out, bool bias = true) {
    nn::add_dense(params, name, in, out, mix_seed(seed, stream++), bias);
  };
  layer("enc.obj", D + 7 + C, F);
  layer("enc.hyper1", F + 3, F);
  layer("enc.hyper2", F, F);
  for (int t = 0; t < config.mp_iterations; ++t) {
    layer("enc.msg" + std::to_string(t), 2 * F + kNumBinaryEdgeTypes, F);
    layer("enc.upd" + std::to_string(t), F, F, false);
  }
  layer("enc.agg", F, F);
  layer("enc.region", F + R, F);
  layer("enc.room", F, F);
  layer("enc.mu", F + Cd, L);
  layer("enc.logvar", F + Cd, L);
  // Start near the prior so early samples are not swamped by noise.
  params.get("enc.mu.W").value *= 0.1;
  params.get("enc.logvar.W").value *= 0.01;

  layer("dec.root", L + Cd, F);
  layer("dec.r2s", F + Cd, K * F);
  layer("dec.region_exist", F, 1);
  layer("dec.region_type", F, R);
  layer("dec.o2s", F + Cd, K * F);
  layer("dec.exist", F, 1);
  layer("dec.semantic", F, C);
  layer("dec.feature", F, std::max(D, 1));
  layer("dec.place", F, F);
  layer("dec.center", F, 3);
  layer("dec.scale", F, 3);
  layer("dec.rho", F, 8);
  layer("dec.offset", F, 1);
  layer("dec.vertical", F, 2);
  layer("dec.query", F, F, false);
  layer("dec.key", F, F, false);
  layer("dec.hyper", 2 * F, 3);
  layer("dec.edge1", 2 * F, F);
  layer("dec.edge2", F, kNumBinaryEdgeTypes);
}

Eigen::VectorXd scene_condition(const SceneHierarchy& scene, int dim) {
  if (scene.floor.empty()) return Eigen::VectorXd::Zero(dim);
  // Corner fits make the pooled maxima span orders of magnitude.
  return pool_condition(ring_to_features(register_ring(scene.floor)), dim).array().asinh().matrix();
}

namespace {

// Room coordinates span several meters; the encoder sees them shrunk.
constexpr double kPositionScale = 0.2;

Mat column(const Eigen::VectorXd& v) { return Mat(v); }

Vec2 mean_center(const SceneHierarchy& s, const RegionNode& r) {
  Vec2 m = Vec2::Zero();
  for (const auto& c : r.children) m += ground(s.find_object(c)->placement.center);
  return r.children.empty() ? m : Vec2(m / static_cast<double>(r.children.size()));
}

/// 0 none, 1 n-fold member, 2 parallel member.
std::map<std::string, int> hyper_labels(const SceneHierarchy& s) {
  std::map<std::string, int> out;
  for (const auto& h : s.edges.hyper) {
    for (const auto& m : h.members) out.emplace(m, h.type == HyperEdgeType::NFoldRotation ? 1 : 2);
  }
  return out;
}

int lookup(const std::map<std::string, int>& m, const std::string& k) {
  const auto it = m.find(k);
  return it == m.end() ? 0 : it->second;
}

Var leaky(Graph& g, Var x) { return g.leaky_relu(x, 0.01); }

Var region_code_from_objects(Graph& g, const Model& m, const SceneHierarchy& scene, const RegionNode& region) {
  const int n = static_cast<int>(region.children.size());
  if (n < 1 || n > m.config.max_children) {
    throw ConfigError("region " + region.id + " has " + std::to_string(n) + " children, expected 1 to 10");
  }
  std::vector<const ObjectNode*> objs;
  for (const auto& id : region.children) {
    const auto* o = scene.find_object(id);
    if (!o) throw ConfigError("region " + region.id + " lists unknown object " + id);
    objs.push_back(o);
  }
  Var h = enc_objects(g, m, objs);
  const int F = m.config.feature_dim;

  // Hyper-edge labels: a one-hot type for members, zero otherwise.
  const auto labels = hyper_labels(scene);
  Mat onehot = Mat::Zero(3, n);
  Mat mask = Mat::Zero(F, n);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    const int t = lookup(labels, region.children[static_cast<std::size_t>(i)]);
    if (t > 0) {
      onehot(t, i) = 1.0;
      mask.col(i).setOnes();
      any = true;
    }
  }
  if (any) {
    const Var x = g.concat_rows({h, g.constant(onehot)});
    const Var hf = nn::dense(g, m.params, "enc.hyper2", leaky(g, nn::dense(g, m.params, "enc.hyper1", x)));
    h = g.add(h, g.mul(hf, g.constant(mask)));
  }

  // Directed neighbor pairs with their multi-hot edge types.
  std::map<std::pair<int, int>, Eigen::Vector4d> pair_types;
  std::map<std::string, int> local;
  for (int i = 0; i < n; ++i) local[region.children[static_cast<std::size_t>(i)]] = i;
  for (const auto& e : scene.edges.binary) {
    const auto ia = local.find(e.a), ib = local.find(e.b);
    if (ia == local.end() || ib == local.end() || ia->second == ib->second) continue;
    const int t = static_cast<int>(e.type);
    for (auto key : {std::pair{ia->second, ib->second}, std::pair{ib->second, ia->second}}) {
      auto [it, fresh] = pair_types.try_emplace(key, Eigen::Vector4d::Zero());
      (void)fresh;
      it->second[t] = 1.0;
    }
  }
  if (!pair_types.empty()) {
    std::vector<int> src, dst;
    Mat types(kNumBinaryEdgeTypes, static_cast<Eigen::Index>(pair_types.size()));
    Eigen::Index k = 0;
    for (const auto& [key, t] : pair_types) {
      src.push_back(key.first);
      dst.push_back(key.second);
      types.col(k++) = t;
    }
    const Var tv = g.constant(types);
    for (int it = 0; it < m.config.mp_iterations; ++it) {
      const std::string s = std::to_string(it);
      const Var x = g.concat_rows({g.gather_cols(h, src), g.gather_cols(h, dst), tv});
      const Var msg = leaky(g, nn::dense(g, m.params, "enc.msg" + s, x));
      const Var pooled = g.scatter_add_cols(msg, src, n);
      h = g.add(h, leaky(g, nn::linear(g, m.params, "enc.upd" + s, pooled)));
    }
  }
  return leaky(g, nn::dense(g, m.params, "enc.agg", g.sum_cols(h)));
}

struct EncoderVars {
  Var mu, logvar;
};

EncoderVars encoder(Graph& g, const Model& m, const SceneHierarchy& scene, const Eigen::VectorXd& cond) {
  const int nr = static_cast<int>(scene.regions.size());
  if (nr < 1 || nr > m.config.max_children) {
    throw ConfigError("scene has " + std::to_string(nr) + " regions, expected 1 to 10");
  }
  if (cond.size() != m.config.condition_dim) throw ConfigError("condition size mismatch");
  std::vector<Var> codes;
  Mat types = Mat::Zero(m.config.num_region_types, nr);
  for (int k = 0; k < nr; ++k) {
    const auto& r = scene.regions[static_cast<std::size_t>(k)];
    codes.push_back(enc_region(g, m, scene, r));
    types(static_cast<int>(r.region_type), k) = 1.0;
  }
  const Var u = leaky(g, nn::dense(g, m.params, "enc.region", g.concat_rows({g.concat_cols(codes), g.constant(types)})));
  const Var root = leaky(g, nn::dense(g, m.params, "enc.room", g.sum_cols(u)));
  const Var x = g.concat_rows({root, g.constant(column(cond))});
  return {nn::dense(g, m.params, "enc.mu", x), nn::dense(g, m.params, "enc.logvar", x)};
}

/// Region slot codes (F x K) from the latent code.
Var region_slots(Graph& g, const Model& m, Var z, Var cond) {
  const Var root = leaky(g, nn::dense(g, m.params, "dec.root", g.concat_rows({z, cond})));
  const Var flat = leaky(g, nn::dense(g, m.params, "dec.r2s", g.concat_rows({root, cond})));
  return g.reshape_slots(flat, m.config.feature_dim, m.config.max_children);
}

Var object_slots(Graph& g, const Model& m, Var region_code, Var cond) {
  const Var flat = leaky(g, nn::dense(g, m.params, "dec.o2s", g.concat_rows({region_code, cond})));
  return g.reshape_slots(flat, m.config.feature_dim, m.config.max_children);
}

SlotOutputs object_heads(Graph& g, const Model& m, Var slots) {
  SlotOutputs o;
  auto head = [&](const char* name, Var x) { return nn::dense(g, m.params, name, x); };
  o.exist = head("dec.exist", slots);
  o.semantic = head("dec.semantic", slots);
  o.feature = head("dec.feature", slots);
  const Var p = g.add(leaky(g, head("dec.place", slots)), slots);
  o.center = head("dec.center", p);
  const Var sp = g.softplus(head("dec.scale", p));
  o.scale = g.add(sp, g.constant(Mat::Constant(3, g.value(sp).cols(), 1e-3)));
  o.rho = head("dec.rho", p);
  o.offset = g.scale(g.tanh(head("dec.offset", p)), kMaxAngleOffset);
  o.vertical = head("dec.vertical", slots);
  return o;
}


/// Hyper mask (3 x n) from attention over the chosen slots, and pairwise edge
/// logits (4 x pairs a < b in chosen order).
void relation_heads(Graph& g, const Model& m, Var slots, const std::vector<int>& chosen, SlotOutputs& o) {
  const int n = static_cast<int>(chosen.size());
  const Var h = g.gather_cols(slots, chosen);
  const Var q = nn::linear(g, m.params, "dec.query", h);
  const Var k = nn::linear(g, m.params, "dec.key", h);
  // Column j weights the slots attended by slot j.
  const double temp = 1.0 / std::sqrt(static_cast<double>(m.config.feature_dim));
  const Var attn = g.softmax_cols(g.scale(g.matmul(g.transpose(k), q), temp));
  const Var context = g.matmul(h, attn);
  o.hyper = nn::dense(g, m.params, "dec.hyper", g.concat_rows({h, context}));

  std::vector<int> ia, ib;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      ia.push_back(a);
      ib.push_back(b);
    }
  }
  if (ia.empty()) return;
  const Var ha = g.gather_cols(h, ia), hb = g.gather_cols(h, ib);
  const Var pair = g.concat_rows({g.add(ha, hb), g.mul(ha, hb)});
  o.edges = nn::dense(g, m.params, "dec.edge2", leaky(g, nn::dense(g, m.params, "dec.edge1", pair)));
}

std::vector<int> first_n(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
  return v;
}

/// Teacher-forced decoder: region slot k expands for k < counts.size() and
/// its relation heads cover the first counts[k] object slots.
DecoderOutputs decoder_outputs(Graph& g, const Model& m, Var z, Var cond, const std::vector<int>& counts) {
  DecoderOutputs d;
  const Var slots = region_slots(g, m, z, cond);
  d.region_exist = nn::dense(g, m.params, "dec.region_exist", slots);
  d.region_type = nn::dense(g, m.params, "dec.region_type", slots);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    const Var children = object_slots(g, m, g.cols(slots, static_cast<int>(k), 1), cond);
    SlotOutputs o = object_heads(g, m, children);
    relation_heads(g, m, children, first_n(counts[k]), o);
    d.regions.push_back(o);
  }
  return d;
}

int argmax_col(const Mat& x, Eigen::Index j) {
  Eigen::Index best = 0;
  x.col(j).maxCoeff(&best);
  return static_cast<int>(best);
}

std::vector<int> surviving(const Mat& exist_logits) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < exist_logits.cols(); ++j) {
    if (exist_logits(0, j) > 0.0) out.push_back(static_cast<int>(j));
  }
  if (out.empty()) {
    Eigen::Index best = 0;
    exist_logits.row(0).maxCoeff(&best);
    out.push_back(static_cast<int>(best));
  }
  return out;
}

PlacementParams predicted_placement(const Graph& g, const SlotOutputs& o, Eigen::Index j) {
  PlacementParams p;
  p.center = g.value(o.center).col(j);
  p.scale = g.value(o.scale).col(j);
  const int cls = argmax_col(g.value(o.rho), j);
  p.orientation = wrap_angle(kAngleTable[static_cast<std::size_t>(cls)] + g.value(o.offset)(0, j));
  return p;
}

}  // namespace

Var enc_objects(Graph& g, const Model& m, std::span<const ObjectNode* const> objects) {
  const int D = m.config.object_feature_dim, C = m.config.num_categories;
  const auto n = static_cast<Eigen::Index>(objects.size());
  Mat x = Mat::Zero(D + 7 + C, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const ObjectNode& o = *objects[static_cast<std::size_t>(i)];
    if (static_cast<int>(o.feature.size()) != D) {
      throw ConfigError("object " + o.id + " has feature size " + std::to_string(o.feature.size()) + ", expected " +
                        std::to_string(D));
    }
    for (int k = 0; k < D; ++k) x(k, i) = o.feature[static_cast<std::size_t>(k)];
    x.block<3, 1>(D, i) = kPositionScale * o.placement.center;
    x.block<3, 1>(D + 3, i) = o.placement.scale;
    x(D + 6, i) = o.placement.orientation;
    const int c = m.vocab.category_index(o.category);
    if (c < 0) throw ConfigError("object " + o.id + " has unknown category " + o.category);
    x(D + 7 + c, i) = 1.0;
  }
  return leaky(g, nn::dense(g, m.params, "enc.obj", g.constant(std::move(x))));
}

Var enc_region(Graph& g, const Model& m, const SceneHierarchy& scene, const RegionNode& region) {
  return region_code_from_objects(g, m, scene, region);
}

SceneHierarchy canonical_order(const SceneHierarchy& scene, const SceneConfig& vocab) {
  SceneHierarchy s = scene;
  for (auto& r : s.regions) {
    std::stable_sort(r.children.begin(), r.children.end(), [&](const std::string& a, const std::string& b) {
      const auto* oa = s.find_object(a);
      const auto* ob = s.find_object(b);
      const int ca = vocab.category_index(oa->category), cb = vocab.category_index(ob->category);
      if (ca != cb) return ca < cb;
      const Vec3& pa = oa->placement.center;
      const Vec3& pb = ob->placement.center;
      return std::lexicographical_compare(pa.data(), pa.data() + 3, pb.data(), pb.data() + 3);
    });
  }
  std::vector<std::pair<Vec2, std::size_t>> keys;
  for (std::size_t k = 0; k < s.regions.size(); ++k) keys.emplace_back(mean_center(s, s.regions[k]), k);
  std::vector<std::size_t> idx(s.regions.size());
  for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    const auto ta = static_cast<int>(s.regions[a].region_type), tb = static_cast<int>(s.regions[b].region_type);
    if (ta != tb) return ta < tb;
    const Vec2& ma = keys[a].first;
    const Vec2& mb = keys[b].first;
    return std::lexicographical_compare(ma.data(), ma.data() + 2, mb.data(), mb.data() + 2);
  });
  std::vector<RegionNode> regions;
  for (auto k : idx) regions.push_back(s.regions[k]);
  s.regions = std::move(regions);
  return s;
}

SceneHierarchy remove_object(const SceneHierarchy& scene, const std::string& id) {
  if (!scene.find_object(id)) throw ConfigError("unknown object " + id);
  SceneHierarchy s = scene;
  std::erase_if(s.objects, [&](const ObjectNode& o) { return o.id == id; });
  for (auto& r : s.regions) std::erase(r.children, id);
  std::erase_if(s.regions, [](const RegionNode& r) { return r.children.empty(); });
  std::erase_if(s.edges.binary, [&](const BinaryEdge& e) { return e.a == id || e.b == id; });
  std::erase_if(s.edges.hyper, [&](const HyperEdge& h) {
    return std::find(h.members.begin(), h.members.end(), id) != h.members.end() || (h.hub && *h.hub == id);
  });
  std::erase_if(s.edges.vertical, [&](const VerticalFlags& v) { return v.object == id; });
  return s;
}

Var reconstruction_loss(Graph& g, const DecoderOutputs& out, const SceneHierarchy& target, const Model& m,
                        const TrainConfig& tc, LossBreakdown* breakdown) {
  LossBreakdown lb;
  std::vector<Var> terms;
  auto add = [&](Var v, double& slot) {
    slot += g.value(v)(0, 0);
    terms.push_back(v);
  };
  const int K = m.config.max_children;
  const int nr = static_cast<int>(target.regions.size());
  if (static_cast<int>(out.regions.size()) != nr) throw ConfigError("decoder outputs do not match the target regions");

  Mat exist = Mat::Zero(1, K);
  std::vector<int> rtypes;
  for (int k = 0; k < nr; ++k) {
    exist(0, k) = 1.0;
    rtypes.push_back(static_cast<int>(target.regions[static_cast<std::size_t>(k)].region_type));
  }
  add(g.bce_logits(out.region_exist, exist), lb.existence);
  add(g.cross_entropy(g.cols(out.region_type, 0, nr), rtypes), lb.semantic);

  const auto labels = hyper_labels(target);
  SceneHierarchy predicted = target;
  std::vector<Var> energy_inputs;
  std::vector<std::vector<std::string>> energy_ids;

  for (int k = 0; k < nr; ++k) {
    const RegionNode& region = target.regions[static_cast<std::size_t>(k)];
    const SlotOutputs& o = out.regions[static_cast<std::size_t>(k)];
    const int n = static_cast<int>(region.children.size());
    const int D = m.config.object_feature_dim;
    Mat oexist = Mat::Zero(1, K), feature(std::max(D, 1), n), center(3, n), scale(3, n), residual(1, n);
    Mat vertical(2, n);
    feature.setZero();
    std::vector<int> cats, classes, hyper;
    std::map<std::string, int> local;
    for (int j = 0; j < n; ++j) {
      const std::string& id = region.children[static_cast<std::size_t>(j)];
      local[id] = j;
      const ObjectNode& obj = *target.find_object(id);
      oexist(0, j) = 1.0;
      cats.push_back(m.vocab.category_index(obj.category));
      for (int d = 0; d < D; ++d) feature(d, j) = obj.feature[static_cast<std::size_t>(d)];
      center.col(j) = obj.placement.center;
      scale.col(j) = obj.placement.scale;
      const AngleClass ac = nearest_angle_class(obj.placement.orientation);
      classes.push_back(ac.index);
      residual(0, j) = ac.residual;
      const VerticalFlags* vf = target.vertical_of(id);
      vertical(0, j) = vf && vf->align ? 1.0 : 0.0;
      vertical(1, j) = vf && vf->inside ? 1.0 : 0.0;
      hyper.push_back(lookup(labels, id));
    }
    add(g.bce_logits(o.exist, oexist), lb.existence);
    add(g.cross_entropy(g.cols(o.semantic, 0, n), cats), lb.semantic);
    if (D > 0) add(g.squared_error(g.cols(o.feature, 0, n), feature), lb.feature);
    const Var pc = g.cols(o.center, 0, n), ps = g.cols(o.scale, 0, n), po = g.cols(o.offset, 0, n);
    add(g.squared_error(pc, center), lb.placement);
    add(g.squared_error(ps, scale), lb.placement);
    add(g.cross_entropy(g.cols(o.rho, 0, n), classes), lb.placement);
    add(g.squared_error(po, residual), lb.placement);
    add(g.bce_logits(g.cols(o.vertical, 0, n), vertical), lb.vertical);
    add(g.cross_entropy(o.hyper, hyper), lb.hyper);
    if (n > 1) {
      Mat edges = Mat::Zero(kNumBinaryEdgeTypes, n * (n - 1) / 2);
      auto pair_col = [n](int a, int b) {
        if (a > b) std::swap(a, b);
        return a * n - a * (a + 1) / 2 + (b - a - 1);
      };
      for (const auto& e : target.edges.binary) {
        const auto ia = local.find(e.a), ib = local.find(e.b);
        if (ia == local.end() || ib == local.end()) continue;
        edges(static_cast<int>(e.type), pair_col(ia->second, ib->second)) = 1.0;
      }
      add(g.bce_logits(o.edges, edges), lb.edge);
    }

    for (int j = 0; j < n; ++j) {
      const std::string& id = region.children[static_cast<std::size_t>(j)];
      predicted.find_object(id)->placement = predicted_placement(g, o, j);
    }
    energy_inputs.insert(energy_inputs.end(), {pc, ps, po});
    energy_ids.push_back(region.children);
  }

  if (tc.energy_weight > 0.0) {
    EnergyOptions opts;
    opts.samples = tc.energy_samples;
    const EnergyReport rep = total_energy(predicted, opts);
    std::vector<Mat> grads;
    for (const auto& ids : energy_ids) {
      const auto n = static_cast<Eigen::Index>(ids.size());
      Mat gc(3, n), gs(3, n), go(1, n);
      for (Eigen::Index j = 0; j < n; ++j) {
        const Gradient7& gr = rep.gradient.at(ids[static_cast<std::size_t>(j)]);
        gc.col(j) = tc.energy_weight * gr.segment<3>(0);
        gs.col(j) = tc.energy_weight * gr.segment<3>(3);
        go(0, j) = tc.energy_weight * gr[6];
      }
      grads.push_back(gc);
      grads.push_back(gs);
      grads.push_back(go);
    }
    add(g.external(energy_inputs, tc.energy_weight * rep.total, std::move(grads)), lb.energy);
  }

  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = g.add(total, terms[i]);
  if (breakdown) *breakdown = lb;
  return total;
}

namespace {

Eigen::VectorXd normal_vector(int n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.normal();
  return v;
}

}  // namespace

LossBreakdown scene_loss(Model& m, const SceneHierarchy& input, const SceneHierarchy& target, const TrainConfig& tc,
                         std::uint64_t seed, bool backward) {
  const SceneHierarchy in = canonical_order(input, m.vocab);
  const SceneHierarchy tgt = canonical_order(target, m.vocab);
  const Eigen::VectorXd cond = scene_condition(in, m.config.condition_dim);
  Graph g;
  const EncoderVars enc = encoder(g, m, in, cond);
  const Var eps = g.constant(column(normal_vector(m.config.latent_dim, seed)));
  const Var z = g.add(enc.mu, g.mul(g.exp(g.scale(enc.logvar, 0.5)), eps));
  std::vector<int> counts;
  for (const auto& r : tgt.regions) counts.push_back(static_cast<int>(r.children.size()));
  const DecoderOutputs dec = decoder_outputs(g, m, z, g.constant(column(cond)), counts);
  LossBreakdown lb;
  Var loss = reconstruction_loss(g, dec, tgt, m, tc, &lb);
  if (tc.kl_weight > 0.0) {
    const Var kl = g.scale(g.kl_divergence(enc.mu, enc.logvar), tc.kl_weight);
    lb.kl = g.value(kl)(0, 0);
    loss = g.add(loss, kl);
  }
  if (backward) g.backward(loss);
  return lb;
}

TrainResult train(Model& m, const std::vector<SceneHierarchy>& corpus, const TrainConfig& tc) {
  tc.check();
  if (corpus.empty()) throw ConfigError("training corpus is empty");
  std::vector<SceneHierarchy> scenes;
  for (const auto& s : corpus) scenes.push_back(canonical_order(s, m.vocab));
  const int n = static_cast<int>(scenes.size());
  const int batch = std::min(tc.batch_size, n);

  Rng rng(tc.seed);
  std::vector<int> order = first_n(n);
  int pos = 0;
  TrainResult result;
  for (int step = 0; step < tc.steps; ++step) {
    m.params.zero_grad();
    double total = 0.0, recon = 0.0;
    for (int b = 0; b < batch; ++b) {
      if (pos == 0) {
        for (int i = n - 1; i > 0; --i) std::swap(order[static_cast<std::size_t>(i)], order[rng.below(i + 1)]);
      }
      const SceneHierarchy& target = scenes[static_cast<std::size_t>(order[static_cast<std::size_t>(pos)])];
      pos = (pos + 1) % n;
      SceneHierarchy input = target;
      if (tc.deletion_rate > 0.0 && rng.uniform() < tc.deletion_rate) {
        std::vector<std::string> removable;
        for (const auto& r : target.regions) {
          if (r.children.size() >= 2) removable.insert(removable.end(), r.children.begin(), r.children.end());
        }
        if (!removable.empty()) input = remove_object(target, removable[rng.below(removable.size())]);
      }
      const auto seed = mix_seed(tc.seed, static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(batch) + b);
      const LossBreakdown lb = scene_loss(m, input, target, tc, seed, true);
      total += lb.total();
      recon += lb.reconstruction();
    }
    total /= batch;
    recon /= batch;
    if (!std::isfinite(total)) throw TrainingError(step, "loss is not finite");
    for (auto* p : m.params.all()) {
      p->grad /= batch;
      if (!p->grad.allFinite()) throw TrainingError(step, "gradient of " + p->name + " is not finite");
    }
    nn::AdamConfig adam;
    adam.lr = tc.learning_rate * std::pow(tc.decay, step / tc.decay_steps);
    nn::adam_step(m.params, adam, step + 1);
    result.loss_curve.push_back(total);
    result.reconstruction_curve.push_back(recon);
  }
  return result;
}

Encoding encode_scene(const Model& m, const SceneHierarchy& scene, const Eigen::VectorXd& condition,
                      std::uint64_t seed) {
  Graph g;
  const EncoderVars enc = encoder(g, m, canonical_order(scene, m.vocab), condition);
  Encoding e;
  e.mu = g.value(enc.mu).col(0);
  e.logvar = g.value(enc.logvar).col(0);
  e.z = e.mu + (0.5 * e.logvar).array().exp().matrix().cwiseProduct(normal_vector(m.config.latent_dim, seed));
  return e;
}

SceneHierarchy decode_scene(const Model& m, const Eigen::VectorXd& z, const Eigen::VectorXd& condition,
                            const std::vector<Vec2>& floor, const std::string& room_id) {
  if (z.size() != m.config.latent_dim || condition.size() != m.config.condition_dim) {
    throw ConfigError("latent or condition size mismatch");
  }
  Graph g;
  const Var cond = g.constant(column(condition));
  const Var slots = region_slots(g, m, g.constant(column(z)), cond);
  const Var rexist = nn::dense(g, m.params, "dec.region_exist", slots);
  const Var rtype = nn::dense(g, m.params, "dec.region_type", slots);

  SceneHierarchy s;
  s.room_id = room_id;
  s.floor = floor;
  int region_no = 0;
  for (int k : surviving(g.value(rexist))) {
    RegionNode region;
    region.id = "region_" + std::to_string(region_no);
    region.region_type = static_cast<RegionType>(argmax_col(g.value(rtype), k));
    const Var children = object_slots(g, m, g.cols(slots, k, 1), cond);
    SlotOutputs o = object_heads(g, m, children);
    const std::vector<int> alive = surviving(g.value(o.exist));
    relation_heads(g, m, children, alive, o);

    const int n = static_cast<int>(alive.size());
    std::vector<std::string> ids;
    for (int j = 0; j < n; ++j) {
      const int slot = alive[static_cast<std::size_t>(j)];
      ObjectNode obj;
      obj.id = "obj_" + std::to_string(region_no) + "_" + std::to_string(j);
      obj.category = m.vocab.categories[static_cast<std::size_t>(argmax_col(g.value(o.semantic), slot))];
      obj.placement = predicted_placement(g, o, slot);
      for (int d = 0; d < m.config.object_feature_dim; ++d) obj.feature.push_back(g.value(o.feature)(d, slot));
      const Mat& vl = g.value(o.vertical);
      s.edges.vertical.push_back({obj.id, vl(0, slot) > 0.0, vl(1, slot) > 0.0});
      region.children.push_back(obj.id);
      ids.push_back(obj.id);
      s.objects.push_back(std::move(obj));
    }

    if (o.edges.id >= 0) {
      const Mat& el = g.value(o.edges);
      int col = 0;
      for (int a = 0; a < n; ++a) {
        for (int b = a + 1; b < n; ++b, ++col) {
          for (int t = 0; t < kNumBinaryEdgeTypes; ++t) {
            if (el(t, col) > 0.0) s.edges.binary.push_back({static_cast<BinaryEdgeType>(t), ids[a], ids[b]});
          }
        }
      }
    }

    // Row-argmax of the hyper mask; groups of three or more become edges.
    std::map<int, std::vector<int>> groups;
    for (int j = 0; j < n; ++j) {
      const int t = argmax_col(g.value(o.hyper), j);
      if (t > 0) groups[t].push_back(j);
    }
    for (const auto& [t, members] : groups) {
      if (members.size() < 3) continue;
      HyperEdge h;
      std::vector<Vec2> centers;
      for (int j : members) {
        h.members.push_back(ids[static_cast<std::size_t>(j)]);
        centers.push_back(ground(s.find_object(ids[static_cast<std::size_t>(j)])->placement.center));
      }
      Vec2 bary = Vec2::Zero();
      for (const auto& c : centers) bary += c;
      bary /= static_cast<double>(centers.size());
      if (t == 1) {
        h.type = HyperEdgeType::NFoldRotation;
        h.center = bary;
        h.fold = static_cast<int>(members.size());
        double reach = std::numeric_limits<double>::infinity();
        for (const auto& c : centers) reach = std::min(reach, (c - bary).norm());
        double best = 0.5 * reach;
        for (int j = 0; j < n; ++j) {
          if (std::find(members.begin(), members.end(), j) != members.end()) continue;
          const double d = (ground(s.find_object(ids[static_cast<std::size_t>(j)])->placement.center) - bary).norm();
          if (d < best) {
            best = d;
            h.hub = ids[static_cast<std::size_t>(j)];
          }
        }
      } else {
        h.type = HyperEdgeType::ParallelCollinear;
        h.direction = parallel_direction(centers);
        if (h.direction.squaredNorm() == 0.0) h.direction = Vec2(1.0, 0.0);
      }
      s.edges.hyper.push_back(std::move(h));
    }
    s.regions.push_back(std::move(region));
    ++region_no;
  }
  canonicalize_edges(s.edges, s);
  return s;
}

SceneHierarchy reconstruct(const Model& m, const SceneHierarchy& scene) {
  const Eigen::VectorXd cond = scene_condition(scene, m.config.condition_dim);
  return decode_scene(m, encode_scene(m, scene, cond, 0).mu, cond, scene.floor, scene.room_id);
}

SceneHierarchy complete(const Model& m, const SceneHierarchy& partial) { return reconstruct(m, partial); }

SceneHierarchy interpolate(const Model& m, const SceneHierarchy& a, const SceneHierarchy& b, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("interpolation parameter must lie in [0, 1]");
  const int cd = m.config.condition_dim;
  const Eigen::VectorXd ca = scene_condition(a, cd), cb = scene_condition(b, cd);
  const Eigen::VectorXd ma = encode_scene(m, a, ca, 0).mu, mb = encode_scene(m, b, cb, 0).mu;
  std::vector<Vec2> floor;
  if (t == 0.0 || b.floor.empty()) {
    floor = a.floor;
  } else if (t == 1.0 || a.floor.empty()) {
    floor = b.floor;
  } else {
    const FloorRing ra = register_ring(a.floor), rb = register_ring(b.floor);
    const DeformationFeatures f = (1.0 - t) * ring_to_features(ra) + t * ring_to_features(rb);
    const Vec2 anchor = (1.0 - t) * ra[0] + t * rb[0];
    floor = simplify_ring(features_to_ring(f, reference_ring(), 0, anchor));
  }
  return decode_scene(m, (1.0 - t) * ma + t * mb, (1.0 - t) * ca + t * cb, floor, "interpolated");
}

SceneHierarchy box_layout_to_scene(const Model& m, const SceneHierarchy& boxes, std::uint64_t seed) {
  SceneHierarchy s = boxes;
  s.edges = {};
  Rng rng(seed);
  for (auto& o : s.objects) {
    o.feature.assign(static_cast<std::size_t>(m.config.object_feature_dim), 0.0);
    for (auto& v : o.feature) v = rng.uniform(-1.0, 1.0);
  }
  const Eigen::VectorXd cond = scene_condition(s, m.config.condition_dim);
  const Encoding e = encode_scene(m, s, cond, mix_seed(seed, 1));
  return decode_scene(m, e.z, cond, s.floor, s.room_id);
}

// ---------------------------------------------------------------------------
// Checkpoints: "SHGNCKPT", u32 version, u32 length + config JSON, u32 tensor
// count, then per tensor u32 name length + name, u32 rows, u32 cols and
// rows * cols float64 values, row-major. All integers little-endian.

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'H', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : b_(bytes) {}
  std::uint64_t raw(int n) {
    if (pos_ + static_cast<std::size_t>(n) > b_.size()) throw ParseError("byte " + std::to_string(pos_), "truncated checkpoint");
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  double f64() { return std::bit_cast<double>(raw(8)); }
  std::string str(std::size_t n) {
    if (pos_ + n > b_.size()) throw ParseError("byte " + std::to_string(pos_), "truncated checkpoint");
    std::string s(b_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::string_view b_;
  std::size_t pos_ = 0;
};

Json config_json(const Model& m) {
  const ModelConfig& c = m.config;
  Json j;
  j["model"] = {{"feature_dim", c.feature_dim},       {"latent_dim", c.latent_dim},
                {"condition_dim", c.condition_dim},   {"max_children", c.max_children},
                {"mp_iterations", c.mp_iterations},   {"num_categories", c.num_categories},
                {"num_region_types", c.num_region_types}, {"hyper_types", c.hyper_types},
                {"object_feature_dim", c.object_feature_dim}};
  Json labels = Json::object();
  for (const auto& [k, v] : m.vocab.label_map) labels[k] = std::string(to_string(v));
  j["vocab"] = {{"categories", m.vocab.categories},
                {"feature_dim", m.vocab.feature_dim},
                {"label_map", labels},
                {"default_region", std::string(to_string(m.vocab.default_region))}};
  return j;
}

}  // namespace

std::string encode_checkpoint(const Model& m) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  put_u32(out, kCheckpointVersion);
  const std::string cfg = dump_json(config_json(m));
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out += cfg;
  const auto params = m.params.all();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out += p->name;
    put_u32(out, static_cast<std::uint32_t>(p->value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) put_f64(out, p->value(r, c));
    }
  }
  return out;
}

Model decode_checkpoint(std::string_view bytes) {
  Reader rd(bytes);
  if (rd.str(8) != std::string(kCheckpointMagic, 8)) throw ParseError("byte 0", "not a checkpoint (bad magic)");
  const std::uint32_t version = rd.u32();
  if (version != kCheckpointVersion) throw ParseError("byte 8", "unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t len = rd.u32();
  const Json j = parse_json(rd.str(len), "checkpoint config");
  ModelConfig c;
  SceneConfig vocab;
  try {
    const Json& mj = j.at("model");
    c.feature_dim = mj.at("feature_dim").get<int>();
    c.latent_dim = mj.at("latent_dim").get<int>();
    c.condition_dim = mj.at("condition_dim").get<int>();
    c.max_children = mj.at("max_children").get<int>();
    c.mp_iterations = mj.at("mp_iterations").get<int>();
    c.num_categories = mj.at("num_categories").get<int>();
    c.num_region_types = mj.at("num_region_types").get<int>();
    c.hyper_types = mj.at("hyper_types").get<int>();
    c.object_feature_dim = mj.at("object_feature_dim").get<int>();
    const Json& vj = j.at("vocab");
    vocab.categories = vj.at("categories").get<std::vector<std::string>>();
    vocab.feature_dim = vj.at("feature_dim").get<int>();
    for (const auto& [k, v] : vj.at("label_map").items()) {
      const auto t = parse_region_type(v.get<std::string>());
      if (!t) throw ParseError("checkpoint config", "unknown region type " + v.get<std::string>());
      vocab.label_map[k] = *t;
    }
    const auto d = parse_region_type(vj.at("default_region").get<std::string>());
    if (!d) throw ParseError("checkpoint config", "unknown default region");
    vocab.default_region = *d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint config", e.what());
  }
  Model m(c, vocab, 0);
  const std::uint32_t count = rd.u32();
  if (count != m.params.all().size()) throw ParseError("byte " + std::to_string(rd.pos()), "tensor count mismatch");
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = rd.str(rd.u32());
    if (!m.params.contains(name)) throw ParseError("byte " + std::to_string(rd.pos()), "unknown tensor " + name);
    nn::Parameter& p = m.params.get(name);
    const std::uint32_t rows = rd.u32(), cols = rd.u32();
    if (rows != p.value.rows() || cols != p.value.cols()) {
      throw ParseError("byte " + std::to_string(rd.pos()), "shape mismatch for " + name);
    }
    for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
      for (Eigen::Index k = 0; k < p.value.cols(); ++k) p.value(r, k) = rd.f64();
    }
  }
  if (!rd.done()) throw ParseError("byte " + std::to_string(rd.pos()), "trailing bytes after checkpoint");
  return m;
}

void save_checkpoint(const std::string& path, const Model& m) { write_text_file(path, encode_checkpoint(m)); }

Model load_checkpoint(const std::string& path) { return decode_checkpoint(read_text_file(path)); }

}  // namespace scenehgn
