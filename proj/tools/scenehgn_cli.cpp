#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "scenehgn/detect.hpp"
#include "scenehgn/energy.hpp"
#include "scenehgn/errors.hpp"
#include "scenehgn/floor.hpp"
#include "scenehgn/layout_opt.hpp"
#include "scenehgn/metrics.hpp"
#include "scenehgn/regions.hpp"
#include "scenehgn/render.hpp"
#include "scenehgn/rng.hpp"
#include "scenehgn/rvnn.hpp"
#include "scenehgn/serialize.hpp"
#include "scenehgn/synth.hpp"

namespace fs = std::filesystem;
using namespace scenehgn;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  std::string config;
  bool quiet = false;
  SceneConfig vocab;
};

/// Scene validation failed; exit code 1.
struct InvalidScene : Error {
  using Error::Error;
};

void say(const Globals& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

SceneHierarchy read_scene(const Globals& g, const std::string& path) {
  SceneHierarchy s = load_scene(path);
  const auto issues = validate(s, g.vocab);
  if (!issues.empty()) {
    for (const auto& v : issues) std::cerr << path << ": " << v.node << ": " << v.rule << ": " << v.message << "\n";
    throw InvalidScene(path + " failed validation");
  }
  return s;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

std::vector<SceneHierarchy> read_corpus(const Globals& g, const std::string& dir) {
  std::vector<std::string> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec)) {
    if (e.path().extension() == ".json" && e.path().filename() != "ground_truth.json") files.push_back(e.path().string());
  }
  if (ec) throw IoError("cannot read directory " + dir + ": " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<SceneHierarchy> out;
  for (const auto& f : files) out.push_back(read_scene(g, f));
  if (out.empty()) throw IoError("no scene files in " + dir);
  return out;
}

Json ring_json(const std::vector<Vec2>& pts) {
  Json a = Json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

Json explain_edges(const SceneHierarchy& s) {
  Json binary = Json::array();
  for (const auto& e : s.edges.binary) {
    binary.push_back({{"type", std::string(to_string(e.type))},
                      {"a", e.a},
                      {"b", e.b},
                      {"residual", binary_symmetry_residual(e, s)}});
  }
  Json hyper = Json::array();
  for (const auto& h : s.edges.hyper) {
    std::vector<PlacementParams> members;
    for (const auto& id : h.members) members.push_back(s.find_object(id)->placement);
    Json e{{"type", std::string(to_string(h.type))}, {"members", h.members}};
    if (h.type == HyperEdgeType::NFoldRotation) {
      e["residual"] = hyper_rotation_loss(members);
    } else {
      const ParallelLoss l = hyper_parallel_loss(members);
      e["residual"] = l.total();
      e["line"] = l.line;
    }
    hyper.push_back(e);
  }
  return Json{{"binary", binary}, {"hyper", hyper}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical indoor scene toolkit"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config, "Scene vocabulary config JSON");
  app.add_flag("--quiet", g.quiet, "Suppress progress messages");

  std::string in, in2, out, extra;

  // detect
  auto* detect = app.add_subcommand("detect", "Detect binary, hyper and room-object relations");
  std::string thresholds;
  detect->add_option("scene", in, "Scene JSON")->required();
  detect->add_option("-o,--output", out, "Output scene JSON (default stdout)");
  detect->add_option("--thresholds", thresholds, "Detection thresholds JSON");
  std::string explain_path;
  detect->add_option("--explain", explain_path, "Write per-edge residuals JSON to this path");

  // regions
  auto* regions = app.add_subcommand("regions", "Cluster objects into functional regions");
  ClusterParams cluster;
  regions->add_option("scene", in, "Scene JSON")->required();
  regions->add_option("-o,--output", out, "Output scene JSON");
  regions->add_option("--eps", cluster.eps, "DBSCAN radius (m)");
  regions->add_option("--min-pts", cluster.min_pts, "DBSCAN core count");
  regions->add_option("--samples", cluster.samples_per_object, "Surface samples per object");
  std::string label_map_path, override_path;
  regions->add_option("--label-map", label_map_path, "JSON object mapping category to region type");
  regions->add_option("--override", override_path, "Regions JSON array replacing the extracted regions");

  // floor
  auto* floor = app.add_subcommand("floor", "Floor boundary codec");
  floor->require_subcommand(1);
  auto* floor_encode = floor->add_subcommand("encode", "Scene floor to deformation features");
  floor_encode->add_option("scene", in, "Scene JSON")->required();
  floor_encode->add_option("-o,--output", out, "Feature file")->required();
  auto* floor_decode = floor->add_subcommand("decode", "Deformation features to a polygon");
  floor_decode->add_option("features", in, "Feature file")->required();
  floor_decode->add_option("-o,--output", out, "Polygon JSON");
  auto* floor_condition = floor->add_subcommand("condition", "Pooled condition vector of a scene floor");
  int condition_dim = 32;
  floor_condition->add_option("scene", in, "Scene JSON")->required();
  floor_condition->add_option("--dim", condition_dim, "Condition size");

  // energy
  auto* energy = app.add_subcommand("energy", "Evaluate the relational energy");
  std::string weights_path;
  energy->add_option("scene", in, "Scene JSON")->required();
  energy->add_option("--weights", weights_path, "Energy weights JSON");

  // optimize
  auto* optimize = app.add_subcommand("optimize", "Refine a layout, optionally propagating edits");
  OptimizerConfig opt;
  std::string edits_path, trace_path;
  optimize->add_option("scene", in, "Scene JSON")->required();
  optimize->add_option("-o,--output", out, "Output scene JSON");
  optimize->add_option("--edits", edits_path, "Edits JSON");
  optimize->add_option("--trace", trace_path, "Energy trace CSV");
  optimize->add_option("--weights", weights_path, "Energy weights JSON");
  optimize->add_option("--max-iterations", opt.max_iterations, "Iteration cap");
  optimize->add_option("--step", opt.step, "Adam step size");

  // rvnn
  auto* rvnn = app.add_subcommand("rvnn", "Recursive VAE");
  rvnn->require_subcommand(1);
  TrainConfig train_cfg;
  ModelConfig model_cfg;
  std::string model_path;
  double t_interp = 0.5;
  auto* rv_train = rvnn->add_subcommand("train", "Train on a corpus directory");
  rv_train->add_option("corpus", in, "Directory of scene JSON files")->required();
  rv_train->add_option("-o,--output", model_path, "Checkpoint path")->required();
  rv_train->add_option("--steps", train_cfg.steps, "Training steps");
  rv_train->add_option("--batch", train_cfg.batch_size, "Batch size");
  rv_train->add_option("--lr", train_cfg.learning_rate, "Learning rate");
  rv_train->add_option("--deletion-rate", train_cfg.deletion_rate, "Share of inputs with one object removed");
  rv_train->add_option("--feature-dim", model_cfg.feature_dim, "Code size");
  rv_train->add_option("--latent-dim", model_cfg.latent_dim, "Latent size");
  rv_train->add_option("--curve", extra, "Loss curve CSV");
  auto* rv_recon = rvnn->add_subcommand("reconstruct", "Encode and decode a scene");
  auto* rv_interp = rvnn->add_subcommand("interpolate", "Decode a latent interpolation");
  auto* rv_complete = rvnn->add_subcommand("complete", "Complete a partial scene");
  auto* rv_box = rvnn->add_subcommand("boxgen", "Scene from a box layout");
  for (auto* c : {rv_recon, rv_interp, rv_complete, rv_box}) {
    c->add_option("model", model_path, "Checkpoint")->required();
    c->add_option("scene", in, "Scene JSON")->required();
    c->add_option("-o,--output", out, "Output scene JSON");
  }
  rv_interp->add_option("target", in2, "Second scene JSON")->required();
  rv_interp->add_option("-t", t_interp, "Interpolation weight in [0, 1]");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compare two corpora");
  std::vector<std::string> pairs;
  std::string formula = "default", heatmap_dir;
  metrics->add_option("corpus_a", in, "Directory")->required();
  metrics->add_option("corpus_b", in2, "Directory")->required();
  metrics->add_option("-o,--output", out, "Report JSON");
  metrics->add_option("--pair", pairs, "Heatmap pair category_a,category_b");
  metrics->add_option("--orientation-formula", formula, "default or literal")
      ->check(CLI::IsMember({"default", "literal"}));
  metrics->add_option("--heatmap-dir", heatmap_dir, "Where to write PGM and raw grids");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with planted relations");
  int count = 10;
  double sigma_pos = 0.0, sigma_yaw = 0.0;
  synth->add_option("-n,--count", count, "Number of scenes");
  synth->add_option("-o,--output", out, "Output directory")->required();
  synth->add_option("--sigma-pos", sigma_pos, "Center noise (m)");
  synth->add_option("--sigma-yaw", sigma_yaw, "Yaw noise (rad)");

  // render
  auto* render = app.add_subcommand("render", "Top-down SVG");
  render->add_option("scene", in, "Scene JSON")->required();
  render->add_option("-o,--output", out, "SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    g.vocab = g.config.empty() ? default_config() : load_config(g.config);

    if (*detect) {
      const DetectionThresholds th = thresholds.empty() ? DetectionThresholds{} : load_thresholds(thresholds);
      const SceneHierarchy s = detect_relations(read_scene(g, in), th);
      if (!explain_path.empty()) write_text_file(explain_path, dump_json(explain_edges(s)));
      emit(out, serialize_scene(s));
    } else if (*regions) {
      if (!label_map_path.empty()) {
        for (const auto& [cat, type] : parse_json(read_text_file(label_map_path), label_map_path).items()) {
          const auto t = parse_region_type(type.get<std::string>());
          if (!t) throw ConfigError("unknown region type for " + cat);
          g.vocab.label_map[cat] = *t;
        }
      }
      SceneHierarchy s = read_scene(g, in);
      if (override_path.empty()) {
        s = assign_regions(s, cluster, g.vocab);
      } else {
        Json j = scene_to_json(s);
        j["regions"] = parse_json(read_text_file(override_path), override_path);
        s = scene_from_json(j);
        if (!validate(s, g.vocab).empty()) throw InvalidScene("override regions do not form a valid hierarchy");
      }
      emit(out, serialize_scene(s));
    } else if (*floor_encode) {
      const SceneHierarchy s = load_scene(in);
      write_features(out, ring_to_features(register_ring(s.floor)));
      say(g, "wrote " + std::to_string(kRingSize) + " feature rows to " + out);
    } else if (*floor_decode) {
      const FloorRing ring = features_to_ring(read_features(in));
      emit(out, dump_json(Json{{"ring", ring_json(ring)}, {"polygon", ring_json(simplify_ring(ring))}}));
    } else if (*floor_condition) {
      const SceneHierarchy s = load_scene(in);
      const Eigen::VectorXd c = pool_condition(ring_to_features(register_ring(s.floor)), condition_dim);
      emit(out, dump_json(Json(std::vector<double>(c.data(), c.data() + c.size()))));
    } else if (*energy) {
      EnergyOptions o;
      if (!weights_path.empty()) o.weights = load_weights(weights_path);
      const EnergyReport r = total_energy(read_scene(g, in), o);
      Json terms = Json::object();
      for (const auto& name : energy_term_names()) terms[name] = r.terms.at(name);
      Json grad = Json::object();
      for (const auto& [id, gv] : r.gradient) grad[id] = std::vector<double>(gv.data(), gv.data() + 7);
      emit(out, dump_json(Json{{"terms", terms}, {"total", r.total}, {"gradient", grad}}));
    } else if (*optimize) {
      const SceneHierarchy s = read_scene(g, in);
      const EnergyWeights w = weights_path.empty() ? EnergyWeights{} : load_weights(weights_path);
      const RefineResult r = edits_path.empty() ? refine(s, {}, opt, w) : edit_propagate(s, load_edits(edits_path, s), opt, w);
      for (const auto& warn : r.warnings) say(g, "warning: " + warn);
      if (!trace_path.empty()) write_text_file(trace_path, trace_csv(r.trace));
      say(g, "energy " + std::to_string(r.trace.front().total) + " -> " + std::to_string(r.trace.back().total) +
                 " in " + std::to_string(r.trace.size() - 1) + " steps");
      emit(out, serialize_scene(r.scene));
    } else if (*rv_train) {
      const auto corpus = read_corpus(g, in);
      model_cfg.num_categories = static_cast<int>(g.vocab.categories.size());
      model_cfg.object_feature_dim = g.vocab.feature_dim;
      train_cfg.seed = g.seed;
      Model m(model_cfg, g.vocab, g.seed);
      const TrainResult r = train(m, corpus, train_cfg);
      save_checkpoint(model_path, m);
      if (!extra.empty()) {
        std::string csv = "step,total,reconstruction\n";
        char buf[96];
        for (std::size_t i = 0; i < r.loss_curve.size(); ++i) {
          std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", i, r.loss_curve[i], r.reconstruction_curve[i]);
          csv += buf;
        }
        write_text_file(extra, csv);
      }
      if (!r.loss_curve.empty()) {
        say(g, "reconstruction loss " + std::to_string(r.reconstruction_curve.front()) + " -> " +
                   std::to_string(r.reconstruction_curve.back()));
      }
    } else if (*rv_recon || *rv_interp || *rv_complete || *rv_box) {
      const Model m = load_checkpoint(model_path);
      const SceneHierarchy s = read_scene(g, in);
      SceneHierarchy r;
      if (*rv_recon) r = reconstruct(m, s);
      if (*rv_interp) r = interpolate(m, s, read_scene(g, in2), t_interp);
      if (*rv_complete) r = complete(m, s);
      if (*rv_box) r = box_layout_to_scene(m, s, g.seed);
      emit(out, serialize_scene(r));
    } else if (*metrics) {
      const auto a = read_corpus(g, in), b = read_corpus(g, in2);
      const OrientationFormula f = formula == "literal" ? OrientationFormula::Literal : OrientationFormula::Default;
      std::vector<std::string> warnings;
      Json report{{"o1", o1(a, b, g.vocab)},
                  {"o2", o2(a, b, g.vocab, &warnings)},
                  {"o3", o3(a, b, g.vocab, &warnings)},
                  {"orientation_a", orientation_score(a, f)},
                  {"orientation_b", orientation_score(b, f)},
                  {"orientation_formula", formula}};
      Json maps = Json::array();
      for (const auto& p : pairs) {
        const auto comma = p.find(',');
        if (comma == std::string::npos) throw ConfigError("--pair expects category_a,category_b");
        const std::string ca = p.substr(0, comma), cb = p.substr(comma + 1);
        for (const auto* c : {&ca, &cb}) {
          if (g.vocab.category_index(*c) < 0) throw ConfigError("unknown category " + *c);
        }
        Json entry{{"a", ca}, {"b", cb}};
        for (const auto& [label, corpus] : {std::pair{"a", &a}, std::pair{"b", &b}}) {
          const OffsetHeatmap h = o4_heatmap(*corpus, ca, cb);
          entry[std::string("count_") + label] = h.total();
          if (!heatmap_dir.empty()) {
            fs::create_directories(heatmap_dir);
            const std::string stem = (fs::path(heatmap_dir) / (ca + "__" + cb + "_" + label)).string();
            write_text_file(stem + ".pgm", heatmap_pgm(h));
            write_text_file(stem + ".u32", heatmap_raw(h));
          }
        }
        maps.push_back(entry);
      }
      report["heatmaps"] = maps;
      report["warnings"] = warnings;
      emit(out, dump_json(report));
    } else if (*synth) {
      auto corpus = gen_corpus(count, g.seed);
      if (sigma_pos > 0.0 || sigma_yaw > 0.0) {
        for (std::size_t i = 0; i < corpus.size(); ++i) {
          corpus[i].scene = perturb(corpus[i].scene, sigma_pos, sigma_yaw, mix_seed(g.seed, 1000 + i));
        }
      }
      write_corpus(out, corpus);
      say(g, "wrote " + std::to_string(corpus.size()) + " scenes to " + out);
    } else if (*render) {
      const std::string svg = render_svg(read_scene(g, in), g.vocab);
      emit(out, svg);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
