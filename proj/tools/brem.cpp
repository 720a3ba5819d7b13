// Command-line front end: corpus generation, label maps, evaluation, the
// oracle experiment, ablation sweeps, the inference pipeline and gradient checks.
//
// Data goes to the files named by --out; diagnostics go to stderr. Every output
// is accompanied by a manifest (<out>.manifest.json, or manifest.json inside an
// output directory) recording the resolved options.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "brem/brem.hpp"

namespace fs = std::filesystem;
using brem::io::json;

namespace {

constexpr const char* kToolName = "brem";

struct Globals {
  std::uint64_t seed = 0;
};

std::string join(const std::vector<std::string>& v, const char* sep) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) out += (k ? sep : "") + v[k];
  return out;
}

json resolved_options(const CLI::App& app) {
  json cfg = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->get_type_size() == 0) {
      cfg[name] = opt->count() > 0;
    } else {
      cfg[name] = opt->count() ? join(opt->results(), ",") : opt->get_default_str();
    }
  }
  return cfg;
}

void write_manifest(const fs::path& path, const CLI::App& sub, const Globals& g,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json m = {{"tool", kToolName},
            {"version", BREM_VERSION},
            {"subcommand", sub.get_name()},
            {"seed", g.seed},
            {"config", resolved_options(sub)},
            {"inputs", inputs},
            {"outputs", outputs}};
  brem::io::write_text(path, m.dump(2) + "\n");
}

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  for (const auto& part : brem::split(s, ',')) out.push_back(brem::parse_number(part));
  return out;
}

// Options shared by subcommands that score detections.
struct InferenceOptions {
  std::string anchor_set = "1,50,20";
  double tau = 2.0;
  double nms_threshold = 0.5;
  std::string nms_decay = "linear";
  double nms_sigma = 0.5;
  bool per_class_nms = false;
  double score_floor = 1e-4;
  std::size_t bem_samples = brem::kDefaultSamplesPerAnchor;

  void add_to(CLI::App* app) {
    app->add_option("--anchor-set", anchor_set, "Anchor scales: rmin,rmax,count or a single r")->capture_default_str();
    app->add_option("--tau", tau, "Duration-to-scale mapping coefficient")->capture_default_str();
    app->add_option("--nms-threshold", nms_threshold, "Soft-NMS tIoU threshold")->capture_default_str();
    app->add_option("--nms-decay", nms_decay, "Soft-NMS decay: linear|gaussian")
        ->check(CLI::IsMember({"linear", "gaussian"}))
        ->capture_default_str();
    app->add_option("--nms-sigma", nms_sigma, "Gaussian Soft-NMS sigma")->capture_default_str();
    app->add_flag("--per-class-nms", per_class_nms, "Run Soft-NMS separately per class");
    app->add_option("--score-floor", score_floor, "Drop detections scoring below this")->capture_default_str();
    app->add_option("--bem-samples", bem_samples, "Samples per anchor (N)")->capture_default_str();
  }

  brem::InferenceConfig resolve() const {
    brem::InferenceConfig cfg;
    cfg.scale_set = brem::parse_anchor_set(anchor_set);
    cfg.tau = tau;
    cfg.nms_threshold = nms_threshold;
    cfg.nms.decay = brem::parse_nms_decay(nms_decay);
    cfg.nms.gaussian_sigma = nms_sigma;
    cfg.nms.per_class = per_class_nms;
    cfg.score_floor = score_floor;
    cfg.validate();
    return cfg;
  }
};

std::vector<std::string> map_header(const std::vector<double>& thresholds, const char* first) {
  std::vector<std::string> h{first};
  for (double t : thresholds) h.push_back("mAP@" + brem::io::format_fixed(t, 2));
  h.push_back("average");
  return h;
}

std::vector<std::string> map_row(const std::string& name, const brem::MapTable& t) {
  std::vector<std::string> r{name};
  for (double v : t.map) r.push_back(brem::io::format_fixed(v));
  r.push_back(brem::io::format_fixed(t.average_map));
  return r;
}

struct EvalInputs {
  std::string annotations;
  std::string detections;
  std::string thresholds = "0.3,0.4,0.5,0.6,0.7";
  std::string ap_mode = "all-point";

  void add_to(CLI::App* app) {
    app->add_option("--annotations", annotations, "Annotation JSON")->required();
    app->add_option("--detections", detections, "Detection JSON")->required();
    app->add_option("--thresholds", thresholds, "Comma-separated tIoU thresholds")->capture_default_str();
    app->add_option("--ap-mode", ap_mode, "AP interpolation: all-point|11-point")
        ->check(CLI::IsMember({"all-point", "11-point"}))
        ->capture_default_str();
  }

  brem::EvalProtocol protocol() const {
    brem::EvalProtocol p;
    p.thresholds = parse_thresholds(thresholds);
    p.interpolation = ap_mode == "11-point" ? brem::ApInterpolation::ElevenPoint : brem::ApInterpolation::AllPoint;
    p.validate();
    return p;
  }

  std::pair<brem::Corpus, brem::DetectionSet> load(bool require_known_videos) const {
    auto corpus = brem::io::annotations_from_json(brem::io::load_json(annotations), annotations);
    std::size_t dropped = 0;
    auto dets = brem::io::detections_from_json(brem::io::load_json(detections), corpus.classes, detections, &dropped);
    if (dropped) std::cerr << "warning: ignored " << dropped << " detections with labels outside the class set\n";
    if (require_known_videos) {
      for (const auto& [id, list] : dets) {
        if (!corpus.find(id)) throw brem::io::SchemaError(detections + ": video '" + id + "' has no annotation");
      }
    }
    return {std::move(corpus), std::move(dets)};
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Boundary and region quality estimation for temporal action detection"};
  app.set_version_flag("--version", std::string(kToolName) + " " + BREM_VERSION);
  app.set_config("--config", "", "Key-value config file mirroring the flags; command-line flags win");
  app.require_subcommand(1);

  Globals globals;
  app.add_option("--seed", globals.seed, "Seed for every random stream")->capture_default_str();

  // corpus ------------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "Generate a seeded synthetic corpus");
  brem::CorpusConfig corpus_cfg;
  brem::NoiseConfig noise_cfg;
  std::string jitter_mode = "proportional";
  std::string corpus_out, corpus_dets, corpus_preds;
  brem::PredictionNoise pred_noise;
  std::string pred_strides = "1,2,4";
  corpus_cmd->add_option("--videos", corpus_cfg.videos, "Number of videos")->capture_default_str();
  corpus_cmd->add_option("--classes", corpus_cfg.classes, "Number of classes")->capture_default_str();
  corpus_cmd->add_option("--duration-min", corpus_cfg.duration_min, "Shortest video (s)")->capture_default_str();
  corpus_cmd->add_option("--duration-max", corpus_cfg.duration_max, "Longest video (s)")->capture_default_str();
  corpus_cmd->add_option("--actions-min", corpus_cfg.actions_min, "Fewest actions per video")->capture_default_str();
  corpus_cmd->add_option("--actions-max", corpus_cfg.actions_max, "Most actions per video")->capture_default_str();
  corpus_cmd->add_option("--length-min", corpus_cfg.length_min, "Shortest action (s, log-uniform)")->capture_default_str();
  corpus_cmd->add_option("--length-max", corpus_cfg.length_max, "Longest action (s, log-uniform)")->capture_default_str();
  corpus_cmd->add_option("--fps", corpus_cfg.fps, "Frames per second")->capture_default_str();
  corpus_cmd->add_option("--out", corpus_out, "Annotation JSON to write")->required();
  corpus_cmd->add_option("--detections", corpus_dets, "Also write noisy detections here");
  corpus_cmd->add_option("--predictions", corpus_preds, "Also write synthetic head predictions here");
  corpus_cmd->add_option("--jitter", noise_cfg.boundary_jitter, "Boundary jitter std-dev")->capture_default_str();
  corpus_cmd->add_option("--jitter-mode", jitter_mode, "absolute|proportional")
      ->check(CLI::IsMember({"absolute", "proportional"}))
      ->capture_default_str();
  corpus_cmd->add_option("--score-noise", noise_cfg.score_noise, "Score noise std-dev")->capture_default_str();
  corpus_cmd->add_option("--fp-rate", noise_cfg.false_positive_rate, "False positives per action")->capture_default_str();
  corpus_cmd->add_option("--miss-rate", noise_cfg.miss_rate, "Probability an action is missed")->capture_default_str();
  corpus_cmd->add_option("--proposals-per-gt", noise_cfg.proposals_per_gt, "Detections per action")->capture_default_str();
  corpus_cmd->add_option("--pyramid-strides", pred_strides, "Strides of the prediction pyramid")->capture_default_str();

  // label-maps --------------------------------------------------------------
  auto* maps_cmd = app.add_subcommand("label-maps", "Write multi-scale boundary quality label maps");
  std::string maps_annotations, maps_out, maps_format = "csv", maps_anchor = "1,50,20";
  maps_cmd->add_option("--annotations", maps_annotations, "Annotation JSON")->required();
  maps_cmd->add_option("--anchor-set", maps_anchor, "rmin,rmax,count or a single r")->capture_default_str();
  maps_cmd->add_option("--out", maps_out, "Output directory")->required();
  maps_cmd->add_option("--format", maps_format, "csv|bin")->check(CLI::IsMember({"csv", "bin"}))->capture_default_str();

  // eval --------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP and mAP table");
  EvalInputs eval_in;
  std::string eval_out;
  eval_in.add_to(eval_cmd);
  eval_cmd->add_option("--out", eval_out, "CSV to write")->required();

  // oracle ------------------------------------------------------------------
  auto* oracle_cmd = app.add_subcommand("oracle", "mAP with raw scores versus tIoU-oracle scores");
  EvalInputs oracle_in;
  std::string oracle_out;
  oracle_in.add_to(oracle_cmd);
  oracle_cmd->add_option("--out", oracle_out, "CSV to write")->required();

  // sweep -------------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "mAP over a parameter grid");
  EvalInputs sweep_in;
  InferenceOptions sweep_inf;
  std::string sweep_kind, sweep_grid, sweep_out;
  std::size_t sweep_channels = 4;
  sweep_in.add_to(sweep_cmd);
  sweep_inf.add_to(sweep_cmd);
  sweep_cmd->add_option("--sweep", sweep_kind, "tau|anchor-set|nms|reduction")
      ->check(CLI::IsMember({"tau", "anchor-set", "nms", "reduction"}))
      ->required();
  sweep_cmd->add_option("--grid", sweep_grid, "Values (',' separated; anchor sets ';' separated)")->required();
  sweep_cmd->add_option("--channels", sweep_channels, "Feature channels for reduction sweeps")->capture_default_str();
  sweep_cmd->add_option("--out", sweep_out, "CSV to write")->required();

  // pipeline ----------------------------------------------------------------
  auto* pipe_cmd = app.add_subcommand("pipeline", "Decode, refine, rescore and suppress head predictions");
  InferenceOptions pipe_inf;
  std::string pipe_preds, pipe_annotations, pipe_out, pipe_quality = "labels", pipe_params;
  std::size_t pipe_channels = 4;
  pipe_inf.add_to(pipe_cmd);
  pipe_cmd->add_option("--predictions", pipe_preds, "Prediction JSON")->required();
  pipe_cmd->add_option("--annotations", pipe_annotations, "Annotation JSON (durations, fps, label maps)")->required();
  pipe_cmd->add_option("--quality", pipe_quality, "Boundary quality source: labels|bem")
      ->check(CLI::IsMember({"labels", "bem"}))
      ->capture_default_str();
  pipe_cmd->add_option("--params", pipe_params, "BEM head tensor JSON, or 'random' for seeded weights");
  pipe_cmd->add_option("--channels", pipe_channels, "Synthetic feature channels for --quality bem")->capture_default_str();
  pipe_cmd->add_option("--out", pipe_out, "Detection JSON to write")->required();

  // gradcheck ---------------------------------------------------------------
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  brem::GradCheckOptions grad_opt;
  std::string grad_out;
  grad_cmd->add_option("--points", grad_opt.points, "Random points per loss")->capture_default_str();
  grad_cmd->add_option("--out", grad_out, "CSV to write")->required();
  grad_cmd->add_flag("--inject-wrong-sign", grad_opt.inject_wrong_sign, "Test hook: negate analytic gradients")
      ->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*corpus_cmd) {
      corpus_cfg.seed = globals.seed;
      noise_cfg.seed = globals.seed;
      noise_cfg.jitter_mode = jitter_mode == "absolute" ? brem::JitterMode::Absolute : brem::JitterMode::Proportional;
      const auto corpus = brem::generate_ground_truth(corpus_cfg);
      brem::io::write_text(corpus_out, brem::io::annotations_to_json(corpus).dump(2) + "\n");
      std::vector<std::string> outputs{corpus_out};
      if (!corpus_dets.empty()) {
        const auto dets = brem::generate_noisy_detections(corpus, noise_cfg);
        brem::io::write_text(corpus_dets, brem::io::detections_to_json(dets, corpus.classes).dump(2) + "\n");
        outputs.push_back(corpus_dets);
      }
      if (!corpus_preds.empty()) {
        brem::PyramidConfig pyramid{parse_thresholds(pred_strides)};
        pred_noise.seed = globals.seed;
        std::map<std::string, std::vector<brem::LevelPredictions>> preds;
        for (std::size_t v = 0; v < corpus.videos.size(); ++v) {
          preds[corpus.videos[v].id] = brem::generate_location_predictions(
              corpus.videos[v], corpus.classes.size(), pyramid, brem::LevelRanges{}, pred_noise, v);
        }
        brem::io::write_text(corpus_preds, brem::io::predictions_to_json(preds, pyramid).dump() + "\n");
        outputs.push_back(corpus_preds);
      }
      write_manifest(manifest_for_file(corpus_out), *corpus_cmd, globals, {}, outputs);
    } else if (*maps_cmd) {
      const auto corpus = brem::io::annotations_from_json(brem::io::load_json(maps_annotations), maps_annotations);
      const auto scales = brem::parse_anchor_set(maps_anchor);
      std::vector<std::string> outputs;
      if (corpus.videos.empty()) {
        std::cerr << "label-maps: corpus has no videos, nothing written\n";
        return 0;
      }
      fs::create_directories(maps_out);
      for (const auto& video : corpus.videos) {
        const auto maps = brem::multi_scale_quality_maps(video.actions_in_frames(), video.frame_count(), scales);
        for (auto side : {brem::BoundarySide::Start, brem::BoundarySide::End}) {
          const fs::path p = fs::path(maps_out) / (video.id + (side == brem::BoundarySide::Start ? "_start." : "_end.") +
                                                   maps_format);
          brem::io::write_text(p, maps_format == "csv" ? brem::io::matrix_to_csv(maps.side(side))
                                                       : brem::io::matrix_to_binary(maps.side(side)));
          outputs.push_back(p.string());
        }
      }
      write_manifest(fs::path(maps_out) / "manifest.json", *maps_cmd, globals, {maps_annotations}, outputs);
    } else if (*eval_cmd) {
      const auto [corpus, dets] = eval_in.load(false);
      const auto protocol = eval_in.protocol();
      const auto table = brem::map_table(dets, corpus, protocol);
      brem::io::CsvTable csv(map_header(protocol.thresholds, "class"));
      for (std::size_t ci = 0; ci < table.classes.size(); ++ci) {
        std::vector<std::string> row{corpus.classes[static_cast<std::size_t>(table.classes[ci])]};
        double sum = 0.0;
        for (std::size_t k = 0; k < protocol.thresholds.size(); ++k) {
          row.push_back(brem::io::format_fixed(table.ap(ci, k)));
          sum += table.ap(ci, k);
        }
        row.push_back(brem::io::format_fixed(sum / static_cast<double>(protocol.thresholds.size())));
        csv.add_row(row);
      }
      csv.add_row(map_row("mAP", table));
      brem::io::write_text(eval_out, csv.str());
      write_manifest(manifest_for_file(eval_out), *eval_cmd, globals, {eval_in.annotations, eval_in.detections},
                     {eval_out});
    } else if (*oracle_cmd) {
      const auto [corpus, dets] = oracle_in.load(true);
      const auto protocol = oracle_in.protocol();
      const auto result = brem::oracle_experiment(dets, corpus, protocol);
      brem::io::CsvTable csv(map_header(protocol.thresholds, "scores"));
      csv.add_row(map_row("raw", result.raw));
      csv.add_row(map_row("oracle", result.oracle));
      brem::io::write_text(oracle_out, csv.str());
      write_manifest(manifest_for_file(oracle_out), *oracle_cmd, globals,
                     {oracle_in.annotations, oracle_in.detections}, {oracle_out});
    } else if (*sweep_cmd) {
      const auto [corpus, dets] = sweep_in.load(true);
      const auto protocol = sweep_in.protocol();
      brem::RescoreConfig base;
      base.inference = sweep_inf.resolve();
      base.bem_samples = sweep_inf.bem_samples;
      base.feature_channels = sweep_channels;
      base.seed = globals.seed;
      const auto rows = brem::run_sweep(dets, corpus, brem::parse_sweep_kind(sweep_kind), sweep_grid, base, protocol);
      brem::io::CsvTable csv(map_header(protocol.thresholds, sweep_kind.c_str()));
      for (const auto& r : rows) csv.add_row(map_row(r.parameter, r.table));
      brem::io::write_text(sweep_out, csv.str());
      write_manifest(manifest_for_file(sweep_out), *sweep_cmd, globals, {sweep_in.annotations, sweep_in.detections},
                     {sweep_out});
    } else if (*pipe_cmd) {
      const auto corpus = brem::io::annotations_from_json(brem::io::load_json(pipe_annotations), pipe_annotations);
      const auto preds = brem::io::predictions_from_json(brem::io::load_json(pipe_preds), pipe_preds);
      brem::RescoreConfig rc;
      rc.inference = pipe_inf.resolve();
      rc.inference.pyramid = preds.pyramid;
      rc.bem_samples = pipe_inf.bem_samples;
      rc.feature_channels = pipe_channels;
      rc.seed = globals.seed;
      rc.source = pipe_quality == "bem" ? brem::QualitySource::BemForward : brem::QualitySource::Labels;
      std::optional<brem::BemHeadParams> head;
      if (rc.source == brem::QualitySource::BemForward && !pipe_params.empty()) {
        if (pipe_params == "random") {
          brem::SplitMix64 rng(brem::derive_seed(globals.seed, 0x70617261ull));
          head = brem::random_bem_params(pipe_channels, rc.bem_samples, rng);
        } else {
          head = brem::io::bem_params_from_tensors(brem::io::tensors_from_json(brem::io::load_json(pipe_params), pipe_params));
        }
      }
      brem::DetectionSet out;
      for (const auto& [id, levels] : preds.videos) {
        const auto* video = corpus.find(id);
        if (!video) throw brem::io::SchemaError(pipe_preds + ": video '" + id + "' has no annotation");
        brem::QualityMapPair maps;
        if (head) {
          maps = brem::bem_forward(brem::generate_feature_stream(*video, pipe_channels, globals.seed),
                                   rc.inference.scale_set, rc.bem_samples, *head);
        } else {
          maps = brem::quality_maps_for(*video, rc);
        }
        auto dets = brem::run_pipeline(levels, maps, rc.inference);
        for (auto& d : dets) d.interval = {d.interval.start / video->fps, d.interval.end / video->fps};
        out[id] = std::move(dets);
      }
      brem::io::write_text(pipe_out, brem::io::detections_to_json(out, corpus.classes).dump(2) + "\n");
      std::vector<std::string> inputs{pipe_preds, pipe_annotations};
      if (!pipe_params.empty()) inputs.push_back(pipe_params);
      write_manifest(manifest_for_file(pipe_out), *pipe_cmd, globals, inputs, {pipe_out});
    } else if (*grad_cmd) {
      grad_opt.seed = globals.seed;
      const auto rows = brem::run_gradcheck(grad_opt);
      brem::io::CsvTable csv({"loss", "points", "max_relative_error", "result"});
      bool all = true;
      for (const auto& r : rows) {
        csv.add_row({r.loss, std::to_string(r.points), brem::io::format_double(r.max_relative_error, 6),
                     r.pass ? "PASS" : "FAIL"});
        all = all && r.pass;
      }
      brem::io::write_text(grad_out, csv.str());
      write_manifest(manifest_for_file(grad_out), *grad_cmd, globals, {}, {grad_out});
      if (!all) std::cerr << "gradcheck: at least one loss failed\n";
    }
  } catch (const brem::io::SchemaError& e) {
    std::cerr << "schema error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
