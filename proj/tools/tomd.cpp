// Copyright 2026 The tomd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tomd/tomd.hpp"
#include "tomd/annotation_service.hpp"

namespace fs = std::filesystem;
using namespace tomd;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

FusionSpec spec_from(const std::string& mode, const std::string& depth_kind) {
  FusionSpec spec;
  spec.mode = parse_fusion_mode(mode);
  if (depth_kind == "none" || (depth_kind == "auto" && spec.mode == FusionMode::kNone)) {
    require(spec.mode == FusionMode::kNone, ErrorCode::kMissingModality,
            "mode '" + mode + "' needs depth");
    spec.depth.reset();
  } else {
    spec.depth = depth_kind == "auto" ? DepthKind::kDense : parse_depth_kind(depth_kind);
  }
  return spec;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIoError, "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

std::vector<LabeledFrame> load_split(const fs::path& manifest, Split split,
                                     const FusionSpec& spec, bool need_mask,
                                     double max_depth) {
  FrameLoadOptions opt = load_options_for(spec, need_mask);
  opt.completion.max_depth = max_depth;
  std::vector<LabeledFrame> frames;
  for (const auto& r : load_manifest(manifest)) {
    if (split != Split::kNone && r.split != split) continue;
    frames.push_back(load_frame(manifest, r, opt));
  }
  return frames;
}

Split split_arg(const std::string& s) {
  if (s == "all") return Split::kNone;
  const auto split = parse_split(s);
  require(split.has_value(), ErrorCode::kInvalidArgument, "unknown split '" + s + "'");
  return *split;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tomd: traversable-pathway segmentation toolkit"};
  app.require_subcommand(1);

  // sync ---------------------------------------------------------------------
  auto* sync = app.add_subcommand("sync", "synchronise a sequence to the LiDAR clock");
  std::string seq_dir, sync_out;
  double tolerance_ms = 50.0;
  std::size_t keyframe_stride = 10;
  sync->add_option("--seq", seq_dir, "sequence directory")->required();
  sync->add_option("--out", sync_out, "output manifest (JSON lines)")->required();
  sync->add_option("--tolerance-ms", tolerance_ms, "matching tolerance")->capture_default_str();
  sync->add_option("--keyframe-stride", keyframe_stride, "keyframe every N frames")
      ->capture_default_str();

  // split --------------------------------------------------------------------
  auto* split = app.add_subcommand("split", "tag frames train/val/test (8:1:1)");
  std::string split_manifest, split_out;
  std::uint64_t split_seed = 42;
  split->add_option("--manifest", split_manifest)->required();
  split->add_option("--seed", split_seed)->capture_default_str();
  split->add_option("--out", split_out, "defaults to rewriting --manifest");

  // project ------------------------------------------------------------------
  auto* project = app.add_subcommand("project", "project a point cloud to sparse depth");
  std::string proj_calib, proj_cloud, proj_out, proj_image, proj_overlay;
  bool proj_pixel_centre = false;
  project->add_option("--calib", proj_calib)->required();
  project->add_option("--cloud", proj_cloud)->required();
  project->add_option("--out", proj_out, "16-bit depth PNG (mm)")->required();
  project->add_option("--image", proj_image, "RGB image for --overlay");
  project->add_option("--overlay", proj_overlay, "write a colour-ramp overlay PNG");
  project->add_flag("--nearest-pixel-centre", proj_pixel_centre,
                    "resolve collisions by distance to the pixel centre");

  // complete -----------------------------------------------------------------
  auto* complete = app.add_subcommand("complete", "densify a sparse depth PNG");
  std::string comp_in, comp_out, comp_params;
  complete->add_option("--in", comp_in)->required();
  complete->add_option("--out", comp_out)->required();
  complete->add_option("--params", comp_params, "CompletionParams JSON");

  // fuse ---------------------------------------------------------------------
  auto* fuse = app.add_subcommand("fuse", "assemble a two-stream network input");
  std::string fuse_mode = "mixed", fuse_rgb, fuse_depth = "none", fuse_kind = "dense",
              fuse_out;
  double fuse_max_depth = 100.0;
  fuse->add_option("--mode", fuse_mode)->check(CLI::IsMember({"na", "early", "cross", "mixed"}));
  fuse->add_option("--rgb", fuse_rgb)->required();
  fuse->add_option("--depth", fuse_depth, "depth PNG or 'none'");
  fuse->add_option("--depth-kind", fuse_kind)->check(CLI::IsMember({"sparse", "dense"}));
  fuse->add_option("--max-depth", fuse_max_depth)->capture_default_str();
  fuse->add_option("--out", fuse_out)->required();

  // train --------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train the fusion network");
  std::string train_data, train_mode = "mixed", train_kind = "auto", train_config,
              train_out, train_log;
  train->add_option("--data", train_data, "manifest with train/val tags")->required();
  train->add_option("--mode", train_mode)->check(CLI::IsMember({"na", "early", "cross", "mixed"}));
  train->add_option("--depth-kind", train_kind, "sparse | dense | none | auto")
      ->check(CLI::IsMember({"sparse", "dense", "none", "auto"}));
  train->add_option("--config", train_config,
                    "network JSON; optional keys 'train' and 'max_depth'");
  train->add_option("--out", train_out, "weights directory")->required();
  train->add_option("--log", train_log, "training log CSV (default <out>/train_log.csv)");

  // predict ------------------------------------------------------------------
  auto* predict_cmd = app.add_subcommand("predict", "predict a traversability mask");
  std::string pred_weights, pred_frame, pred_data, pred_out;
  predict_cmd->add_option("--weights", pred_weights)->required();
  predict_cmd->add_option("--frame", pred_frame)->required();
  predict_cmd->add_option("--data", pred_data, "manifest containing the frame")->required();
  predict_cmd->add_option("--out", pred_out, "8-bit 0/255 PNG")->required();

  // eval ---------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "lux-binned metrics report");
  std::vector<std::string> eval_weights;
  std::string eval_data, eval_split = "test", eval_out;
  bool eval_fps = false;
  std::size_t eval_warmup = 5;
  eval->add_option("--weights", eval_weights, "one or more weights directories")->required();
  eval->add_option("--data", eval_data)->required();
  eval->add_option("--split", eval_split)->capture_default_str();
  eval->add_option("--out", eval_out, "report CSV")->required();
  eval->add_flag("--fps", eval_fps, "also time inference of the first model");
  eval->add_option("--warmup", eval_warmup)->capture_default_str();

  // bench --------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "measure inference throughput");
  std::string bench_weights, bench_data, bench_split = "test";
  std::size_t bench_warmup = 5;
  bench->add_option("--weights", bench_weights)->required();
  bench->add_option("--data", bench_data)->required();
  bench->add_option("--split", bench_split)->capture_default_str();
  bench->add_option("--warmup", bench_warmup)->capture_default_str();

  // serve --------------------------------------------------------------------
  auto* serve = app.add_subcommand("serve", "annotation HTTP service");
  std::string serve_manifest, serve_host = "127.0.0.1", serve_sessions;
  int serve_port = 8080;
  SlicParams slic;
  serve->add_option("--manifest", serve_manifest)->required();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--sessions", serve_sessions, "default <manifest dir>/sessions");
  serve->add_option("--slic-k", slic.segments)->capture_default_str();
  serve->add_option("--slic-m", slic.compactness)->capture_default_str();
  serve->add_option("--slic-iters", slic.iterations)->capture_default_str();

  // synth --------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "write a synthetic band corpus");
  std::string synth_out;
  SyntheticConfig synth_cfg;
  bool synth_low = false;
  synth->add_option("--out", synth_out)->required();
  synth->add_option("--frames", synth_cfg.frames)->capture_default_str();
  synth->add_option("--size", synth_cfg.height, "square frame size")->capture_default_str();
  synth->add_option("--seed", synth_cfg.seed)->capture_default_str();
  synth->add_flag("--low-light", synth_low, "attenuate the RGB signal 10x");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sync) {
      const auto streams = load_sequence_streams(seq_dir);
      auto result = synchronize(streams, stream_id::kLidar,
                                static_cast<std::int64_t>(tolerance_ms * 1e6));
      select_keyframes(result.records, keyframe_stride);
      const fs::path out_dir = fs::absolute(sync_out).parent_path();
      const fs::path calib = fs::path(seq_dir) / "calibration.json";
      for (auto& r : result.records) {
        r.image_path = fs::relative(fs::absolute(r.image_path), out_dir).string();
        r.cloud_path = fs::relative(fs::absolute(r.cloud_path), out_dir).string();
        if (fs::exists(calib)) {
          r.calibration_path = fs::relative(fs::absolute(calib), out_dir).string();
        }
      }
      write_manifest(result.records, sync_out);
      std::cout << result.records.size() << " frames written, " << result.dropped
                << " dropped\n";
    } else if (*split) {
      auto records = load_manifest(split_manifest);
      const auto sizes = split_dataset(records, {}, split_seed);
      write_manifest(records, split_out.empty() ? split_manifest : split_out);
      std::cout << "train " << sizes.train << ", val " << sizes.val << ", test "
                << sizes.test << '\n';
    } else if (*project) {
      const Calibration cal = load_calibration(proj_calib);
      ProjectionOptions opt;
      if (proj_pixel_centre) opt.collision = CollisionRule::kNearestPixelCenter;
      const auto result = project_to_sparse_depth(
          transform_points(load_point_cloud(proj_cloud), cal.extrinsic), cal.camera, opt);
      save_depth_png(proj_out, result.depth);
      if (!proj_overlay.empty()) {
        require(!proj_image.empty(), ErrorCode::kInvalidArgument, "--overlay needs --image");
        png::write_rgb(proj_overlay, overlay_projection(png::read_rgb(proj_image), result.depth));
      }
      std::cout << result.depth.valid_count() << " pixels, " << result.behind_camera
                << " behind camera, " << result.out_of_bounds << " out of bounds\n";
    } else if (*complete) {
      const CompletionParams params =
          comp_params.empty() ? CompletionParams{} : load_completion_params(comp_params);
      save_depth_png(comp_out, complete_depth(load_depth_png(comp_in, DepthKind::kSparse), params));
    } else if (*fuse) {
      FusionSpec spec = spec_from(fuse_mode, fuse_depth == "none" ? "none" : fuse_kind);
      std::optional<DepthMap> depth;
      if (fuse_depth != "none") depth = load_depth_png(fuse_depth, *spec.depth);
      save_fusion_sample(fuse_out, assemble_fusion_input(spec, png::read_rgb(fuse_rgb),
                                                         depth ? &*depth : nullptr,
                                                         fuse_max_depth));
    } else if (*train) {
      const FusionSpec spec = spec_from(train_mode, train_kind);
      nn::DcmConfig cfg;
      nn::TrainConfig tc;
      double max_depth = 100.0;
      if (!train_config.empty()) {
        const auto j = read_json(train_config);
        cfg = j.get<nn::DcmConfig>();
        if (j.contains("train")) tc = j["train"].get<nn::TrainConfig>();
        max_depth = j.value("max_depth", max_depth);
      }
      const auto train_frames = load_split(train_data, Split::kTrain, spec, true, max_depth);
      const auto val_frames = load_split(train_data, Split::kVal, spec, true, max_depth);
      const auto train_set = to_labeled_samples(train_frames, spec, max_depth);
      const auto val_set = to_labeled_samples(val_frames, spec, max_depth);
      std::cout << "training " << to_string(spec.stream1()) << " / "
                << to_string(spec.stream2()) << " on " << train_set.size()
                << " frames, validating on " << val_set.size() << '\n';
      auto result = nn::train<float>(train_set, val_set, tc, cfg, spec,
                                     [](const nn::TrainLogRow& row) {
                                       if (row.val_iou) {
                                         std::cout << "step " << row.step << " loss ";
                                         if (row.loss) {
                                           std::cout << *row.loss;
                                         } else {
                                           std::cout << '-';
                                         }
                                         std::cout << " val_iou "
                                                   << *row.val_iou << '\n';
                                       }
                                     });
      nn::Model model{cfg, spec, result.normalization, max_depth, tc.threshold,
                      std::move(result.weights)};
      nn::save_model(train_out, model);
      std::ofstream log(train_log.empty() ? fs::path(train_out) / "train_log.csv"
                                          : fs::path(train_log));
      nn::write_train_log_csv(log, result.log);
      std::cout << "best val IoU " << result.best_val_iou << " at step "
                << result.best_step << '\n';
    } else if (*predict_cmd) {
      const nn::Model model = nn::load_model(pred_weights);
      const auto records = load_manifest(pred_data);
      const auto it = std::find_if(records.begin(), records.end(),
                                   [&](const FrameRecord& r) { return r.id == pred_frame; });
      require(it != records.end(), ErrorCode::kInvalidArgument,
              "frame '" + pred_frame + "' not in " + pred_data);
      FrameLoadOptions opt = load_options_for(model.spec, false);
      opt.completion.max_depth = model.max_depth;
      Mask mask = predict(model, load_frame(pred_data, *it, opt));
      for (auto& v : mask.values()) v = v != 0 ? 255 : 0;
      png::write_gray8(pred_out, mask);
    } else if (*eval) {
      std::vector<nn::Model> models;
      for (const auto& w : eval_weights) models.push_back(nn::load_model(w));
      MetricsReport report;
      for (const auto& m : models) {
        const auto frames = load_split(eval_data, split_arg(eval_split), m.spec, true, m.max_depth);
        report.modes.push_back(evaluate_model(m, frames));
        if (eval_fps && !report.fps) {
          std::vector<FusionInput> inputs;
          for (const auto& f : frames) inputs.push_back(frame_input(f, m.spec, m.max_depth));
          report.fps = measure_fps(m, inputs, eval_warmup);
        }
      }
      std::ofstream csv(eval_out);
      require(static_cast<bool>(csv), ErrorCode::kIoError, "cannot write " + eval_out);
      write_report_csv(csv, report);
      write_report_text(std::cout, report);
    } else if (*bench) {
      const nn::Model model = nn::load_model(bench_weights);
      const auto frames =
          load_split(bench_data, split_arg(bench_split), model.spec, false, model.max_depth);
      std::vector<FusionInput> inputs;
      for (const auto& f : frames) inputs.push_back(frame_input(f, model.spec, model.max_depth));
      const FpsResult fps = measure_fps(model, inputs, bench_warmup);
      std::cout << "FPS " << fps.fps << " (" << fps.frames << " frames in " << fps.seconds
                << " s) on " << fps.machine << '\n';
    } else if (*serve) {
      const fs::path sessions = serve_sessions.empty()
                                    ? fs::absolute(serve_manifest).parent_path() / "sessions"
                                    : fs::path(serve_sessions);
      AnnotationStore store(serve_manifest, sessions, slic);
      AnnotationServer server(store);
      const int port = server.start(serve_host, serve_port);
      std::cout << "serving " << store.records().size() << " frames on http://"
                << serve_host << ':' << port << '\n'
                << std::flush;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
    } else if (*synth) {
      synth_cfg.width = synth_cfg.height;
      const auto frames = make_synthetic_corpus(synth_low ? synth_cfg.low_light() : synth_cfg);
      const auto records = write_synthetic_dataset(synth_out, frames, synth_cfg.seed);
      std::cout << records.size() << " frames written to " << synth_out << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "tomd: " << e.what() << '\n';
    return e.code() == ErrorCode::kParseError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
