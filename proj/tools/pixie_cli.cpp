// pixie: command-line driver for the material pipeline.
//
//   pixie synth   --spec scene.json --out DIR
//   pixie segment --features F --mask M --queries Q --out labels.pxg
//   pixie sample  --spec spec.json --out sampled.json
//   pixie paint   --labels L --queries Q --samples S --out material.pxg
//   pixie train   --data DIR... --out model.pxm [--loss-csv loss.csv]
//   pixie predict --model M --features F --mask K --out-pred P [--out-material G]
//   pixie sim     (--material G | --prediction P --mask K) --out traj.pxf
//   pixie eval    (--pred P --gt G --mask K | --traj A --ref B) --out report.json
//
// Global options (--config, --threads, --seed, ...) may appear anywhere; flags
// override the matching config keys, and --dump-config prints the merged
// config in the same schema --config accepts.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pixie/config.hpp"
#include "pixie/eval.hpp"
#include "pixie/grid_io.hpp"
#include "pixie/mpm.hpp"
#include "pixie/parallel.hpp"
#include "pixie/predictor.hpp"
#include "pixie/segmentation.hpp"
#include "pixie/synth.hpp"
#include "pixie/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace pixie;
using config::Json;

namespace {

struct Overrides {
  std::optional<std::string> config_path;
  std::optional<int> threads;
  bool deterministic = false;
  bool dump_config = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> n;
  std::optional<double> alpha;
  std::optional<std::string> bounds;
  std::optional<int> epochs;
  std::optional<double> learning_rate;
  std::optional<std::string> optimizer;
  std::optional<double> lambda;
  std::optional<int> width;
  std::optional<int> batch_voxels;
  std::optional<int> frames;
  std::optional<int> substeps;
  std::optional<double> dt;
  std::optional<int> ppv;
  std::optional<int> grid_res;
  std::optional<std::vector<double>> wind;
};

config::RunConfig resolve(const Overrides& o) {
  config::RunConfig c;
  if (o.config_path) c = config::run_config_from_json(config::load_json_file(*o.config_path));
  if (o.seed) c.seed = *o.seed;
  if (o.n) c.n = *o.n;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.bounds) c.bounds = config::bounds_from_json(config::load_json_file(*o.bounds));
  if (o.epochs) c.train.cfg.epochs = *o.epochs;
  if (o.learning_rate) c.train.cfg.learning_rate = *o.learning_rate;
  if (o.optimizer) c.train.cfg.optimizer = *o.optimizer == "adam" ? Optimizer::Adam : Optimizer::GradientDescent;
  if (o.lambda) c.train.cfg.lambda = *o.lambda;
  if (o.width) c.train.width = *o.width;
  if (o.batch_voxels) c.train.cfg.batch_voxels = *o.batch_voxels;
  if (o.frames) c.sim.cfg.frames = *o.frames;
  if (o.substeps) c.sim.cfg.substeps = *o.substeps;
  if (o.dt) c.sim.cfg.dt = *o.dt;
  if (o.ppv) c.sim.particles_per_voxel = *o.ppv;
  if (o.grid_res) {
    c.sim.cfg.grid_res = *o.grid_res;
    c.sim.cfg.dx = 1.0 / *o.grid_res;
  }
  if (o.wind) {
    if (o.wind->size() != 3) throw Error(ErrorCode::SchemaError, "--wind takes three numbers");
    c.sim.cfg.wind = Vec3((*o.wind)[0], (*o.wind)[1], (*o.wind)[2]);
  }
  if (o.deterministic) c.deterministic = true;
  c.train.cfg.seed = c.seed;
  c.train.cfg.norm_stats = c.norm_stats;
  c.validate();
  return c;
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

int emit_error(const std::string& code, const std::string& message, int exit_code) {
  Json j = {{"error", {{"code", code}, {"message", message}}}};
  std::cerr << j.dump() << "\n";
  return exit_code;
}

// A dataset argument is either a scene directory (features.pxg present) or a
// directory of scene directories, visited in name order.
std::vector<fs::path> scene_dirs(const std::vector<std::string>& roots) {
  std::vector<fs::path> out;
  for (const auto& r : roots) {
    const fs::path root(r);
    if (fs::exists(root / "features.pxg")) {
      out.push_back(root);
      continue;
    }
    if (!fs::is_directory(root)) throw Error(ErrorCode::IoError, "not a dataset directory: " + r);
    std::vector<fs::path> found;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && fs::exists(e.path() / "features.pxg")) found.push_back(e.path());
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  if (out.empty()) throw Error(ErrorCode::IoError, "no scenes found in the dataset directories");
  return out;
}

OccupancyMask checked_mask(const fs::path& path, int n) {
  OccupancyMask mask = read_occupancy_mask(path);
  if (mask.n() != n) throw Error(ErrorCode::DimensionMismatch, "mask n differs from the feature grid n");
  return mask;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pixie: voxel material prediction and MPM simulation"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config_path, "JSON run config");
  app.add_option("--threads", o.threads, "worker threads (default: PIXIE_THREADS, else 1)");
  app.add_flag("--deterministic", o.deterministic, "fixed-order reductions (always on; recorded in the config)");
  app.add_flag("--dump-config", o.dump_config, "print the merged config to stdout and exit");
  app.add_option("--seed", o.seed, "seed (config key: seed)");
  app.add_option("--n", o.n, "voxels per axis (config key: dims.n)");
  app.add_option("--alpha", o.alpha, "occupancy threshold (config key: alpha)");
  app.add_option("--bounds", o.bounds, "bounds JSON file {min, max} (config key: bounds)");
  app.add_option("--epochs", o.epochs, "training epochs (config key: train.epochs)");
  app.add_option("--lr", o.learning_rate, "initial learning rate (config key: train.learning_rate)");
  app.add_option("--optimizer", o.optimizer, "step direction, gd or adam (config key: train.optimizer)")
      ->check(CLI::IsMember({"gd", "adam"}));
  app.add_option("--lambda", o.lambda, "cross-entropy weight (config key: train.lambda)");
  app.add_option("--width", o.width, "predictor width (config key: train.width)");
  app.add_option("--batch-voxels", o.batch_voxels, "gradient shard size (config key: train.batch_voxels)");
  app.add_option("--frames", o.frames, "simulated frames (config key: sim.frames)");
  app.add_option("--substeps", o.substeps, "steps per frame (config key: sim.substeps)");
  app.add_option("--dt", o.dt, "step size in s (config key: sim.dt)");
  app.add_option("--ppv", o.ppv, "particles per voxel (config key: sim.particles_per_voxel)");
  app.add_option("--grid-res", o.grid_res, "MPM nodes per axis, dx = 1/res (config keys: sim.grid_res, sim.dx)");
  app.add_option("--wind", o.wind, "wind acceleration x y z in m/s^2 (config key: sim.wind)")->expected(3);

  std::string spec_path, out, features_path, mask_path, queries_path, labels_path, samples_path, model_path;
  std::string loss_csv, out_pred, out_material, material_path, prediction_path, ply_dir, csv_path;
  std::string pred_path, gt_path, traj_path, ref_path;
  std::vector<std::string> data_dirs;

  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic scene into a directory");
  synth_cmd->add_option("--spec", spec_path, "synth scene JSON")->required();
  synth_cmd->add_option("--out", out, "output directory")->required();

  auto* seg_cmd = app.add_subcommand("segment", "label occupied voxels by cosine similarity to part queries");
  seg_cmd->add_option("--features", features_path, "feature grid (PXGRID1 f32)")->required();
  seg_cmd->add_option("--mask", mask_path, "occupancy mask (PXGRID1 bool)")->required();
  seg_cmd->add_option("--queries", queries_path, "query set JSON")->required();
  seg_cmd->add_option("--out", out, "part label grid")->required();

  auto* sample_cmd = app.add_subcommand("sample", "sample part materials from a material spec");
  sample_cmd->add_option("--spec", spec_path, "material spec JSON (or a synth spec with 'materials')")->required();
  sample_cmd->add_option("--out", out, "sampled materials JSON")->required();

  auto* paint_cmd = app.add_subcommand("paint", "paint sampled part materials onto a label grid");
  paint_cmd->add_option("--labels", labels_path, "part label grid")->required();
  paint_cmd->add_option("--queries", queries_path, "query set JSON naming the labels")->required();
  paint_cmd->add_option("--samples", samples_path, "sampled materials JSON")->required();
  paint_cmd->add_option("--out", out, "material grid")->required();

  auto* train_cmd = app.add_subcommand("train", "train the voxel predictor");
  train_cmd->add_option("--data", data_dirs, "scene directories or a directory of scenes")->required();
  train_cmd->add_option("--out", out, "model checkpoint (PXMODEL1)")->required();
  train_cmd->add_option("--loss-csv", loss_csv, "per-epoch loss trace");

  auto* predict_cmd = app.add_subcommand("predict", "run the predictor on a feature grid");
  predict_cmd->add_option("--model", model_path, "model checkpoint")->required();
  predict_cmd->add_option("--features", features_path, "feature grid")->required();
  predict_cmd->add_option("--mask", mask_path, "occupancy mask")->required();
  predict_cmd->add_option("--out-pred", out_pred, "prediction grid (d = 11)")->required();
  predict_cmd->add_option("--out-material", out_material, "denormalized material grid");

  auto* sim_cmd = app.add_subcommand("sim", "simulate a material grid with MPM");
  sim_cmd->add_option("--material", material_path, "material grid");
  sim_cmd->add_option("--prediction", prediction_path, "prediction grid (needs --mask)");
  sim_cmd->add_option("--mask", mask_path, "occupancy mask for --prediction");
  sim_cmd->add_option("--out", out, "trajectory (PXFRAME1 records)")->required();
  sim_cmd->add_option("--ply-dir", ply_dir, "also write one PLY per frame here");
  sim_cmd->add_option("--csv", csv_path, "also write frame,id,x,y,z rows here");

  auto* ev_cmd = app.add_subcommand("eval", "compare a prediction with ground truth, or two trajectories");
  ev_cmd->add_option("--pred", pred_path, "prediction grid");
  ev_cmd->add_option("--gt", gt_path, "ground-truth material grid");
  ev_cmd->add_option("--mask", mask_path, "occupancy mask (default: ground-truth occupancy)");
  ev_cmd->add_option("--traj", traj_path, "trajectory");
  ev_cmd->add_option("--ref", ref_path, "reference trajectory");
  ev_cmd->add_option("--out", out, "report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return emit_error("usage_error", e.what(), 2);
  }
  if (!o.dump_config && app.get_subcommands().empty()) {
    return emit_error("usage_error", "A subcommand is required", 2);
  }

  try {
    if (o.threads) {
      set_thread_count(*o.threads);
    }
    const config::RunConfig cfg = resolve(o);
    if (o.dump_config) {
      std::cout << config::to_json(cfg).dump(2) << "\n";
      return 0;
    }

    if (synth_cmd->parsed()) {
      const SynthSceneSpec spec = config::synth_spec_from_json(config::load_json_file(spec_path));
      const SynthScene scene = generate(spec, cfg.n, cfg.bounds);
      const OccupancyMask mask = compute_occupancy(scene.density, cfg.alpha);
      const fs::path dir(out);
      fs::create_directories(dir);
      write_grid(dir / "features.pxg", scene.features);
      write_grid(dir / "density.pxg", scene.density);
      write_grid(dir / "mask.pxg", mask);
      write_grid(dir / "labels.pxg", scene.labels);
      write_material_grid(dir / "material.pxg", scene.material);
      write_json(dir / "sampled.json", config::to_json(scene.sampled));
      write_json(dir / "queries.json", config::to_json(spec.queries()));
      write_json(dir / "bounds.json", config::to_json(cfg.bounds));
    } else if (seg_cmd->parsed()) {
      const FeatureGrid features = read_feature_grid(features_path);
      const OccupancyMask mask = checked_mask(mask_path, features.n());
      const QuerySet queries = config::query_set_from_json(config::load_json_file(queries_path));
      const SegmentResult r = segment(features, mask, queries);
      ensure_parent(out);
      write_grid(out, r.labels);
      std::cout << Json{{"zero_norm_voxels", r.zero_norm_count}, {"tied_voxels", r.tie_count}}.dump() << "\n";
    } else if (sample_cmd->parsed()) {
      const Json j = config::load_json_file(spec_path);
      const MaterialSpec spec =
          config::material_spec_from_json(j.contains("materials") ? j["materials"] : j);
      const SampledMaterials sampled = sample_spec(spec, cfg.seed);
      ensure_parent(out);
      write_json(out, config::to_json(sampled));
    } else if (paint_cmd->parsed()) {
      const PartLabelGrid labels = read_part_label_grid(labels_path);
      const QuerySet queries = config::query_set_from_json(config::load_json_file(queries_path));
      const SampledMaterials sampled = config::sampled_from_json(config::load_json_file(samples_path));
      const MaterialGrid material = paint_materials(labels, queries, sampled);
      ensure_parent(out);
      write_material_grid(out, material);
    } else if (train_cmd->parsed()) {
      std::vector<TrainingExample> dataset;
      for (const auto& dir : scene_dirs(data_dirs)) {
        TrainingExample ex{read_feature_grid(dir / "features.pxg"), read_material_grid(dir / "material.pxg"),
                           read_occupancy_mask(dir / "mask.pxg")};
        if (ex.mask.n() != ex.features.n() || ex.material.n() != ex.features.n()) {
          throw Error(ErrorCode::DimensionMismatch, dir.string() + ": grids disagree on n");
        }
        ex.material.check_against(ex.mask);
        dataset.push_back(std::move(ex));
      }
      const int d = dataset.front().features.d();
      for (const auto& ex : dataset) {
        if (ex.features.d() != d) throw Error(ErrorCode::DimensionMismatch, "scenes disagree on feature dim");
      }
      PredictorModel model = PredictorModel::initialized(d, cfg.train.width, cfg.seed);
      const TrainResult result = train(std::move(model), dataset, cfg.train.cfg);
      ensure_parent(out);
      write_model(out, result.model);
      if (!loss_csv.empty()) {
        ensure_parent(loss_csv);
        write_file_atomic(loss_csv, loss_trace_csv(result.trace));
      }
      const auto& last = result.trace.back().loss;
      std::cout << Json{{"epochs", result.trace.size()}, {"final_loss", last.total}}.dump() << "\n";
    } else if (predict_cmd->parsed()) {
      const PredictorModel model = read_model(model_path);
      const FeatureGrid features = read_feature_grid(features_path);
      const OccupancyMask mask = checked_mask(mask_path, features.n());
      if (features.d() != model.input_dim()) {
        throw Error(ErrorCode::DimensionMismatch, "feature dim " + std::to_string(features.d()) +
                                                      " does not match model input dim " +
                                                      std::to_string(model.input_dim()));
      }
      const PredictionGrid pred = forward(model, features, mask);
      const MaterialGrid material = to_material_grid(pred, mask, cfg.norm_stats);
      ensure_parent(out_pred);
      write_prediction(out_pred, pred);
      if (!out_material.empty()) {
        ensure_parent(out_material);
        write_material_grid(out_material, material);
      }
    } else if (sim_cmd->parsed()) {
      MaterialGrid material;
      if (!material_path.empty() == !prediction_path.empty()) {
        throw Error(ErrorCode::InvalidArgument, "sim needs exactly one of --material or --prediction");
      }
      if (!material_path.empty()) {
        material = read_material_grid(material_path);
      } else {
        if (mask_path.empty()) throw Error(ErrorCode::InvalidArgument, "--prediction requires --mask");
        const PredictionGrid pred = read_prediction(prediction_path);
        material = to_material_grid(pred, checked_mask(mask_path, pred.n()), cfg.norm_stats);
      }
      auto particles =
          mpm::sample_particles(material.occupancy(), material, cfg.bounds, cfg.sim.particles_per_voxel, cfg.seed);
      const mpm::Trajectory traj = mpm::run(cfg.sim.cfg, std::move(particles));
      ensure_parent(out);
      write_trajectory(out, traj);
      if (!ply_dir.empty()) write_trajectory_ply(ply_dir, fs::path(out).stem().string(), traj);
      if (!csv_path.empty()) {
        ensure_parent(csv_path);
        write_trajectory_csv(csv_path, traj);
      }
      std::cout << Json{{"frames", traj.frame_count()},
                        {"particles", traj.positions.empty() ? 0 : traj.positions.front().size()}}
                       .dump()
                << "\n";
    } else if (ev_cmd->parsed()) {
      const bool grids = !pred_path.empty() || !gt_path.empty();
      const bool trajs = !traj_path.empty() || !ref_path.empty();
      if (grids == trajs) throw Error(ErrorCode::InvalidArgument, "eval needs --pred/--gt or --traj/--ref");
      ensure_parent(out);
      if (grids) {
        if (pred_path.empty() || gt_path.empty()) throw Error(ErrorCode::InvalidArgument, "need both --pred and --gt");
        const PredictionGrid pred = read_prediction(pred_path);
        const MaterialGrid gt = read_material_grid(gt_path);
        if (pred.n() != gt.n()) throw Error(ErrorCode::DimensionMismatch, "prediction and ground truth differ in n");
        const OccupancyMask mask = mask_path.empty() ? gt.occupancy() : checked_mask(mask_path, gt.n());
        const Metrics m = evaluate_prediction(pred, normalize_targets(gt, cfg.norm_stats), mask);
        const MetricReport report = aggregate({m});
        write_file_atomic(out, report_json(report));
        if (cfg.eval.csv) write_file_atomic(fs::path(out).replace_extension(".csv"), report_csv(report));
        std::cout << Json{{"mat_acc", m.mat_acc}, {"avg_cont_mse", m.avg_cont_mse}}.dump() << "\n";
      } else {
        if (traj_path.empty() || ref_path.empty()) throw Error(ErrorCode::InvalidArgument, "need both --traj and --ref");
        const RmseResult r = trajectory_rmse(read_trajectory(traj_path), read_trajectory(ref_path));
        write_file_atomic(out, rmse_json(r));
        std::cout << Json{{"mean_rmse", r.mean}}.dump() << "\n";
      }
    }
  } catch (const Error& e) {
    return emit_error(std::string(error_code_name(e.code())), e.what(), 1);
  } catch (const std::exception& e) {
    return emit_error("Internal", e.what(), 1);
  }
  return 0;
}
