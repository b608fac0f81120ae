// poselab: pose tokenization and camera-bias experiment CLI.
//
// Subcommands: gen-data, train-tokenizer, eval-tokenizer, tals-thresholds,
// bias mismatch, bias attack. Every run writes resolved-config.json into its
// output directory; reruns with the same seed and config are byte-identical.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "poselab/biaslab.hpp"
#include "poselab/checkpoint.hpp"
#include "poselab/dataset.hpp"
#include "poselab/errors.hpp"
#include "poselab/metrics.hpp"
#include "poselab/skeleton.hpp"
#include "poselab/svg.hpp"
#include "poselab/tals.hpp"
#include "poselab/tokenizer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace poselab;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

void write_resolved_config(const fs::path& out_dir, const json& cfg) {
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved-config.json", cfg.dump(2) + "\n");
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file: " + path);
  json j;
  in >> j;
  return j;
}

// Flags beat the config file; the config file beats defaults.
template <typename T>
void merge(const CLI::App& app, const json& file_cfg, const std::string& flag,
           const std::string& key, T& value) {
  if (app.count(flag) == 0 && file_cfg.contains(key)) value = file_cfg.at(key).get<T>();
}

Skeleton load_skel(const std::string& path) {
  return path.empty() ? Skeleton::default_humanoid() : load_skeleton(path);
}

PoseDataset resolve_dataset(const std::string& spec, std::uint64_t seed) {
  if (spec.rfind("synth", 0) == 0) {
    int n = 5000;
    const auto colon = spec.find(':');
    if (colon != std::string::npos) n = std::stoi(spec.substr(colon + 1));
    return synthesize_pose_manifold(n, seed);
  }
  return load_pose_dataset(spec);
}

std::vector<std::string> body_joint_names(const Skeleton& skel) {
  std::vector<std::string> names;
  for (int j = 1; j < skel.size(); ++j) names.push_back(skel.joints[j].name);
  return names;
}

struct PosePairs {
  std::vector<BodyPose> pred, gt;
};

PosePairs load_pose_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open pose-pair file: " + path);
  PosePairs out;
  std::string line;
  long index = 0;
  auto parse_pose = [&](const json& arr) {
    Eigen::Matrix<double, Eigen::Dynamic, 3> aa(arr.size(), 3);
    for (size_t k = 0; k < arr.size(); ++k)
      for (int c = 0; c < 3; ++c) aa(static_cast<long>(k), c) = arr[k][c].get<double>();
    return BodyPose::from_axis_angle(aa);
  };
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
      out.pred.push_back(parse_pose(rec.at("pred")));
      out.gt.push_back(parse_pose(rec.at("gt")));
    } catch (const json::exception& e) {
      throw DataError("bad pose pair at record " + std::to_string(index) + ": " + e.what(), index);
    }
    ++index;
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const std::string& out_dir, int n, int joints, std::uint64_t seed,
                 const std::string& format) {
  json cfg;
  cfg["command"] = "gen-data";
  cfg["n"] = n;
  cfg["joints"] = joints;
  cfg["seed"] = seed;
  cfg["format"] = format;
  cfg["out"] = out_dir;
  write_resolved_config(out_dir, cfg);

  const PoseDataset ds = synthesize_pose_manifold(n, seed, joints);
  if (format == "jsonl")
    save_jsonl(ds, (fs::path(out_dir) / "poses.jsonl").string());
  else
    save_ptk(ds, (fs::path(out_dir) / "poses.ptk").string());
  std::cout << "wrote " << ds.size() << " poses to " << out_dir << "\n";
  return 0;
}

int cmd_train(const TokenizerConfig& tcfg, const std::string& data_spec,
              const std::string& skel_path, const std::string& out_dir, int threads) {
  json cfg = json::parse(tcfg.to_json());
  cfg["command"] = "train-tokenizer";
  cfg["data"] = data_spec;
  cfg["skeleton"] = skel_path;
  cfg["out"] = out_dir;
  cfg["threads"] = threads;
  write_resolved_config(out_dir, cfg);

  const Skeleton skel = load_skel(skel_path);
  const PoseDataset data = resolve_dataset(data_spec, tcfg.seed);
  std::mt19937_64 init_rng(tcfg.seed);

  std::vector<TrainLogRow> log;
  TrainResult result;
  Checkpoint ckpt;
  if (tcfg.dtype == "f64") {
    auto model = TokenizerModel<double>::init(tcfg, init_rng);
    auto cb = CodebookState::init(tcfg.codebook_size, tcfg.code_dim, init_rng);
    result = train_tokenizer(model, cb, data, skel, tcfg, &log, threads);
    ckpt = tokenizer_checkpoint(model, cb);
  } else {
    auto model = TokenizerModel<float>::init(tcfg, init_rng);
    auto cb = CodebookState::init(tcfg.codebook_size, tcfg.code_dim, init_rng);
    result = train_tokenizer(model, cb, data, skel, tcfg, &log, threads);
    ckpt = tokenizer_checkpoint(model, cb);
  }
  save_checkpoint(ckpt, (fs::path(out_dir) / "checkpoint").string());

  std::ostringstream csv;
  csv << "iter,total,rec,embed,commit,val_geodesic\n";
  for (const auto& row : log) {
    csv << row.iter << "," << fmt(row.total) << "," << fmt(row.rec) << "," << fmt(row.embed)
        << "," << fmt(row.commit) << ",";
    if (row.val_geodesic >= 0) csv << fmt(row.val_geodesic);
    csv << "\n";
  }
  write_text(fs::path(out_dir) / "train_log.csv", csv.str());

  json summary;
  summary["initial_val_geodesic"] = result.initial_val_geodesic;
  summary["final_val_geodesic"] = result.final_val_geodesic;
  summary["final_loss"] = result.final_loss;
  summary["codebook_utilization"] = result.codebook_utilization;
  summary["iterations"] = result.iterations;
  write_text(fs::path(out_dir) / "train_summary.json", summary.dump(2) + "\n");
  std::cout << "final loss " << fmt(result.final_loss) << ", val geodesic "
            << fmt(result.final_val_geodesic) << " rad\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_stem, const std::string& data_spec,
             const std::string& skel_path, const std::string& out_dir, std::uint64_t seed) {
  json cfg;
  cfg["command"] = "eval-tokenizer";
  cfg["ckpt"] = ckpt_stem;
  cfg["data"] = data_spec;
  cfg["skeleton"] = skel_path;
  cfg["seed"] = seed;
  cfg["out"] = out_dir;
  write_resolved_config(out_dir, cfg);

  TokenizerModel<double> model;
  CodebookState cb;
  load_tokenizer_checkpoint(load_checkpoint(ckpt_stem), model, cb);
  const Skeleton skel = load_skel(skel_path);
  const PoseDataset data = resolve_dataset(data_spec, seed);
  std::vector<size_t> all(data.size());
  for (size_t i = 0; i < all.size(); ++i) all[i] = i;

  json report;
  report["mean_geodesic_rad"] = eval_geodesic(model, cb, data, all);
  report["mpjpe_mm"] = eval_mpjpe(model, cb, data, all, skel);
  report["codebook_utilization"] = eval_utilization(model, cb, data, all);
  report["poses"] = data.size();
  write_text(fs::path(out_dir) / "eval.json", report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_tals_thresholds(const std::string& out_dir, int scenes_n, std::uint64_t seed,
                        const std::string& wrong_cam, const std::string& pose_pairs_path,
                        const std::string& skel_path, double alpha_pose, double alpha_2d) {
  json cfg;
  cfg["command"] = "tals-thresholds";
  cfg["scenes"] = scenes_n;
  cfg["seed"] = seed;
  cfg["wrong_cam"] = wrong_cam;
  cfg["pose_pairs"] = pose_pairs_path;
  cfg["skeleton"] = skel_path;
  cfg["alpha_pose"] = alpha_pose;
  cfg["alpha_2d"] = alpha_2d;
  cfg["out"] = out_dir;
  write_resolved_config(out_dir, cfg);

  const Skeleton skel = load_skel(skel_path);
  TalsThresholds th;
  th.alpha_pose = alpha_pose;
  th.alpha_2d = alpha_2d;

  int skipped = 0;
  if (scenes_n > 0) {
    const std::vector<SyntheticScene> scenes = generate_scenes(scenes_n, seed, skel);
    std::vector<BodyPose> poses;
    std::vector<PerspectiveCamera> cams;
    for (const auto& sc : scenes) {
      poses.push_back(sc.gt_pose);
      cams.push_back(sc.gt_cam);
    }
    WrongCameraFactory factory;
    if (wrong_cam == "matched")
      factory = [](const Joints3D&, const PerspectiveCamera& gt_cam, double, double) {
        return gt_cam;
      };
    else if (wrong_cam.rfind("scale:", 0) == 0)
      factory = focal_scaled_wrong_camera(std::stod(wrong_cam.substr(6)));
    else
      factory = fixed_focal_wrong_camera();
    const auto report =
        estimate_thresholds_2d(poses, cams, scenes[0].image_size.x(), scenes[0].image_size.y(),
                               factory, skel);
    for (int j = 0; j < skel.size(); ++j)
      th.eps_2d[skel.joints[j].name] = report.eps[static_cast<size_t>(j)];
    skipped = report.scenes_skipped;
  }
  if (!pose_pairs_path.empty()) {
    const PosePairs pairs = load_pose_pairs(pose_pairs_path);
    const std::vector<double> eps = estimate_thresholds_pose(pairs.pred, pairs.gt);
    const std::vector<std::string> names = body_joint_names(skel);
    for (size_t j = 0; j < eps.size() && j < names.size(); ++j) th.eps_pose[names[j]] = eps[j];
  }

  th.save((fs::path(out_dir) / "thresholds.json").string());
  json summary;
  summary["scenes_skipped"] = skipped;
  write_text(fs::path(out_dir) / "thresholds_summary.json", summary.dump(2) + "\n");
  std::cout << "thresholds written to " << out_dir << " (" << skipped << " scenes skipped)\n";
  return 0;
}

int cmd_bias_mismatch(const std::string& out_dir, int scenes_n, std::uint64_t seed,
                      const std::string& wrong_cam, const std::string& skel_path) {
  json cfg;
  cfg["command"] = "bias mismatch";
  cfg["scenes"] = scenes_n;
  cfg["seed"] = seed;
  cfg["wrong_cam"] = wrong_cam;
  cfg["skeleton"] = skel_path;
  cfg["out"] = out_dir;
  write_resolved_config(out_dir, cfg);

  const Skeleton skel = load_skel(skel_path);
  const std::vector<SyntheticScene> scenes = generate_scenes(scenes_n, seed, skel);
  WrongCameraFactory factory;
  if (wrong_cam == "matched")
    factory = [](const Joints3D&, const PerspectiveCamera& gt_cam, double, double) {
      return gt_cam;
    };
  else if (wrong_cam.rfind("scale:", 0) == 0)
    factory = focal_scaled_wrong_camera(std::stod(wrong_cam.substr(6)));
  else
    factory = fixed_focal_wrong_camera();

  const MismatchReport report = camera_mismatch_experiment(scenes, factory, skel);
  json j;
  j["pck05"] = report.pck05;
  j["pck10"] = report.pck10;
  j["mean_err2d_norm"] = report.mean_err2d_norm;
  j["scenes_used"] = report.scenes_used;
  j["scenes_excluded"] = report.scenes_excluded;
  write_text(fs::path(out_dir) / "mismatch.json", j.dump(2) + "\n");

  std::ostringstream csv;
  csv << "joint,mean_err2d_norm\n";
  for (int k = 0; k < skel.size(); ++k)
    csv << skel.joints[k].name << "," << fmt(report.per_joint_err_norm[static_cast<size_t>(k)])
        << "\n";
  write_text(fs::path(out_dir) / "per_joint_err.csv", csv.str());
  std::cout << j.dump(2) << "\n";
  return 0;
}

int cmd_bias_attack(const std::string& out_dir, const AttackConfig& acfg, std::uint64_t seed,
                    int scene_index, const std::string& skel_path) {
  json cfg;
  cfg["command"] = "bias attack";
  cfg["seed"] = seed;
  cfg["scene_index"] = scene_index;
  cfg["iters"] = acfg.iterations;
  cfg["w2d"] = acfg.w_2d;
  cfg["w3d"] = acfg.w_3d;
  cfg["margin"] = acfg.margin;
  cfg["step"] = acfg.step_size;
  cfg["step_decay"] = acfg.step_decay;
  cfg["hinged"] = acfg.hinged;
  cfg["skeleton"] = skel_path;
  cfg["out"] = out_dir;
  write_resolved_config(out_dir, cfg);

  const Skeleton skel = load_skel(skel_path);
  const std::vector<SyntheticScene> scenes = generate_scenes(scene_index + 1, seed, skel);
  const AttackResult result = adversarial_attack(scenes[static_cast<size_t>(scene_index)], acfg, skel);

  std::ostringstream csv;
  csv << "iter,err2d,mpjpe\n";
  for (const auto& row : result.trajectory)
    csv << row.iter << "," << fmt(row.err2d) << "," << fmt(row.mpjpe) << "\n";
  write_text(fs::path(out_dir) / "trajectory.csv", csv.str());

  json j;
  j["initial_err2d"] = result.initial_err2d;
  j["initial_mpjpe"] = result.initial_mpjpe;
  j["aborted"] = result.aborted;
  if (!result.trajectory.empty()) {
    j["final_err2d"] = result.trajectory.back().err2d;
    j["final_mpjpe"] = result.trajectory.back().mpjpe;
  }
  write_text(fs::path(out_dir) / "attack.json", j.dump(2) + "\n");

  SvgLinePlot plot("2D alignment vs 3D error", "iteration", "value");
  std::vector<double> xs, e2, e3;
  for (const auto& row : result.trajectory) {
    xs.push_back(row.iter);
    e2.push_back(row.err2d * 1000.0);  // scale for shared axis
    e3.push_back(row.mpjpe);
  }
  plot.add_series("2D error (normalized x1000)", xs, e2, "#1f77b4");
  plot.add_series("MPJPE (mm)", xs, e3, "#d62728");
  plot.write((fs::path(out_dir) / "tradeoff.svg").string());
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pose tokenization and camera-bias experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "runs/out", skel_path, data_spec, format = "ptk";
  std::uint64_t seed = 0;
  int threads = 1;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic pose dataset");
  int gen_n = 5000, gen_joints = 21;
  gen->add_option("--n", gen_n, "number of poses");
  gen->add_option("--joints", gen_joints, "joints per pose");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--format", format, "ptk or jsonl");
  gen->add_option("--config", config_path, "JSON config file");

  // train-tokenizer
  auto* train = app.add_subcommand("train-tokenizer", "train the pose tokenizer");
  TokenizerConfig tcfg = TokenizerConfig::desk_scale();
  bool paper_scale = false, no_ema = false, no_reset = false;
  train->add_option("--data", data_spec, "dataset path, or synth / synth:N");
  train->add_option("--iters", tcfg.iterations, "training iterations");
  train->add_option("--batch", tcfg.batch_size, "batch size");
  train->add_option("--lr", tcfg.learning_rate, "learning rate");
  train->add_option("--seed", tcfg.seed, "seed");
  train->add_option("--tokens", tcfg.num_tokens, "token count M");
  train->add_option("--codebook-size", tcfg.codebook_size, "codebook entries K");
  train->add_option("--code-dim", tcfg.code_dim, "code dimension");
  train->add_option("--hidden", tcfg.hidden_dim, "conv width (0: code dim)");
  train->add_option("--noise-start", tcfg.noise_start, "initial augmentation noise");
  train->add_option("--dtype", tcfg.dtype, "f32 or f64");
  train->add_flag("--paper-scale", paper_scale, "use the full-size configuration");
  train->add_flag("--no-ema", no_ema, "learn the codebook by gradient instead of EMA");
  train->add_flag("--no-reset", no_reset, "disable dead-code reset");
  train->add_option("--threads", threads, "worker threads");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--skeleton", skel_path, "skeleton JSON (default: built-in humanoid)");
  train->add_option("--config", config_path, "JSON config file");

  // eval-tokenizer
  auto* eval = app.add_subcommand("eval-tokenizer", "evaluate a tokenizer checkpoint");
  std::string ckpt_stem;
  eval->add_option("--ckpt", ckpt_stem, "checkpoint stem (without .json/.bin)")->required();
  eval->add_option("--data", data_spec, "dataset path, or synth / synth:N")->required();
  eval->add_option("--seed", seed, "seed for synth data");
  eval->add_option("--out", out_dir, "output directory");
  eval->add_option("--skeleton", skel_path, "skeleton JSON");
  eval->add_option("--config", config_path, "JSON config file");

  // tals-thresholds
  auto* tals = app.add_subcommand("tals-thresholds", "estimate per-joint loss thresholds");
  int tals_scenes = 200;
  std::string wrong_cam = "fixed", pose_pairs;
  double alpha_pose = 0.01, alpha_2d = 0.01;
  tals->add_option("--scenes", tals_scenes, "synthetic scenes for 2D thresholds (0: skip)");
  tals->add_option("--seed", seed, "scene seed");
  tals->add_option("--wrong-cam", wrong_cam, "fixed, matched, or scale:<factor>");
  tals->add_option("--pose-pairs", pose_pairs, "JSONL of {pred, gt} pose pairs");
  tals->add_option("--alpha-pose", alpha_pose, "below-threshold pose scale");
  tals->add_option("--alpha-2d", alpha_2d, "below-threshold 2D scale");
  tals->add_option("--out", out_dir, "output directory");
  tals->add_option("--skeleton", skel_path, "skeleton JSON");
  tals->add_option("--config", config_path, "JSON config file");

  // bias
  auto* bias = app.add_subcommand("bias", "camera/pose bias experiments");
  bias->require_subcommand(1);
  auto* mismatch = bias->add_subcommand("mismatch", "PCK degradation under a wrong camera");
  int mm_scenes = 200;
  mismatch->add_option("--scenes", mm_scenes, "scene count");
  mismatch->add_option("--seed", seed, "scene seed");
  mismatch->add_option("--wrong-cam", wrong_cam, "fixed, matched, or scale:<factor>");
  mismatch->add_option("--out", out_dir, "output directory");
  mismatch->add_option("--skeleton", skel_path, "skeleton JSON");
  mismatch->add_option("--config", config_path, "JSON config file");

  auto* attack = bias->add_subcommand("attack", "2D-anchored 3D divergence optimization");
  AttackConfig acfg;
  int scene_index = 0;
  bool unfloored = false;
  attack->add_option("--iters", acfg.iterations, "optimization iterations");
  attack->add_option("--w2d", acfg.w_2d, "2D weight");
  attack->add_option("--w3d", acfg.w_3d, "3D weight");
  attack->add_option("--margin", acfg.margin, "margin");
  attack->add_option("--step", acfg.step_size, "step size");
  attack->add_option("--step-decay", acfg.step_decay, "per-iteration step decay");
  attack->add_flag("--unfloored", unfloored, "drop the max(0, .) floor");
  attack->add_option("--seed", seed, "scene seed");
  attack->add_option("--scene-index", scene_index, "scene index within the seed's list");
  attack->add_option("--out", out_dir, "output directory");
  attack->add_option("--skeleton", skel_path, "skeleton JSON");
  attack->add_option("--config", config_path, "JSON config file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }

  try {
    const json file_cfg = load_config_file(config_path);
    if (gen->parsed()) {
      merge(*gen, file_cfg, "--n", "n", gen_n);
      merge(*gen, file_cfg, "--joints", "joints", gen_joints);
      merge(*gen, file_cfg, "--seed", "seed", seed);
      merge(*gen, file_cfg, "--format", "format", format);
      return cmd_gen_data(out_dir, gen_n, gen_joints, seed, format);
    }
    if (train->parsed()) {
      if (paper_scale && train->count("--tokens") == 0 && train->count("--codebook-size") == 0 &&
          train->count("--code-dim") == 0) {
        const TokenizerConfig full;
        tcfg.num_tokens = full.num_tokens;
        tcfg.codebook_size = full.codebook_size;
        tcfg.code_dim = full.code_dim;
      }
      if (!config_path.empty()) {
        // Overlay the config file first; explicit flags then win below.
        TokenizerConfig flags_snapshot = tcfg;
        tcfg = TokenizerConfig::from_json(file_cfg.dump(), tcfg);
        auto keep = [&](const char* flag, auto member) {
          if (train->count(flag) > 0) tcfg.*member = flags_snapshot.*member;
        };
        keep("--iters", &TokenizerConfig::iterations);
        keep("--batch", &TokenizerConfig::batch_size);
        keep("--lr", &TokenizerConfig::learning_rate);
        keep("--seed", &TokenizerConfig::seed);
        keep("--tokens", &TokenizerConfig::num_tokens);
        keep("--codebook-size", &TokenizerConfig::codebook_size);
        keep("--code-dim", &TokenizerConfig::code_dim);
        keep("--hidden", &TokenizerConfig::hidden_dim);
        keep("--noise-start", &TokenizerConfig::noise_start);
        keep("--dtype", &TokenizerConfig::dtype);
        if (train->count("--data") == 0 && file_cfg.contains("data"))
          data_spec = file_cfg.at("data").get<std::string>();
        merge(*train, file_cfg, "--threads", "threads", threads);
      }
      if (no_ema) tcfg.use_ema = false;
      if (no_reset) tcfg.reset_interval = 0;
      if (data_spec.empty()) {
        std::cerr << "train-tokenizer: --data is required (path, synth, or synth:N)\n";
        return 2;
      }
      return cmd_train(tcfg, data_spec, skel_path, out_dir, threads);
    }
    if (eval->parsed()) return cmd_eval(ckpt_stem, data_spec, skel_path, out_dir, seed);
    if (tals->parsed()) {
      merge(*tals, file_cfg, "--scenes", "scenes", tals_scenes);
      merge(*tals, file_cfg, "--seed", "seed", seed);
      merge(*tals, file_cfg, "--wrong-cam", "wrong_cam", wrong_cam);
      return cmd_tals_thresholds(out_dir, tals_scenes, seed, wrong_cam, pose_pairs, skel_path,
                                 alpha_pose, alpha_2d);
    }
    if (mismatch->parsed()) {
      merge(*mismatch, file_cfg, "--scenes", "scenes", mm_scenes);
      merge(*mismatch, file_cfg, "--seed", "seed", seed);
      merge(*mismatch, file_cfg, "--wrong-cam", "wrong_cam", wrong_cam);
      return cmd_bias_mismatch(out_dir, mm_scenes, seed, wrong_cam, skel_path);
    }
    if (attack->parsed()) {
      merge(*attack, file_cfg, "--iters", "iters", acfg.iterations);
      merge(*attack, file_cfg, "--seed", "seed", seed);
      merge(*attack, file_cfg, "--w2d", "w2d", acfg.w_2d);
      merge(*attack, file_cfg, "--w3d", "w3d", acfg.w_3d);
      merge(*attack, file_cfg, "--margin", "margin", acfg.margin);
      if (unfloored) acfg.hinged = false;
      return cmd_bias_attack(out_dir, acfg, seed, scene_index, skel_path);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
