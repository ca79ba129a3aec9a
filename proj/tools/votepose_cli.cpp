// Command line front end.
//
// Subcommands:
//   keypoints  select keypoints on a PLY model and report their spread
//   simulate   generate a synthetic scene (and optionally a prediction)
//   estimate   run the voting pipeline on a scene + prediction
//   evaluate   score predictions against ground truth, write CSVs
//   sweep      batch experiments (occlusion sweep, keypoint ablation)
//
// Exit codes: 0 success, 1 runtime or data error, 2 usage error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <votepose/votepose.hpp>

namespace {

using namespace votepose;

nlohmann::json load_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

Vec3 parse_vec3(const nlohmann::json& arr, const std::string& context) {
  if (!arr.is_array() || arr.size() != 3) {
    throw InvalidArgument(context + " must be a [x, y, z] array");
  }
  return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

Pose parse_pose_array(const nlohmann::json& arr, const std::string& context) {
  if (!arr.is_array() || arr.size() != 12) {
    throw InvalidArgument(context +
                          " must be a 12-number [r00..r22, tx, ty, tz] array");
  }
  Pose pose;
  for (int i = 0; i < 9; ++i) pose.rotation.m[i] = arr[i].get<double>();
  pose.translation = {arr[9].get<double>(), arr[10].get<double>(),
                      arr[11].get<double>()};
  if (!satisfies_pose_invariants(pose)) {
    throw InvalidArgument(context + " is not a proper rigid pose");
  }
  return pose;
}

NoiseSpec parse_noise_spec(const nlohmann::json& j) {
  NoiseSpec noise;
  noise.offset_sigma = j.value("offset_sigma", 0.0);
  noise.outlier_rate = j.value("outlier_rate", 0.0);
  noise.label_error_rate = j.value("label_error_rate", 0.0);
  noise.distance_scaled = j.value("distance_scaled", false);
  validate_noise_spec(noise);
  return noise;
}

OcclusionMode parse_occlusion_mode(const std::string& name) {
  if (name == "random_drop") return OcclusionMode::random_drop;
  if (name == "half_space_cut") return OcclusionMode::half_space_cut;
  throw InvalidArgument("unknown occlusion_mode '" + name + "'");
}

/// Scene configs list instances with explicit 12-number poses; an
/// instance without a "pose" gets a reproducible random pose drawn from
/// the config seed and the translation box.
SceneSpec parse_scene_spec(const nlohmann::json& j) {
  SceneSpec spec;
  spec.frame_id = j.value("frame_id", 0);
  spec.rng_seed = j.value("rng_seed", std::uint64_t{0});
  spec.points_per_instance = j.value("points_per_instance", std::size_t{1000});
  spec.occlusion_fraction = j.value("occlusion_fraction", 0.0);
  spec.occlusion_mode =
      parse_occlusion_mode(j.value("occlusion_mode", "random_drop"));
  Vec3 lo{-0.5, -0.5, -0.5};
  Vec3 hi{0.5, 0.5, 0.5};
  if (j.contains("translation_lo")) {
    lo = parse_vec3(j.at("translation_lo"), "translation_lo");
  }
  if (j.contains("translation_hi")) {
    hi = parse_vec3(j.at("translation_hi"), "translation_hi");
  }
  if (!j.contains("instances") || !j.at("instances").is_array() ||
      j.at("instances").empty()) {
    throw InvalidArgument("scene config needs a non-empty instances array");
  }
  std::size_t k = 0;
  for (const auto& entry : j.at("instances")) {
    InstanceSpec inst;
    inst.class_id = entry.at("class_id").get<int>();
    if (entry.contains("pose")) {
      inst.pose = parse_pose_array(entry.at("pose"), "instance pose");
    } else {
      inst.pose = random_pose(
          derive_seed(spec.rng_seed,
                      static_cast<std::uint64_t>(spec.frame_id), 1000 + k),
          lo, hi);
    }
    spec.instances.push_back(inst);
    ++k;
  }
  validate_scene_spec(spec);
  return spec;
}

PipelineConfig parse_pipeline_config(const nlohmann::json& j) {
  PipelineConfig config;
  if (j.contains("segmentation")) {
    const auto& s = j.at("segmentation");
    config.segmentation.bandwidth =
        s.value("bandwidth", config.segmentation.bandwidth);
    config.segmentation.tol = s.value("tol", config.segmentation.tol);
    config.segmentation.max_iter =
        s.value("max_iter", config.segmentation.max_iter);
    config.segmentation.min_cluster_points =
        s.value("min_cluster_points", config.segmentation.min_cluster_points);
  }
  if (j.contains("aggregation")) {
    const auto& a = j.at("aggregation");
    config.aggregation.bandwidth =
        a.value("bandwidth", config.aggregation.bandwidth);
    config.aggregation.tol = a.value("tol", config.aggregation.tol);
    config.aggregation.max_iter =
        a.value("max_iter", config.aggregation.max_iter);
    config.aggregation.use_mean =
        a.value("use_mean", config.aggregation.use_mean);
  }
  config.weight_by_support = j.value("weight_by_support", false);
  return config;
}

KeypointMethod parse_keypoint_method(const std::string& name) {
  if (name == "fps4") return KeypointMethod::fps4;
  if (name == "fps8") return KeypointMethod::fps8;
  if (name == "fps12") return KeypointMethod::fps12;
  if (name == "bbox8") return KeypointMethod::bbox8;
  throw InvalidArgument("unknown keypoint method '" + name + "'");
}

int run_keypoints(const std::string& model_path, const std::string& method,
                  std::size_t m, bool m_given, int class_id,
                  const std::string& out_path) {
  if (method == "bbox8" && m_given) {
    std::cerr << "warning: --m is ignored for bbox8 (always 8 corners)\n";
  }
  const ObjectModel model = load_ply(model_path, class_id);

  KeypointFile file;
  file.class_id = class_id;
  file.method = method;
  if (method == "fps") {
    file.m = m;
    file.keypoints = fps_select(model, m);
  } else {
    file.m = 8;
    file.keypoints = bbox8_select(model);
    file.keypoints.insert(file.keypoints.begin(), model.center);
  }

  std::cout << "model: " << model.points.size() << " points, diameter "
            << format_double(model.diameter) << "\n";
  std::cout << "keypoints: " << file.keypoints.size()
            << " (center + " << (file.keypoints.size() - 1) << ")\n";
  std::cout << "mean distance to model surface: "
            << format_double(mean_keypoint_distance(model, file.keypoints))
            << "\n";
  if (!out_path.empty()) {
    save_keypoints(file, out_path);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int run_simulate(const std::string& registry_dir, const std::string& config,
                 const std::string& out_scene, const std::string& out_pred,
                 const std::string& pred_format_name,
                 const std::string& noise_config, std::uint64_t pred_seed) {
  const ModelRegistry registry = load_registry(registry_dir);
  const SceneSpec spec = parse_scene_spec(load_json(config));
  const Scene scene = generate_scene(spec, registry);
  save_scene(scene, out_scene);
  std::cout << "scene: " << scene.points.size() << " points, "
            << scene.instances.size() << " instances -> " << out_scene << "\n";

  if (!out_pred.empty()) {
    NoiseSpec noise;
    if (!noise_config.empty()) {
      noise = parse_noise_spec(load_json(noise_config));
    }
    const Prediction pred = oracle_predict(scene, registry, noise, pred_seed);
    const PredictionFormat fmt = pred_format_name == "binary"
                                     ? PredictionFormat::binary
                                     : PredictionFormat::json;
    save_prediction(pred, out_pred, fmt);
    std::cout << "prediction: " << pred.num_keypoints << " keypoints, "
              << pred.num_classes << " classes -> " << out_pred << "\n";
  }
  return 0;
}

int run_estimate(const std::string& registry_dir, const std::string& scene_path,
                 const std::string& pred_path, const std::string& out_path,
                 const std::string& config_path) {
  const ModelRegistry registry = load_registry(registry_dir);
  const Scene scene = load_scene(scene_path);
  const Prediction pred = load_prediction(pred_path);
  PipelineConfig config;
  if (!config_path.empty()) {
    config = parse_pipeline_config(load_json(config_path));
  }

  const std::vector<InstanceResult> results =
      run_pipeline(scene, pred, registry, config);
  std::size_t ok = 0;
  double max_rot = 0.0;
  double max_trans = 0.0;
  bool compared = false;
  for (const InstanceResult& res : results) {
    if (res.failed) continue;
    ++ok;
    if (res.majority_gt_instance < 0 ||
        static_cast<std::size_t>(res.majority_gt_instance) >=
            scene.instances.size()) {
      continue;
    }
    const SceneInstance& gt =
        scene.instances[static_cast<std::size_t>(res.majority_gt_instance)];
    if (gt.class_id != res.class_id) continue;
    compared = true;
    max_rot = std::max(
        max_rot, rotation_distance(res.pose.rotation, gt.gt_pose.rotation));
    max_trans = std::max(
        max_trans, distance(res.pose.translation, gt.gt_pose.translation));
  }

  std::cout << "clusters: " << results.size() << " (" << ok << " fitted, "
            << (results.size() - ok) << " failed)\n";
  if (compared) {
    std::cout << "max rotation error: " << format_double(max_rot) << " rad\n";
    std::cout << "max translation error: " << format_double(max_trans)
              << " m\n";
  } else {
    std::cout << "no estimates matched a ground-truth instance\n";
  }
  if (!out_path.empty()) {
    save_estimates(scene.frame_id, results, out_path);
    std::cout << "wrote " << out_path << "\n";
  }
  return 0;
}

int run_evaluate(const std::string& registry_dir,
                 const std::vector<std::string>& scene_paths,
                 const std::vector<std::string>& pred_paths,
                 const std::string& out_path, const std::string& curve_path,
                 double max_threshold, const std::string& config_path) {
  if (scene_paths.size() != pred_paths.size()) {
    throw InvalidArgument("need one --prediction per --scene");
  }
  const ModelRegistry registry = load_registry(registry_dir);
  PipelineConfig config;
  if (!config_path.empty()) {
    config = parse_pipeline_config(load_json(config_path));
  }

  std::vector<EvalRecord> records;
  for (std::size_t i = 0; i < scene_paths.size(); ++i) {
    const Scene scene = load_scene(scene_paths[i]);
    const Prediction pred = load_prediction(pred_paths[i]);
    const std::vector<InstanceResult> results =
        run_pipeline(scene, pred, registry, config);
    std::vector<EvalRecord> recs = evaluate_scene(scene, results, registry);
    records.insert(records.end(), recs.begin(), recs.end());
  }
  if (records.empty()) throw Error("no ground-truth instances to evaluate");

  std::vector<double> add;
  std::vector<double> adds;
  for (const EvalRecord& r : records) {
    add.push_back(r.add);
    adds.push_back(r.adds);
  }
  const std::vector<double> headline = symmetric_aware_distances(records);

  std::cout << "instances evaluated: " << records.size() << "\n";
  std::cout << "ADD AUC (max " << format_double(max_threshold)
            << "): " << format_double(auc(add, max_threshold)) << "\n";
  std::cout << "ADD-S AUC (max " << format_double(max_threshold)
            << "): " << format_double(auc(adds, max_threshold)) << "\n";
  std::cout << "accuracy < 2 cm (symmetric-aware): "
            << format_double(accuracy_at(headline, 0.02)) << "\n";

  if (!out_path.empty()) {
    save_results(records, out_path);
    std::cout << "wrote " << out_path << "\n";
  }
  if (!curve_path.empty()) {
    write_file_atomic(curve_path,
                      format_curve_csv(headline, max_threshold, 100));
    std::cout << "wrote " << curve_path << "\n";
  }
  return 0;
}

int run_sweep(const std::string& registry_dir, const std::string& config_path,
              const std::string& out_path, unsigned threads) {
  const ModelRegistry registry = load_registry(registry_dir);
  const nlohmann::json j = load_json(config_path);
  const std::string mode = j.value("mode", "occlusion");

  if (mode == "occlusion") {
    const SceneSpec base = parse_scene_spec(j.at("scene"));
    NoiseSpec noise;
    if (j.contains("noise")) noise = parse_noise_spec(j.at("noise"));
    const auto fractions = j.at("fractions").get<std::vector<double>>();
    SweepOptions opt;
    opt.trials = j.value("trials", opt.trials);
    opt.accuracy_threshold =
        j.value("accuracy_threshold", opt.accuracy_threshold);
    opt.threads = threads;
    if (j.contains("pipeline")) {
      opt.pipeline = parse_pipeline_config(j.at("pipeline"));
    }
    const std::vector<OcclusionSweepRow> rows =
        occlusion_sweep(base, noise, registry, fractions, opt);
    write_file_atomic(out_path, format_occlusion_csv(rows));
    for (const OcclusionSweepRow& r : rows) {
      std::cout << "occlusion " << format_double(r.fraction) << ": acc "
                << format_double(r.acc) << ", mean ADD "
                << format_double(r.mean_add) << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }
  if (mode == "ablation") {
    NoiseSpec noise;
    if (j.contains("noise")) noise = parse_noise_spec(j.at("noise"));
    std::vector<KeypointMethod> methods;
    for (const auto& name : j.at("methods")) {
      methods.push_back(parse_keypoint_method(name.get<std::string>()));
    }
    AblationOptions opt;
    opt.trials = j.value("trials", opt.trials);
    opt.points_per_instance =
        j.value("points_per_instance", opt.points_per_instance);
    opt.accuracy_threshold =
        j.value("accuracy_threshold", opt.accuracy_threshold);
    opt.rng_seed = j.value("rng_seed", opt.rng_seed);
    opt.threads = threads;
    if (j.contains("pipeline")) {
      opt.pipeline = parse_pipeline_config(j.at("pipeline"));
    }
    if (j.contains("translation_lo")) {
      opt.translation_lo = parse_vec3(j.at("translation_lo"), "translation_lo");
    }
    if (j.contains("translation_hi")) {
      opt.translation_hi = parse_vec3(j.at("translation_hi"), "translation_hi");
    }
    const std::vector<AblationRow> rows =
        keypoint_ablation(registry, noise, methods, opt);
    write_file_atomic(out_path, format_ablation_csv(rows));
    for (const AblationRow& r : rows) {
      std::cout << keypoint_method_name(r.method) << ": mean ADD "
                << format_double(r.mean_add) << ", acc "
                << format_double(r.acc) << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return 0;
  }
  throw InvalidArgument("sweep mode must be 'occlusion' or 'ablation'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"3D keypoint voting pose estimation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "votepose 0.1.0");

  // keypoints
  auto* kp = app.add_subcommand(
      "keypoints", "Select keypoints on a PLY model and report their spread");
  std::string kp_model;
  std::string kp_method = "fps";
  std::size_t kp_m = 8;
  int kp_class = 0;
  std::string kp_out;
  kp->add_option("--model", kp_model, "ASCII PLY model file")
      ->required()
      ->check(CLI::ExistingFile);
  kp->add_option("--method", kp_method, "Selection method")
      ->check(CLI::IsMember({"fps", "bbox8"}))
      ->capture_default_str();
  auto* kp_m_opt =
      kp->add_option("--m", kp_m, "Keypoint count for fps")
          ->capture_default_str();
  kp->add_option("--class-id", kp_class, "Class id stored in the output")
      ->capture_default_str();
  kp->add_option("--out", kp_out, "Write a keypoints JSON file");
  kp->callback([&]() {
    if (kp_method == "fps" && kp_m == 0) {
      throw CLI::ValidationError("--m", "fps needs at least one keypoint");
    }
    run_keypoints(kp_model, kp_method, kp_m, kp_m_opt->count() > 0, kp_class,
                  kp_out);
  });

  // simulate
  auto* sim = app.add_subcommand(
      "simulate", "Generate a synthetic scene and optional prediction");
  std::string sim_registry;
  std::string sim_config;
  std::string sim_out;
  std::string sim_pred;
  std::string sim_pred_format = "json";
  std::string sim_noise;
  std::uint64_t sim_pred_seed = 1;
  sim->add_option("--registry", sim_registry,
                  "Model registry directory (registry.json)")
      ->required()
      ->check(CLI::ExistingDirectory);
  sim->add_option("--config", sim_config, "Scene config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sim->add_option("--out", sim_out, "Output scene file")->required();
  sim->add_option("--prediction", sim_pred,
                  "Also write a synthetic prediction here");
  sim->add_option("--prediction-format", sim_pred_format,
                  "Prediction file format")
      ->check(CLI::IsMember({"json", "binary"}))
      ->capture_default_str();
  sim->add_option("--noise-config", sim_noise,
                  "Noise spec JSON for the prediction")
      ->check(CLI::ExistingFile);
  sim->add_option("--prediction-seed", sim_pred_seed,
                  "Seed for prediction noise")
      ->capture_default_str();
  sim->callback([&]() {
    run_simulate(sim_registry, sim_config, sim_out, sim_pred, sim_pred_format,
                 sim_noise, sim_pred_seed);
  });

  // estimate
  auto* est = app.add_subcommand(
      "estimate", "Run the voting pipeline on a scene and prediction");
  std::string est_registry;
  std::string est_scene;
  std::string est_pred;
  std::string est_out;
  std::string est_config;
  est->add_option("--registry", est_registry, "Model registry directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  est->add_option("--scene", est_scene, "Scene file")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--prediction", est_pred, "Prediction file")
      ->required()
      ->check(CLI::ExistingFile);
  est->add_option("--out", est_out, "Write an estimates CSV");
  est->add_option("--config", est_config, "Pipeline config JSON")
      ->check(CLI::ExistingFile);
  est->callback([&]() {
    run_estimate(est_registry, est_scene, est_pred, est_out, est_config);
  });

  // evaluate
  auto* ev = app.add_subcommand(
      "evaluate", "Score predictions against scene ground truth");
  std::string ev_registry;
  std::vector<std::string> ev_scenes;
  std::vector<std::string> ev_preds;
  std::string ev_out;
  std::string ev_curve;
  double ev_max = 0.1;
  std::string ev_config;
  ev->add_option("--registry", ev_registry, "Model registry directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  ev->add_option("--scene", ev_scenes, "Scene file (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--prediction", ev_preds,
                 "Prediction file, one per scene (repeatable)")
      ->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Write a per-instance results CSV");
  ev->add_option("--curve", ev_curve, "Write an accuracy-vs-threshold CSV");
  ev->add_option("--max-threshold", ev_max, "AUC integration limit (m)")
      ->capture_default_str();
  ev->add_option("--config", ev_config, "Pipeline config JSON")
      ->check(CLI::ExistingFile);
  ev->callback([&]() {
    run_evaluate(ev_registry, ev_scenes, ev_preds, ev_out, ev_curve, ev_max,
                 ev_config);
  });

  // sweep
  auto* sw = app.add_subcommand(
      "sweep", "Batch experiments: occlusion sweep or keypoint ablation");
  std::string sw_registry;
  std::string sw_config;
  std::string sw_out;
  unsigned sw_threads = 0;
  sw->add_option("--registry", sw_registry, "Model registry directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  sw->add_option("--config", sw_config, "Sweep config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  sw->add_option("--out", sw_out, "Output CSV")->required();
  sw->add_option("--threads", sw_threads,
                 "Worker threads (0 = hardware concurrency)")
      ->capture_default_str();
  sw->callback(
      [&]() { run_sweep(sw_registry, sw_config, sw_out, sw_threads); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const votepose::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
