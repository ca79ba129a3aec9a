#pragma once

// Synthetic scenes and a noise-controlled oracle predictor standing in
// for a learned per-point network, plus the end-to-end pipeline and the
// batch experiments built on it. The oracle knows the ground truth and
// corrupts it on request (Gaussian offset noise, optionally scaled with
// target distance; uniform outlier votes; mislabeled points), which makes
// every downstream claim testable against dialed-in inputs.
//
// Determinism contract: everything here is a pure function of
// (spec, noise, seeds, config). Scene generation draws from one derived
// stream per (master seed, frame, instance); batch experiments derive one
// seed pair per trial cell. Worker threads only ever claim whole trials
// and write to preallocated slots, so results are bit-identical for any
// thread count, including 1.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/geometry.hpp"
#include "votepose/metrics.hpp"
#include "votepose/pose_fit.hpp"
#include "votepose/random.hpp"
#include "votepose/registry.hpp"
#include "votepose/voting.hpp"

namespace votepose {

enum class OcclusionMode { random_drop, half_space_cut };

struct InstanceSpec {
  int class_id = 0;
  Pose pose{};
};

struct SceneSpec {
  std::vector<InstanceSpec> instances;
  std::size_t points_per_instance = 1000;
  double occlusion_fraction = 0.0;  // in [0, 1)
  OcclusionMode occlusion_mode = OcclusionMode::random_drop;
  std::uint64_t rng_seed = 0;
  int frame_id = 0;
};

struct NoiseSpec {
  double offset_sigma = 0.0;      // meters
  double outlier_rate = 0.0;      // per-vote probability, in [0, 1]
  double label_error_rate = 0.0;  // per-point probability, in [0, 1]
  // When set, sigma grows with how far the target is from the voting
  // point: sigma_eff = sigma * (1 + |gt_offset| / model diameter). This
  // is what penalizes far-away virtual keypoints such as box corners.
  bool distance_scaled = false;
};

inline void validate_scene_spec(const SceneSpec& spec) {
  if (spec.points_per_instance < 1) {
    throw InvalidArgument("scene spec needs points_per_instance >= 1");
  }
  if (!(spec.occlusion_fraction >= 0.0) || spec.occlusion_fraction >= 1.0) {
    throw InvalidArgument("occlusion_fraction must lie in [0, 1)");
  }
}

inline void validate_noise_spec(const NoiseSpec& noise) {
  if (!(noise.offset_sigma >= 0.0) || !std::isfinite(noise.offset_sigma)) {
    throw InvalidArgument("offset_sigma must be finite and >= 0");
  }
  if (!(noise.outlier_rate >= 0.0) || noise.outlier_rate > 1.0) {
    throw InvalidArgument("outlier_rate must lie in [0, 1]");
  }
  if (!(noise.label_error_rate >= 0.0) || noise.label_error_rate > 1.0) {
    throw InvalidArgument("label_error_rate must lie in [0, 1]");
  }
}

/// Samples each instance's surface (points_per_instance draws with
/// replacement), transforms into the camera frame, removes the occluded
/// fraction, and attaches ground-truth labels. Same spec, same bits.
inline Scene generate_scene(const SceneSpec& spec,
                            const ModelRegistry& registry) {
  validate_scene_spec(spec);
  Scene scene;
  scene.frame_id = spec.frame_id;

  for (std::size_t k = 0; k < spec.instances.size(); ++k) {
    const InstanceSpec& inst = spec.instances[k];
    const ObjectModel& model = registry.get(inst.class_id);
    if (!satisfies_pose_invariants(inst.pose)) {
      throw InvalidArgument("instance pose violates rotation invariants");
    }
    Rng rng(derive_seed(spec.rng_seed,
                        static_cast<std::uint64_t>(spec.frame_id), k));

    const std::size_t n = spec.points_per_instance;
    std::vector<Vec3> pts(n);
    for (std::size_t i = 0; i < n; ++i) {
      pts[i] = transform_point(
          inst.pose, model.points[rng.uniform_index(model.points.size())]);
    }

    const std::size_t removed =
        static_cast<std::size_t>(spec.occlusion_fraction *
                                 static_cast<double>(n));
    std::vector<std::size_t> keep;
    if (removed == 0) {
      keep.resize(n);
      std::iota(keep.begin(), keep.end(), std::size_t{0});
    } else if (spec.occlusion_mode == OcclusionMode::random_drop) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      for (std::size_t i = 0; i < removed; ++i) {  // partial Fisher-Yates
        std::swap(order[i], order[i + rng.uniform_index(n - i)]);
      }
      keep.assign(order.begin() + static_cast<std::ptrdiff_t>(removed),
                  order.end());
      std::sort(keep.begin(), keep.end());
    } else {
      // Cut with a plane normal to a random direction, positioned so that
      // exactly `removed` points fall on the removed side: drop the
      // points with the largest coordinate along the normal.
      const Vec3 normal = rng.unit_vector();
      const Vec3 centroid = transform_point(inst.pose, model.center);
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::sort(order.begin(), order.end(),
                [&](std::size_t a, std::size_t b) {
                  const double sa = dot(pts[a] - centroid, normal);
                  const double sb = dot(pts[b] - centroid, normal);
                  if (sa != sb) return sa > sb;
                  return a < b;
                });
      keep.assign(order.begin() + static_cast<std::ptrdiff_t>(removed),
                  order.end());
      std::sort(keep.begin(), keep.end());
    }

    for (std::size_t i : keep) {
      scene.points.push_back(pts[i]);
      scene.gt_class.push_back(inst.class_id);
      scene.gt_instance.push_back(static_cast<int>(k));
    }
    scene.instances.push_back(
        SceneInstance{inst.class_id, inst.pose, n});
  }
  return scene;
}

/// Ground-truth-derived per-point prediction with controlled corruption.
/// For every member point, each keypoint/center offset is the true offset
/// plus isotropic Gaussian noise (optionally distance-scaled); with
/// probability outlier_rate a vote's target is replaced by a uniform draw
/// inside the scene bounding box. Class scores peak at 0.99 on the true
/// class, uniformly sharing the rest; with probability label_error_rate
/// the peak moves to a uniformly random wrong class. Background points
/// get background-peaked scores and zero offsets.
inline Prediction oracle_predict(const Scene& scene,
                                 const ModelRegistry& registry,
                                 const NoiseSpec& noise,
                                 std::uint64_t rng_seed) {
  validate_noise_spec(noise);
  if (registry.empty()) {
    throw InvalidArgument("oracle_predict needs a non-empty registry");
  }

  std::size_t num_keypoints = 0;
  bool have_m = false;
  for (const SceneInstance& inst : scene.instances) {
    const std::size_t m = registry.get(inst.class_id).keypoints.size();
    if (have_m && m != num_keypoints) {
      throw InvalidArgument(
          "scene mixes models with different keypoint counts");
    }
    num_keypoints = m;
    have_m = true;
  }
  if (!have_m) {
    num_keypoints = registry.get(registry.class_ids().front()).keypoints.size();
  }

  Prediction pred;
  pred.num_points = scene.points.size();
  pred.num_keypoints = num_keypoints;
  pred.num_classes = registry.num_classes();
  pred.kp_offsets.assign(pred.num_points * pred.num_keypoints, Vec3{});
  pred.center_offsets.assign(pred.num_points, Vec3{});
  pred.class_scores.assign(pred.num_points * pred.num_classes, 0.0);

  Vec3 lo{}, hi{};
  if (!scene.points.empty()) {
    lo = hi = scene.points.front();
    for (const Vec3& p : scene.points) {
      lo.x = std::min(lo.x, p.x);
      lo.y = std::min(lo.y, p.y);
      lo.z = std::min(lo.z, p.z);
      hi.x = std::max(hi.x, p.x);
      hi.y = std::max(hi.y, p.y);
      hi.z = std::max(hi.z, p.z);
    }
  }

  Rng rng(derive_seed(rng_seed, static_cast<std::uint64_t>(scene.frame_id)));
  const std::size_t c_total = pred.num_classes;

  auto noisy_offset = [&](const Vec3& point, const Vec3& target,
                          double diameter) {
    const Vec3 gt_off = target - point;
    double sigma = noise.offset_sigma;
    if (noise.distance_scaled && diameter > 0.0) {
      sigma *= 1.0 + norm(gt_off) / diameter;
    }
    Vec3 off = gt_off + rng.gaussian_vec3(sigma);
    if (rng.uniform01() < noise.outlier_rate) {
      const Vec3 u{rng.uniform(lo.x, hi.x), rng.uniform(lo.y, hi.y),
                   rng.uniform(lo.z, hi.z)};
      off = u - point;
    }
    return off;
  };

  auto fill_scores = [&](std::size_t i, int peak_class) {
    double* row = pred.class_scores.data() + i * c_total;
    if (c_total == 1) {
      row[0] = 1.0;
      return;
    }
    const double rest = 0.01 / static_cast<double>(c_total - 1);
    for (std::size_t c = 0; c < c_total; ++c) row[c] = rest;
    row[static_cast<std::size_t>(peak_class)] = 0.99;
  };

  for (std::size_t i = 0; i < pred.num_points; ++i) {
    const int inst_id = scene.gt_instance[i];
    if (inst_id < 0) {
      fill_scores(i, 0);
      continue;
    }
    const SceneInstance& inst =
        scene.instances[static_cast<std::size_t>(inst_id)];
    const ObjectModel& model = registry.get(inst.class_id);
    const Vec3& x = scene.points[i];

    for (std::size_t j = 0; j < num_keypoints; ++j) {
      pred.kp_offset(i, j) = noisy_offset(
          x, transform_point(inst.gt_pose, model.keypoints[j]),
          model.diameter);
    }
    pred.center_offsets[i] = noisy_offset(
        x, transform_point(inst.gt_pose, model.center), model.diameter);

    int label = inst.class_id;
    if (c_total >= 2 && rng.uniform01() < noise.label_error_rate) {
      std::size_t wrong = rng.uniform_index(c_total - 1);
      if (wrong >= static_cast<std::size_t>(label)) ++wrong;
      label = static_cast<int>(wrong);
    }
    fill_scores(i, label);
  }
  return pred;
}

struct PipelineConfig {
  SegmentationParams segmentation{};
  AggregationParams aggregation{};
  // Weight the pose fit by per-keypoint vote support instead of uniformly.
  bool weight_by_support = false;
};

/// One pose hypothesis out of the pipeline. `failed` marks clusters whose
/// pose could not be estimated (too few keypoints or a degenerate fit);
/// their pose is identity and must not be consumed.
struct InstanceResult {
  int class_id = 0;
  Pose pose{};
  KeypointEstimate keypoints;
  bool failed = false;
  std::size_t cluster_size = 0;
  // Dominant ground-truth instance among the cluster's points (ties to
  // the smaller id, -1 when mostly background); evaluation joins on this.
  int majority_gt_instance = -1;
};

/// Full geometric pipeline: instance segmentation by center voting,
/// per-instance keypoint aggregation, and a least-squares pose per
/// cluster fit against the registry keypoints (center at index 0).
inline std::vector<InstanceResult> run_pipeline(
    const Scene& scene, const Prediction& pred, const ModelRegistry& registry,
    const PipelineConfig& config = {}) {
  std::vector<InstanceCluster> clusters =
      segment_instances(scene, pred, config.segmentation);

  std::vector<InstanceResult> results;
  results.reserve(clusters.size());
  for (const InstanceCluster& cluster : clusters) {
    InstanceResult res;
    res.class_id = cluster.class_id;
    res.cluster_size = cluster.point_indices.size();

    std::map<int, std::size_t> votes;
    for (std::size_t idx : cluster.point_indices) {
      ++votes[scene.gt_instance[idx]];
    }
    std::size_t best_count = 0;
    for (const auto& [gi, count] : votes) {  // ascending id: ties to smaller
      if (count > best_count) {
        best_count = count;
        res.majority_gt_instance = gi;
      }
    }

    if (!registry.contains(cluster.class_id)) {
      res.failed = true;
      results.push_back(std::move(res));
      continue;
    }
    const ObjectModel& model = registry.get(cluster.class_id);
    if (pred.num_keypoints != model.keypoints.size()) {
      throw InvalidArgument(
          "prediction keypoint count disagrees with registry model");
    }

    res.keypoints =
        aggregate_keypoints(cluster, scene, pred, config.aggregation);

    Correspondences corr;
    corr.camera_kps = res.keypoints.positions;
    corr.object_kps = model.keypoints;
    std::vector<double> weights;
    if (config.weight_by_support) {
      weights.reserve(res.keypoints.support.size());
      for (std::size_t s : res.keypoints.support) {
        weights.push_back(static_cast<double>(s));
      }
    }
    try {
      res.pose = least_squares_fit(corr, weights);
    } catch (const Error&) {
      res.failed = true;
    }
    results.push_back(std::move(res));
  }
  return results;
}

/// Scores pipeline output against a scene's ground truth: every ground-
/// truth instance gets one record, matched to the largest non-failed
/// cluster whose points it dominates. Unmatched instances get
/// add = adds = +infinity (they count as misses at every threshold).
inline std::vector<EvalRecord> evaluate_scene(
    const Scene& scene, const std::vector<InstanceResult>& results,
    const ModelRegistry& registry) {
  std::vector<EvalRecord> records;
  records.reserve(scene.instances.size());
  const double inf = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < scene.instances.size(); ++k) {
    const SceneInstance& inst = scene.instances[k];
    EvalRecord rec;
    rec.frame_id = scene.frame_id;
    rec.class_id = inst.class_id;
    rec.instance_id = static_cast<int>(k);
    rec.symmetric = registry.is_symmetric(inst.class_id);
    rec.invisible_fraction = invisible_fraction(scene, static_cast<int>(k));

    const InstanceResult* best = nullptr;
    for (const InstanceResult& res : results) {
      if (res.failed || res.majority_gt_instance != static_cast<int>(k)) {
        continue;
      }
      if (best == nullptr || res.cluster_size > best->cluster_size) {
        best = &res;
      }
    }
    if (best == nullptr) {
      rec.add = inf;
      rec.adds = inf;
    } else {
      const ObjectModel& model = registry.get(inst.class_id);
      rec.add = add_distance(model, best->pose, inst.gt_pose);
      rec.adds = adds_distance(model, best->pose, inst.gt_pose);
    }
    records.push_back(rec);
  }
  return records;
}

/// ADD for asymmetric objects, ADD-S for symmetric ones; the distance the
/// headline accuracy numbers are computed over.
inline std::vector<double> symmetric_aware_distances(
    const std::vector<EvalRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records) out.push_back(r.symmetric ? r.adds : r.add);
  return out;
}

inline std::vector<double> closest_point_distances(
    const std::vector<EvalRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const EvalRecord& r : records) out.push_back(r.adds);
  return out;
}

/// Runs fn(0), ..., fn(n-1) on up to `threads` workers (0 = hardware
/// concurrency). Callers make fn(i) write only to slot i of preallocated
/// storage; the claim order is the only nondeterministic part, so results
/// never depend on the thread count.
template <typename Fn>
void run_parallel(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) {
    threads = std::max(1u, std::thread::hardware_concurrency());
  }
  if (n < 2 || threads < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct SweepOptions {
  int trials = 50;
  double accuracy_threshold = 0.02;
  unsigned threads = 0;
  PipelineConfig pipeline{};
};

struct OcclusionSweepRow {
  double fraction = 0.0;
  int trials = 0;
  double acc = 0.0;       // accuracy_at(ADD-S, threshold), failures count
  double mean_add = 0.0;  // over successfully estimated instances
  double mean_adds = 0.0;
};

namespace detail {

inline double finite_mean(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : values) {
    if (std::isfinite(v)) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) return std::numeric_limits<double>::infinity();
  return sum / static_cast<double>(count);
}

}  // namespace detail

/// Re-runs the base scene at each occlusion fraction for `trials`
/// independently seeded trials and reports accuracy and mean errors per
/// fraction. Every trial cell derives its own scene and prediction seeds
/// from the base spec's seed, so the sweep is reproducible and
/// thread-count independent.
inline std::vector<OcclusionSweepRow> occlusion_sweep(
    const SceneSpec& base, const NoiseSpec& noise,
    const ModelRegistry& registry, const std::vector<double>& fractions,
    const SweepOptions& opt = {}) {
  if (fractions.empty()) {
    throw InvalidArgument("occlusion_sweep needs >= 1 fraction");
  }
  for (double f : fractions) {
    if (!(f >= 0.0) || f >= 1.0) {
      throw InvalidArgument("occlusion fractions must lie in [0, 1)");
    }
  }
  if (opt.trials < 1) throw InvalidArgument("occlusion_sweep needs trials >= 1");
  if (base.instances.empty()) {
    throw InvalidArgument("occlusion_sweep base spec needs >= 1 instance");
  }
  validate_noise_spec(noise);

  const std::size_t trials = static_cast<std::size_t>(opt.trials);
  std::vector<std::vector<EvalRecord>> cells(fractions.size() * trials);
  run_parallel(cells.size(), opt.threads, [&](std::size_t idx) {
    const std::size_t fi = idx / trials;
    const std::size_t t = idx % trials;
    SceneSpec spec = base;
    spec.occlusion_fraction = fractions[fi];
    spec.frame_id = static_cast<int>(t);
    spec.rng_seed = derive_seed(base.rng_seed, 2 * fi, t);
    const Scene scene = generate_scene(spec, registry);
    const Prediction pred = oracle_predict(
        scene, registry, noise, derive_seed(base.rng_seed, 2 * fi + 1, t));
    cells[idx] = evaluate_scene(
        scene, run_pipeline(scene, pred, registry, opt.pipeline), registry);
  });

  std::vector<OcclusionSweepRow> rows;
  rows.reserve(fractions.size());
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    std::vector<double> adds, add;
    for (std::size_t t = 0; t < trials; ++t) {
      for (const EvalRecord& rec : cells[fi * trials + t]) {
        adds.push_back(rec.adds);
        add.push_back(rec.add);
      }
    }
    OcclusionSweepRow row;
    row.fraction = fractions[fi];
    row.trials = opt.trials;
    row.acc = accuracy_at(adds, opt.accuracy_threshold);
    row.mean_add = detail::finite_mean(add);
    row.mean_adds = detail::finite_mean(adds);
    rows.push_back(row);
  }
  return rows;
}

struct AblationOptions {
  int trials = 200;
  std::size_t points_per_instance = 500;
  double accuracy_threshold = 0.02;
  std::uint64_t rng_seed = 0;
  unsigned threads = 0;
  PipelineConfig pipeline{};
  Vec3 translation_lo{-0.5, -0.5, -0.5};
  Vec3 translation_hi{0.5, 0.5, 0.5};
};

struct AblationRow {
  KeypointMethod method = KeypointMethod::fps8;
  int trials = 0;
  double mean_add = 0.0;
  double acc = 0.0;
  // Per-trial ADD (+inf for failures), aligned across methods: trial t
  // uses the same scene for every method, so rows can be compared paired.
  std::vector<double> per_trial_add;
};

/// Compares keypoint selection schemes end to end. Each trial places one
/// model (cycling through the registry) at a random pose, simulates,
/// runs the pipeline with the method's keypoints, and records ADD. Scene
/// seeds do not depend on the method, only predictions do.
inline std::vector<AblationRow> keypoint_ablation(
    const ModelRegistry& base, const NoiseSpec& noise,
    const std::vector<KeypointMethod>& methods,
    const AblationOptions& opt = {}) {
  if (methods.empty()) throw InvalidArgument("keypoint_ablation needs methods");
  if (opt.trials < 1) throw InvalidArgument("keypoint_ablation needs trials >= 1");
  if (base.empty()) throw InvalidArgument("keypoint_ablation needs models");
  validate_noise_spec(noise);

  const std::vector<int> ids = base.class_ids();
  std::vector<AblationRow> rows;
  rows.reserve(methods.size());

  for (const KeypointMethod method : methods) {
    ModelRegistry registry;
    for (int id : ids) {
      ObjectModel model = base.get(id);
      select_keypoints(model, method);
      registry.add(std::move(model), base.is_symmetric(id));
    }

    AblationRow row;
    row.method = method;
    row.trials = opt.trials;
    row.per_trial_add.assign(static_cast<std::size_t>(opt.trials), 0.0);
    run_parallel(row.per_trial_add.size(), opt.threads, [&](std::size_t t) {
      Rng pose_rng(derive_seed(opt.rng_seed, 2, t));
      SceneSpec spec;
      spec.instances.push_back(InstanceSpec{
          ids[t % ids.size()],
          random_pose(pose_rng, opt.translation_lo, opt.translation_hi)});
      spec.points_per_instance = opt.points_per_instance;
      spec.rng_seed = derive_seed(opt.rng_seed, 0, t);
      spec.frame_id = static_cast<int>(t);
      const Scene scene = generate_scene(spec, registry);
      const Prediction pred = oracle_predict(scene, registry, noise,
                                             derive_seed(opt.rng_seed, 1, t));
      const std::vector<EvalRecord> recs = evaluate_scene(
          scene, run_pipeline(scene, pred, registry, opt.pipeline), registry);
      row.per_trial_add[t] = recs.front().add;
    });
    row.mean_add = detail::finite_mean(row.per_trial_add);
    row.acc = accuracy_at(row.per_trial_add, opt.accuracy_threshold);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Evaluates `frames` independently seeded frames of the base spec and
/// concatenates their records in frame order. Deterministic for any
/// thread count; the batch behind the reproducibility checks.
inline std::vector<EvalRecord> batch_evaluate(
    const SceneSpec& base, const NoiseSpec& noise,
    const ModelRegistry& registry, int frames, unsigned threads = 0,
    const PipelineConfig& config = {}) {
  if (frames < 1) throw InvalidArgument("batch_evaluate needs frames >= 1");
  validate_noise_spec(noise);
  std::vector<std::vector<EvalRecord>> per_frame(
      static_cast<std::size_t>(frames));
  run_parallel(per_frame.size(), threads, [&](std::size_t f) {
    SceneSpec spec = base;
    spec.frame_id = static_cast<int>(f);
    spec.rng_seed = derive_seed(base.rng_seed, 0, f);
    const Scene scene = generate_scene(spec, registry);
    const Prediction pred = oracle_predict(scene, registry, noise,
                                           derive_seed(base.rng_seed, 1, f));
    per_frame[f] = evaluate_scene(
        scene, run_pipeline(scene, pred, registry, config), registry);
  });
  std::vector<EvalRecord> records;
  for (const auto& frame_records : per_frame) {
    records.insert(records.end(), frame_records.begin(), frame_records.end());
  }
  return records;
}

}  // namespace votepose
