#pragma once

// The set of known object models, keyed by class id. Class 0 is reserved
// for background, so registered models must use ids >= 1. Models stored
// here carry their selected keypoints with the object center guaranteed
// at index 0 (surface selections like FPS already start with the center;
// box-corner selections get it prepended), which is the layout the pose
// stage fits against.

#include <map>
#include <vector>

#include "votepose/errors.hpp"
#include "votepose/keypoints.hpp"

namespace votepose {

enum class KeypointMethod { fps4, fps8, fps12, bbox8 };

inline const char* keypoint_method_name(KeypointMethod m) {
  switch (m) {
    case KeypointMethod::fps4: return "fps4";
    case KeypointMethod::fps8: return "fps8";
    case KeypointMethod::fps12: return "fps12";
    case KeypointMethod::bbox8: return "bbox8";
  }
  return "?";
}

/// Selects keypoints for `model` by the named method and installs them
/// with the center-first layout.
inline void select_keypoints(ObjectModel& model, KeypointMethod method) {
  switch (method) {
    case KeypointMethod::fps4:
      model.keypoints = fps_select(model, 4);
      break;
    case KeypointMethod::fps8:
      model.keypoints = fps_select(model, 8);
      break;
    case KeypointMethod::fps12:
      model.keypoints = fps_select(model, 12);
      break;
    case KeypointMethod::bbox8: {
      std::vector<Vec3> kps = bbox8_select(model);
      kps.insert(kps.begin(), model.center);
      model.keypoints = std::move(kps);
      break;
    }
  }
}

class ModelRegistry {
 public:
  /// Registers a model. Requires class_id >= 1, non-empty points and
  /// keypoints with the center at index 0.
  void add(ObjectModel model, bool symmetric = false) {
    if (model.class_id < 1) {
      throw InvalidArgument("registry class ids must be >= 1 (0 = background)");
    }
    if (model.points.empty()) {
      throw InvalidArgument("registry models need points");
    }
    if (model.keypoints.empty() || model.keypoints.front() != model.center) {
      throw InvalidArgument(
          "registry models need keypoints with the center at index 0");
    }
    symmetric_[model.class_id] = symmetric;
    models_[model.class_id] = std::move(model);
  }

  bool contains(int class_id) const { return models_.count(class_id) > 0; }

  const ObjectModel& get(int class_id) const {
    auto it = models_.find(class_id);
    if (it == models_.end()) {
      throw UnknownModel("no model registered for class id " +
                         std::to_string(class_id));
    }
    return it->second;
  }

  bool is_symmetric(int class_id) const {
    auto it = symmetric_.find(class_id);
    if (it == symmetric_.end()) {
      throw UnknownModel("no model registered for class id " +
                         std::to_string(class_id));
    }
    return it->second;
  }

  /// Ascending class ids.
  std::vector<int> class_ids() const {
    std::vector<int> ids;
    ids.reserve(models_.size());
    for (const auto& [id, m] : models_) ids.push_back(id);
    return ids;
  }

  /// Number of score columns a prediction needs: background plus every id
  /// up to the largest registered one.
  std::size_t num_classes() const {
    if (models_.empty()) return 1;
    return static_cast<std::size_t>(models_.rbegin()->first) + 1;
  }

  bool empty() const { return models_.empty(); }
  std::size_t size() const { return models_.size(); }

 private:
  std::map<int, ObjectModel> models_;
  std::map<int, bool> symmetric_;
};

}  // namespace votepose
