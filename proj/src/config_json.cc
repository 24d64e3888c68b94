#include "photoba/config_json.h"

#include <cmath>
#include <numbers>

#include "photoba/error.h"

namespace photoba {
namespace {

Eigen::Vector3d Vec3(const nlohmann::json& j, const char* key) {
  const auto v = JsonGet<std::vector<double>>(j, key);
  if (v.size() != 3) {
    throw Error(ErrorKind::kParse, std::string("'") + key + "' needs 3 values");
  }
  return {v[0], v[1], v[2]};
}

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

nlohmann::json PoseToJson(const Pose& pose) {
  const Eigen::Quaterniond q = pose.quaternion();
  const Eigen::Vector3d& t = pose.translation();
  return {{"t", {t.x(), t.y(), t.z()}}, {"q", {q.x(), q.y(), q.z(), q.w()}}};
}

Pose PoseFromJson(const nlohmann::json& j) {
  Eigen::Vector3d t = Eigen::Vector3d::Zero();
  if (j.contains("t")) t = Vec3(j, "t");
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();
  if (j.contains("q")) {
    const auto v = JsonGet<std::vector<double>>(j, "q");
    if (v.size() != 4) throw Error(ErrorKind::kParse, "'q' needs 4 values");
    q = Eigen::Quaterniond(v[3], v[0], v[1], v[2]);
    if (!(q.norm() > 1e-12)) throw Error(ErrorKind::kParse, "zero quaternion");
  }
  return Pose::FromQuaternion(q.normalized(), t);
}

nlohmann::json IntrinsicsToJson(const Intrinsics& k) {
  return {{"model", ProjectionModelName(k.model)},
          {"fx", k.fx},
          {"fy", k.fy},
          {"cx", k.cx},
          {"cy", k.cy},
          {"width", k.width},
          {"height", k.height},
          {"depth_min", k.depth_min},
          {"depth_max", k.depth_max}};
}

Intrinsics IntrinsicsFromJson(const nlohmann::json& j) {
  Intrinsics k;
  k.model = ParseProjectionModel(JsonGet<std::string>(j, "model"));
  k.fx = JsonGet<double>(j, "fx");
  k.fy = JsonGet<double>(j, "fy");
  k.cx = JsonGet<double>(j, "cx");
  k.cy = JsonGet<double>(j, "cy");
  k.width = JsonGet<int>(j, "width");
  k.height = JsonGet<int>(j, "height");
  JsonRead(j, "depth_min", &k.depth_min);
  JsonRead(j, "depth_max", &k.depth_max);
  k.Validate();
  return k;
}

nlohmann::json SolverConfigToJson(const SolverConfig& c) {
  const Vector5d w = c.omega.Diagonal();
  return {{"huber_delta", c.huber_delta},
          {"omega", {w[0], w[1], w[2], w[3], w[4]}},
          {"lm_initial_lambda", c.lm_initial_lambda},
          {"lm_lambda_up", c.lm_lambda_up},
          {"lm_lambda_down", c.lm_lambda_down},
          {"lm_max_lambda", c.lm_max_lambda},
          {"max_iterations_per_level", c.max_iterations_per_level},
          {"termination_rel_decrease", c.termination_rel_decrease},
          {"occlusion_depth_tolerance", c.occlusion_depth_tolerance},
          {"pixel_stride", c.pixel_stride},
          {"num_levels", c.num_levels}};
}

void ApplySolverJson(const nlohmann::json& j, SolverConfig* c) {
  JsonRead(j, "huber_delta", &c->huber_delta);
  if (j.contains("omega")) {
    const auto w = JsonGet<std::vector<double>>(j, "omega");
    if (w.size() != 5) throw Error(ErrorKind::kParse, "'omega' needs 5 values");
    c->omega.intensity = w[0];
    c->omega.depth = w[1];
    c->omega.normal = Eigen::Vector3d(w[2], w[3], w[4]);
  }
  JsonRead(j, "lm_initial_lambda", &c->lm_initial_lambda);
  JsonRead(j, "lm_lambda_up", &c->lm_lambda_up);
  JsonRead(j, "lm_lambda_down", &c->lm_lambda_down);
  JsonRead(j, "lm_max_lambda", &c->lm_max_lambda);
  JsonRead(j, "max_iterations_per_level", &c->max_iterations_per_level);
  JsonRead(j, "termination_rel_decrease", &c->termination_rel_decrease);
  JsonRead(j, "occlusion_depth_tolerance", &c->occlusion_depth_tolerance);
  JsonRead(j, "pixel_stride", &c->pixel_stride);
  JsonRead(j, "num_levels", &c->num_levels);
}

nlohmann::json GraphCriteriaToJson(const GraphCriteria& c, bool sequential) {
  return {{"max_angle_deg", c.max_angle / kDeg},
          {"max_translation", c.max_translation},
          {"min_overlap_ratio", c.min_overlap_ratio},
          {"overlap_stride", c.overlap_stride},
          {"sequential", sequential}};
}

void ApplyGraphJson(const nlohmann::json& j, GraphCriteria* c,
                    bool* sequential) {
  if (j.contains("max_angle_deg")) {
    c->max_angle = JsonGet<double>(j, "max_angle_deg") * kDeg;
  }
  JsonRead(j, "max_translation", &c->max_translation);
  JsonRead(j, "min_overlap_ratio", &c->min_overlap_ratio);
  JsonRead(j, "overlap_stride", &c->overlap_stride);
  JsonRead(j, "sequential", sequential);
}

}  // namespace photoba
