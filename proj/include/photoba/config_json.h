#pragma once

#include <json.hpp>
#include <string>

#include "photoba/error.h"
#include "photoba/geometry.h"
#include "photoba/match_graph.h"
#include "photoba/photometric_ba.h"
#include "photoba/sensor_model.h"

namespace photoba {

// JSON encodings shared by the manifest, scene spec and run reports.
// Readers start from the passed-in value, so absent keys keep their
// defaults. Malformed values throw kParse naming the key.

nlohmann::json PoseToJson(const Pose& pose);  // {"t": [3], "q": [x, y, z, w]}
Pose PoseFromJson(const nlohmann::json& j);

nlohmann::json IntrinsicsToJson(const Intrinsics& k);
Intrinsics IntrinsicsFromJson(const nlohmann::json& j);

nlohmann::json SolverConfigToJson(const SolverConfig& c);
void ApplySolverJson(const nlohmann::json& j, SolverConfig* c);

nlohmann::json GraphCriteriaToJson(const GraphCriteria& c, bool sequential);
void ApplyGraphJson(const nlohmann::json& j, GraphCriteria* c,
                    bool* sequential);

// Value of `key` converted to T; kParse on a type mismatch.
template <typename T>
T JsonGet(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    throw Error(ErrorKind::kParse, std::string("missing key '") + key + "'");
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::kParse, std::string("bad value for '") + key + "'");
  }
}

template <typename T>
void JsonRead(const nlohmann::json& j, const char* key, T* out) {
  if (j.contains(key)) *out = JsonGet<T>(j, key);
}

}  // namespace photoba
