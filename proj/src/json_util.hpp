#pragma once

#include <string>

#include <json.hpp>

#include "bilsyn/model.hpp"

namespace bilsyn::internal {

using Json = nlohmann::ordered_json;

/// Row-major array of arrays.
Json MatrixToJson(const Matrix& m);

/// Parses a row-major array of arrays (a bare number is read as 1×1).
/// `field` names the location for diagnostics.
Matrix MatrixFromJson(const Json& j, const std::string& field);

const Json& RequireField(const Json& obj, const char* key,
                         const std::string& context);

Json RegionToJson(const RegionSpec& region);
RegionSpec RegionFromJson(const Json& j, int N);

Json ProblemToJson(const ProblemData& problem);
ProblemData ProblemFromJson(const Json& j);

}  // namespace bilsyn::internal
