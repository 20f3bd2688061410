#pragma once

#include "nashfiber/fiber.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace nashfiber {

using Json = nlohmann::ordered_json;

Json to_json(const GrassPoint& p);
/// Throws InvalidArgument on malformed input.
GrassPoint grasspoint_from_json(const Json& j);

/// {"name", "ambient_dim", "declared_dim", "pieces": [{"equations", "ge", "gt", "ne"}],
///  optional "singular_locus": [pieces]}.
Scene scene_from_json(const Json& j);
Json to_json(const Scene& s);

/// Reads a scene file; I/O problems raise ErrorKind::Io.
Scene load_scene(const std::filesystem::path& path);

/// Resolves a bare catalog name ("whitney") or a path.
std::filesystem::path resolve_scene_path(const std::string& name_or_path);
std::filesystem::path catalog_dir();

/// One JSON object per accepted point: {"k", "r", "x", "piece", "plane"}.
std::string sample_json_lines(const std::vector<ScaleSample>& samples);

Json to_json(const ScaleSchedule& s);
/// Fields absent from `j` keep the value from `base`.
ScaleSchedule schedule_from_json(const Json& j, ScaleSchedule base = {});

Json to_json(const Vec& v);
Vec vec_from_json(const Json& j);

Json to_json(const ConeEstimate& c);

/// Full estimate including per-scale planes; "components" is derived on
/// output and ignored on input. Infinite trace values are written as null.
Json to_json(const FiberEstimate& f);
FiberEstimate fiber_from_json(const Json& j);

Json to_json(const RayClassification& rc, bool include_fiber = false);

}  // namespace nashfiber
