#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "vinecop/vine.hpp"

namespace vinecop {

inline constexpr int kModelSchemaVersion = 1;

// Versioned JSON model document. Parameters are written with round-trip
// precision, so deserialize(serialize(m)) evaluates bit-identically.
std::string serialize_model(const VineModel& model);

// Throws MalformedDocument or SchemaVersionError.
VineModel deserialize_model(std::string_view document);

void save_model(const VineModel& model, const std::filesystem::path& path);
VineModel load_model(const std::filesystem::path& path);

}  // namespace vinecop
