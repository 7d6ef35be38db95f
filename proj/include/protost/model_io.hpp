#pragma once

// Model files. Text mode is a JSON object; binary mode is the same tree as
// CBOR behind the 4-byte prefix "MDLB". Every file carries "schema_version"
// and "kind" (maps | prototypes | centroids | toy). Doubles round-trip
// exactly in both modes.

#include <filesystem>
#include <string>

#include "protost/clustering.hpp"
#include "protost/gmm.hpp"
#include "protost/pla.hpp"
#include "protost/toyseg.hpp"

namespace protost {

inline constexpr int kModelSchemaVersion = 1;

enum class Encoding { kText, kBinary };

void save_model(const MapsModel& m, const std::filesystem::path& path, Encoding enc = Encoding::kText);
void save_model(const PrototypeSet& m, const std::filesystem::path& path, Encoding enc = Encoding::kText);
void save_model(const CentroidModel& m, const std::filesystem::path& path, Encoding enc = Encoding::kText);
void save_model(const ToyModel& m, const std::filesystem::path& path, Encoding enc = Encoding::kText);

MapsModel load_maps_model(const std::filesystem::path& path);
PrototypeSet load_prototypes(const std::filesystem::path& path);
CentroidModel load_centroids(const std::filesystem::path& path);
ToyModel load_toy_model(const std::filesystem::path& path);

/// The "kind" field of a model file, after format and version checks.
std::string model_kind(const std::filesystem::path& path);

}  // namespace protost
