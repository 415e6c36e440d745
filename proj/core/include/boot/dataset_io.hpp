#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "boot/keyvalue.hpp"
#include "boot/trajectory.hpp"

namespace boot {

// Extra fields carried by persisted generated trajectories.
struct GenerationTag {
  double confidence = 0.0;
  std::string scheme;
  std::int64_t source_id = -1;
};

struct DatasetRecord {
  RawTrajectory trajectory;
  std::optional<GenerationTag> generation;
};

// One JSON object per line with fields states, actions, rewards, terminal
// (plus confidence, scheme, source_id for generated data).
std::string dataset_line(const DatasetRecord& record);
DatasetRecord parse_dataset_line(const std::string& line);

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records);
void write_dataset(const std::string& path, const std::vector<RawTrajectory>& trajectories);
std::vector<DatasetRecord> read_dataset_records(const std::string& path);
std::vector<RawTrajectory> read_dataset(const std::string& path);

// Sidecar for a dataset: everything needed to tokenize it bit-reproducibly.
struct DatasetManifest {
  std::string env_id;
  std::string tier;
  std::int64_t trajectories = 0;
  std::uint64_t seed = 0;
  double discount = 0.99;
  int window = 10;
  Discretizer discretizer;
  std::map<std::string, std::string> extra;

  KeyValueText to_text() const;
  static DatasetManifest from_text(const KeyValueText& kv);
  void save(const std::string& path) const { to_text().save(path); }
  static DatasetManifest load(const std::string& path) { return from_text(KeyValueText::load(path)); }
  // Digest of the canonical serialization.
  std::uint64_t hash() const;
};

}  // namespace boot
