#include "boot/dataset_io.hpp"

#include <fstream>
#include <json.hpp>

#include "boot/rng.hpp"

namespace boot {

namespace {

using nlohmann::json;

json series_json(const Series& s) {
  json rows = json::array();
  for (int t = 0; t < s.steps(); ++t) rows.push_back(std::vector<double>(s.row(t).begin(), s.row(t).end()));
  return rows;
}

Series parse_series(const json& rows, const char* name) {
  if (!rows.is_array() || rows.empty()) throw InvalidInput(std::string("field '") + name + "' must be a non-empty array");
  Series s;
  for (const auto& r : rows) s.push_back(r.get<std::vector<double>>());
  return s;
}

}  // namespace

std::string dataset_line(const DatasetRecord& record) {
  const RawTrajectory& t = record.trajectory;
  json j;
  j["states"] = series_json(t.states);
  j["actions"] = series_json(t.actions);
  j["rewards"] = t.rewards;
  j["terminal"] = t.terminal;
  if (record.generation) {
    j["confidence"] = record.generation->confidence;
    j["scheme"] = record.generation->scheme;
    j["source_id"] = record.generation->source_id;
  }
  return j.dump();
}

DatasetRecord parse_dataset_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed dataset line: ") + e.what());
  }
  DatasetRecord rec;
  try {
    rec.trajectory.states = parse_series(j.at("states"), "states");
    rec.trajectory.actions = parse_series(j.at("actions"), "actions");
    rec.trajectory.rewards = j.at("rewards").get<std::vector<double>>();
    rec.trajectory.terminal = j.value("terminal", false);
    if (j.contains("confidence")) {
      rec.generation = GenerationTag{j.at("confidence").get<double>(), j.value("scheme", std::string()),
                                     j.value("source_id", std::int64_t{-1})};
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("dataset line missing fields: ") + e.what());
  }
  rec.trajectory.validate();
  return rec;
}

void write_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset " + path);
  for (const auto& r : records) out << dataset_line(r) << '\n';
  if (!out) throw std::runtime_error("failed writing dataset " + path);
}

void write_dataset(const std::string& path, const std::vector<RawTrajectory>& trajectories) {
  std::vector<DatasetRecord> records;
  records.reserve(trajectories.size());
  for (const auto& t : trajectories) records.push_back({t, std::nullopt});
  write_dataset(path, records);
}

std::vector<DatasetRecord> read_dataset_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  std::vector<DatasetRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_dataset_line(line));
    } catch (const InvalidInput& e) {
      throw InvalidInput(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<RawTrajectory> read_dataset(const std::string& path) {
  std::vector<RawTrajectory> out;
  for (auto& r : read_dataset_records(path)) out.push_back(std::move(r.trajectory));
  return out;
}

KeyValueText DatasetManifest::to_text() const {
  KeyValueText kv;
  const VocabLayout& lay = discretizer.layout();
  kv.set("format", "boot-dataset-manifest/1");
  kv.set("env", env_id);
  kv.set("tier", tier);
  kv.set("trajectories", trajectories);
  kv.set("seed", seed);
  kv.set("discount", discount);
  kv.set("window", window);
  kv.set("state_dim", lay.state_dim());
  kv.set("action_dim", lay.action_dim());
  kv.set("bins", lay.bins());
  for (int f = 0; f < lay.fields(); ++f) {
    char key[32];
    std::snprintf(key, sizeof key, "field.%02d", f);
    kv.set(std::string(key) + ".kind", to_string(lay.kind_of_field(f)));
    kv.set(std::string(key) + ".lower", discretizer.lower(f));
    kv.set(std::string(key) + ".upper", discretizer.upper(f));
  }
  for (const auto& [k, v] : extra) kv.set("extra." + k, v);
  return kv;
}

DatasetManifest DatasetManifest::from_text(const KeyValueText& kv) {
  if (kv.get_or("format", "") != "boot-dataset-manifest/1") throw ConfigError("not a dataset manifest");
  DatasetManifest m;
  m.env_id = kv.get("env");
  m.tier = kv.get_or("tier", "");
  m.trajectories = kv.get_int("trajectories");
  m.seed = static_cast<std::uint64_t>(std::stoull(kv.get("seed")));
  m.discount = kv.get_double("discount");
  m.window = static_cast<int>(kv.get_int("window"));
  const VocabLayout lay(static_cast<int>(kv.get_int("state_dim")), static_cast<int>(kv.get_int("action_dim")),
                        static_cast<int>(kv.get_int("bins")));
  std::vector<double> lo, hi;
  for (int f = 0; f < lay.fields(); ++f) {
    char key[32];
    std::snprintf(key, sizeof key, "field.%02d", f);
    lo.push_back(kv.get_double(std::string(key) + ".lower"));
    hi.push_back(kv.get_double(std::string(key) + ".upper"));
  }
  m.discretizer = Discretizer(lay, lo, hi);
  for (const auto& [k, v] : kv.entries()) {
    if (k.rfind("extra.", 0) == 0) m.extra[k.substr(6)] = v;
  }
  return m;
}

std::uint64_t DatasetManifest::hash() const { return fnv1a64(to_text().serialize()); }

}  // namespace boot
