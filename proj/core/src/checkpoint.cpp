#include "boot/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <json.hpp>

#include "boot/keyvalue.hpp"

namespace boot {

namespace {

constexpr const char* kMagic = "BOOTCKPT1";

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian doubles");

void write_doubles(std::ofstream& out, const ParamVector& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void read_doubles(std::ifstream& in, ParamVector& v, size_t n, const std::string& path) {
  v.resize(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("truncated checkpoint " + path);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const ModelConfig& c = ckpt.params.config;
  const TrainState& s = ckpt.state;
  nlohmann::json h;
  h["config"] = {{"vocab", c.vocab},       {"context", c.context}, {"width", c.width},
                 {"layers", c.layers},     {"heads", c.heads},     {"ff_width", c.ff_width},
                 {"dropout", c.dropout},   {"init_scale", c.init_scale}, {"seed", c.seed}};
  h["train_state"] = {{"step", s.step},
                      {"base_lr", s.base_lr},
                      {"warmup_steps", s.warmup_steps},
                      {"total_steps", s.total_steps},
                      {"final_lr_fraction", s.final_lr_fraction},
                      {"beta1", s.beta1},
                      {"beta2", s.beta2},
                      {"epsilon", s.epsilon}};
  h["manifest_hash"] = hex64(ckpt.manifest_hash);
  h["param_count"] = ckpt.params.values.size();
  h["moment_count"] = s.first_moment.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out << kMagic << '\n' << h.dump() << '\n';
  write_doubles(out, ckpt.params.values);
  write_doubles(out, s.first_moment);
  write_doubles(out, s.second_moment);
  if (!out) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_manifest_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  std::string magic, header;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error(path + " is not a checkpoint");
  std::getline(in, header);
  nlohmann::json h = nlohmann::json::parse(header);

  Checkpoint ck;
  const auto& jc = h.at("config");
  ModelConfig& c = ck.params.config;
  c.vocab = jc.at("vocab");
  c.context = jc.at("context");
  c.width = jc.at("width");
  c.layers = jc.at("layers");
  c.heads = jc.at("heads");
  c.ff_width = jc.at("ff_width");
  c.dropout = jc.at("dropout");
  c.init_scale = jc.at("init_scale");
  c.seed = jc.at("seed");
  const auto& js = h.at("train_state");
  TrainState& s = ck.state;
  s.step = js.at("step");
  s.base_lr = js.at("base_lr");
  s.warmup_steps = js.at("warmup_steps");
  s.total_steps = js.at("total_steps");
  s.final_lr_fraction = js.at("final_lr_fraction");
  s.beta1 = js.at("beta1");
  s.beta2 = js.at("beta2");
  s.epsilon = js.at("epsilon");
  ck.manifest_hash = std::stoull(h.at("manifest_hash").get<std::string>(), nullptr, 16);

  if (expected_manifest_hash && *expected_manifest_hash != ck.manifest_hash) {
    throw std::runtime_error("checkpoint " + path + " was trained against dataset manifest " + hex64(ck.manifest_hash) +
                             " but the supplied manifest hashes to " + hex64(*expected_manifest_hash));
  }
  const size_t n = h.at("param_count");
  if (n != ParamLayout(c).total()) throw std::runtime_error("checkpoint parameter count does not match its config");
  const size_t m = h.at("moment_count");
  read_doubles(in, ck.params.values, n, path);
  read_doubles(in, s.first_moment, m, path);
  read_doubles(in, s.second_moment, m, path);
  return ck;
}

}  // namespace boot
