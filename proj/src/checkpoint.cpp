#include "checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "errors.hpp"
#include "npy.hpp"

using nlohmann::json;

namespace ssk {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'K', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() != 4) fail(ErrorKind::TruncatedPayload, "checkpoint truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::vector<std::string> tensor_order(const Model& m) {
  std::vector<std::string> names = m.trainable_names();
  const auto stats = m.running_stat_names();
  names.insert(names.end(), stats.begin(), stats.end());
  return names;
}

std::vector<const Tensor*> tensor_refs(const Model& m) {
  std::vector<const Tensor*> refs = m.trainable_refs();
  const auto stats = m.running_stat_refs();
  refs.insert(refs.end(), stats.begin(), stats.end());
  return refs;
}

std::vector<Tensor*> tensor_refs(Model& m) {
  std::vector<Tensor*> refs = m.trainable_refs();
  const auto stats = m.running_stat_refs();
  refs.insert(refs.end(), stats.begin(), stats.end());
  return refs;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& m, std::uint64_t train_seed) {
  json header;
  header["format"] = kVersion;
  header["head"] = head_name(m.head);
  header["config"] = {{"input_size", m.config.input_size},
                      {"channels", m.config.channels},
                      {"dense_units", m.config.dense_units},
                      {"dropout", m.config.dropout},
                      {"with_bias", m.config.with_bias}};
  header["train_seed"] = train_seed;
  header["tensors"] = tensor_order(m);
  const std::string hs = header.dump();

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorKind::Io, "cannot write " + path);
  f.write(kMagic, 8);
  put_u32(f, kVersion);
  put_u32(f, static_cast<std::uint32_t>(hs.size()));
  f.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Tensor* t : tensor_refs(m)) write_npy(f, *t);
  f.close();
  if (!f) fail(ErrorKind::Io, "write failed: " + path);
}

Model load_checkpoint(const std::string& path, std::uint64_t* train_seed) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::Io, "cannot open " + path);

  char magic[8];
  f.read(magic, 8);
  if (f.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    fail(ErrorKind::MalformedHeader, "not a checkpoint file: " + path);
  const std::uint32_t version = get_u32(f);
  if (version != kVersion)
    fail(ErrorKind::VersionMismatch,
         "checkpoint version " + std::to_string(version) + " is not supported (expected " +
             std::to_string(kVersion) + ")");
  const std::uint32_t hlen = get_u32(f);
  if (hlen == 0 || hlen > (1u << 20)) fail(ErrorKind::Corruption, "implausible header length");
  std::string hs(hlen, '\0');
  f.read(hs.data(), hlen);
  if (static_cast<std::uint32_t>(f.gcount()) != hlen)
    fail(ErrorKind::TruncatedPayload, "checkpoint header truncated");

  json header;
  try {
    header = json::parse(hs);
  } catch (const json::exception& e) {
    fail(ErrorKind::Corruption, std::string("checkpoint header is not valid JSON: ") + e.what());
  }

  ArchitectureConfig cfg;
  Head head = Head::Skill;
  try {
    head = head_from_name(header.at("head").get<std::string>());
    const json& c = header.at("config");
    cfg.input_size = c.at("input_size").get<int>();
    const auto ch = c.at("channels").get<std::vector<int>>();
    if (ch.size() != 5) fail(ErrorKind::Corruption, "checkpoint channels list must have 5 entries");
    std::copy(ch.begin(), ch.end(), cfg.channels.begin());
    cfg.dense_units = c.at("dense_units").get<int>();
    cfg.dropout = c.at("dropout").get<float>();
    cfg.with_bias = c.at("with_bias").get<bool>();
    if (train_seed) *train_seed = header.value("train_seed", 0ull);
  } catch (const json::exception& e) {
    fail(ErrorKind::Corruption, std::string("checkpoint header incomplete: ") + e.what());
  }

  Model m = build_model(cfg, head, 0);
  const auto expected = tensor_order(m);
  const auto listed = header.at("tensors").get<std::vector<std::string>>();
  if (listed != expected) fail(ErrorKind::Corruption, "checkpoint tensor list does not match model");

  for (Tensor* ref : tensor_refs(m)) {
    Tensor loaded = read_npy(f);
    if (!same_shape(loaded, *ref))
      fail(ErrorKind::Corruption, "checkpoint tensor shape " + shape_str(loaded.shape) +
                                      " does not match expected " + shape_str(ref->shape));
    *ref = std::move(loaded);
  }
  if (f.peek() != std::ifstream::traits_type::eof())
    fail(ErrorKind::Corruption, "trailing bytes after checkpoint payload");
  return m;
}

}  // namespace ssk
