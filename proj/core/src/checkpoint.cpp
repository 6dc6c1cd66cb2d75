#include "leafkit/checkpoint.h"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "leafkit/error.h"

namespace leafkit {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

using nlohmann::json;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

  template <typename T>
  T get(const char* what) {
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void require(std::size_t n, const char* what) const {
    if (limit_ - pos_ < n) {
      throw FormatError("truncated checkpoint at offset " + std::to_string(pos_) + ": need " + std::to_string(n) +
                        " bytes for " + what + ", " + std::to_string(limit_ - pos_) + " available");
    }
  }

  const std::uint8_t* here() const { return bytes_.data() + pos_; }
  void skip(std::size_t n) { pos_ += n; }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large payloads.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string blob_for(const Checkpoint& ckpt) {
  json j;
  j["model"] = json::parse(ckpt.spec.to_json());
  j["training"] = json::parse(ckpt.training_json);
  return j.dump();
}

}  // namespace

Checkpoint Checkpoint::from_model(const Model& model, const std::string& training_json) {
  Checkpoint c;
  c.spec = model.spec();
  c.training_json = json::parse(training_json).dump();
  c.weights = model.flat_weights();
  return c;
}

Model Checkpoint::to_model() const { return Model::from_weights(spec, weights); }

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  const std::string blob = blob_for(ckpt);
  std::vector<std::uint8_t> out;
  out.reserve(4 + 2 + 4 + blob.size() + 8 + ckpt.weights.size() * 4 + 4);
  out.insert(out.end(), {'L', 'F', 'K', 'T'});
  put<std::uint16_t>(out, kCheckpointVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(blob.size()));
  out.insert(out.end(), blob.begin(), blob.end());
  put<std::uint64_t>(out, ckpt.weights.size());
  const auto* w = reinterpret_cast<const std::uint8_t*>(ckpt.weights.data());
  out.insert(out.end(), w, w + ckpt.weights.size() * sizeof(float));
  put<std::uint32_t>(out, crc_of(out.data(), out.size()));
  return out;
}

Checkpoint parse_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw FormatError("truncated checkpoint at offset 0: file has " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), "LFKT", 4) != 0) throw FormatError("bad magic at offset 0");
  // Everything up to the trailing CRC is parsed with a limit so that a
  // truncated file cannot be mistaken for a shorter, valid one.
  if (bytes.size() < 4 + 2 + 4 + 8 + 4) {
    throw FormatError("truncated checkpoint at offset " + std::to_string(bytes.size()) + ": header incomplete");
  }
  Reader r(bytes, bytes.size() - 4);
  r.skip(4);
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " at offset 4");
  }
  const std::size_t spec_len_at = r.pos();
  const auto spec_len = r.get<std::uint32_t>("spec length");
  if (spec_len == 0) throw FormatError("empty spec blob at offset " + std::to_string(spec_len_at));
  r.require(spec_len, "spec blob");
  const std::size_t blob_at = r.pos();
  const std::string blob(reinterpret_cast<const char*>(r.here()), spec_len);
  r.skip(spec_len);
  const std::size_t count_at = r.pos();
  const auto count = r.get<std::uint64_t>("weight count");
  if (count > (bytes.size() - 4 - r.pos()) / sizeof(float)) {
    throw FormatError("weight count " + std::to_string(count) + " at offset " + std::to_string(count_at) +
                      " exceeds the remaining " + std::to_string(bytes.size() - 4 - r.pos()) + " bytes");
  }
  r.require(count * sizeof(float), "weights");
  const std::size_t weights_at = r.pos();
  r.skip(count * sizeof(float));
  if (r.pos() != bytes.size() - 4) {
    throw FormatError("unexpected " + std::to_string(bytes.size() - 4 - r.pos()) + " trailing bytes at offset " +
                      std::to_string(r.pos()));
  }
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != crc_of(bytes.data(), bytes.size() - 4)) {
    throw FormatError("CRC mismatch at offset " + std::to_string(bytes.size() - 4));
  }

  Checkpoint c;
  try {
    const json j = json::parse(blob);
    c.spec = ModelSpec::from_json(j.at("model").dump());
    c.training_json = j.at("training").dump();
  } catch (const json::exception& e) {
    throw FormatError("malformed spec blob at offset " + std::to_string(blob_at) + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError("invalid model spec at offset " + std::to_string(blob_at) + ": " + e.what());
  }
  c.weights.resize(count);
  std::memcpy(c.weights.data(), bytes.data() + weights_at, count * sizeof(float));
  try {
    const Model m = c.to_model();
  } catch (const FormatError& e) {
    throw FormatError("weight count at offset " + std::to_string(count_at) + " does not match the spec: " + e.what());
  }
  return c;
}

void save_model(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_checkpoint(bytes);
}

}  // namespace leafkit
