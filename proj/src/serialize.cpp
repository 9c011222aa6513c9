#include "grind/serialize.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace grind {

namespace {

constexpr char kMagic[8] = {'G', 'R', 'N', 'D', 'A', 'R', 'R', '1'};

void put_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

void put_f64_le(std::string& out, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  put_u64_le(out, bits);
}

double get_f64_le(const unsigned char* p) {
  const std::uint64_t bits = get_u64_le(p);
  double x;
  std::memcpy(&x, &bits, sizeof x);
  return x;
}

}  // namespace

void ArrayStore::put(const std::string& name, Tensor value) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) {
      arrays_[i] = std::move(value);
      return;
    }
  }
  names_.push_back(name);
  arrays_.push_back(std::move(value));
}

bool ArrayStore::has(const std::string& name) const {
  for (const auto& n : names_) {
    if (n == name) return true;
  }
  return false;
}

const Tensor& ArrayStore::get(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return arrays_[i];
  }
  throw SerializeError("no array named '" + name + "' in store");
}

void ArrayStore::save(const std::string& path) const {
  nlohmann::json manifest;
  manifest["meta"] = meta.is_null() ? nlohmann::json::object() : meta;
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    nlohmann::json e;
    e["name"] = names_[i];
    e["shape"] = arrays_[i].shape();
    e["offset"] = offset;
    entries.push_back(std::move(e));
    offset += static_cast<std::uint64_t>(arrays_[i].size());
  }
  manifest["arrays"] = std::move(entries);
  const std::string mtext = manifest.dump();

  std::string out;
  out.reserve(16 + mtext.size() + offset * 8);
  out.append(kMagic, sizeof kMagic);
  put_u64_le(out, mtext.size());
  out += mtext;
  for (const Tensor& t : arrays_) {
    for (std::int64_t i = 0; i < t.size(); ++i) put_f64_le(out, t[i]);
  }
  atomic_write_file(path, out);
}

ArrayStore ArrayStore::load(const std::string& path) {
  const std::string raw = read_file(path);
  if (raw.size() < 16 || std::memcmp(raw.data(), kMagic, sizeof kMagic) != 0) {
    throw SerializeError(path + ": not a checkpoint container");
  }
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  const std::uint64_t mlen = get_u64_le(bytes + 8);
  if (16 + mlen > raw.size()) {
    throw SerializeError(path + ": manifest length exceeds file size");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(raw.begin() + 16, raw.begin() + 16 + mlen);
  } catch (const nlohmann::json::exception& e) {
    throw SerializeError(path + ": bad manifest: " + e.what());
  }
  const std::size_t payload_at = 16 + static_cast<std::size_t>(mlen);
  const std::size_t payload_doubles = (raw.size() - payload_at) / 8;

  ArrayStore store;
  store.meta = manifest.value("meta", nlohmann::json::object());
  for (const auto& e : manifest.at("arrays")) {
    const std::string name = e.at("name").get<std::string>();
    const Shape shape = e.at("shape").get<Shape>();
    const std::uint64_t offset = e.at("offset").get<std::uint64_t>();
    const std::int64_t count = shape_size(shape);
    if (offset + static_cast<std::uint64_t>(count) > payload_doubles) {
      throw SerializeError(path + ": array '" + name + "' runs past end of payload");
    }
    Tensor t(shape);
    const unsigned char* src = bytes + payload_at + offset * 8;
    for (std::int64_t i = 0; i < count; ++i) t[i] = get_f64_le(src + i * 8);
    store.put(name, std::move(t));
  }
  return store;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw SerializeError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw SerializeError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw SerializeError("cannot rename into place: " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SerializeError("cannot open " + path);
  std::string out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return out;
}

std::string dump_json(const nlohmann::json& j) { return j.dump(); }

void write_json_file(const std::string& path, const nlohmann::json& j) {
  atomic_write_file(path, j.dump() + "\n");
}

nlohmann::json parse_json_file(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw SerializeError(path + ": bad JSON: " + e.what());
  }
}

}  // namespace grind
