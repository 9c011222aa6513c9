// Checkpoint container and deterministic file IO.
//
// Container layout, all integers little endian:
//   bytes 0..7    magic "GRNDARR1"
//   bytes 8..15   uint64 manifest length in bytes
//   manifest      UTF-8 JSON: {"arrays":[{"name","shape","offset"},...],"meta":{...}}
//                 offsets count doubles from the start of the payload
//   payload       concatenated IEEE-754 binary64 values, little endian
//
// Values are written verbatim (no text round trip), so save followed by load
// reproduces every array bit for bit.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "grind/tensor.hpp"

namespace grind {

class SerializeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ArrayStore {
 public:
  void put(const std::string& name, Tensor value);
  bool has(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }

  nlohmann::json meta;

  void save(const std::string& path) const;
  static ArrayStore load(const std::string& path);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> arrays_;
};

// Writes content to path via a temporary file in the same directory followed
// by a rename, so readers never observe a half-written file.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

// nlohmann keeps object keys sorted and prints doubles with the shortest
// round-trip representation, which makes dumps byte-stable across runs.
std::string dump_json(const nlohmann::json& j);
void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json parse_json_file(const std::string& path);

}  // namespace grind
