// SPDX-License-Identifier: Apache-2.0
//
// Tensor container file:
//
//   <entry count>\n
//   <name> <dtype> <d0> <d1> ...\n<row-major little-endian payload>
//   ...
//   fnv1a64 <16 hex digits of the FNV-1a hash of everything above>\n
//
// dtype is f64, f32 or u8 (opaque bytes, one dimension). Payloads are kept as
// raw bytes, so loading then saving reproduces the file exactly.
#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gbn/tensor.hpp"

namespace gbn {

class ParamSet;

enum class DType { f64, f32, u8 };

const char* dtype_name(DType d);
std::size_t dtype_size(DType d);

class Checkpoint {
 public:
  void put(std::string name, const Tensor& t, DType dtype = DType::f64);
  void put_bytes(std::string name, std::string_view bytes);

  bool contains(std::string_view name) const;
  DType dtype(std::string_view name) const;
  Tensor tensor(std::string_view name) const;
  std::string bytes(std::string_view name) const;
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const;
  static Checkpoint parse(std::string_view data);
  // Appends the checksum trailer to a hand-built body.
  static std::string with_checksum(std::string body);
  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  struct Entry {
    std::string name;
    DType dtype;
    std::vector<std::size_t> dims;
    std::string payload;
  };
  const Entry& entry(std::string_view name) const;
  Entry* find(std::string_view name);
  std::vector<Entry> entries_;
};

// Parameters are stored as "<prefix><param name>".
void save_params(Checkpoint& ckpt, const ParamSet& params, std::string_view prefix,
                 DType dtype = DType::f64);
void load_params(const Checkpoint& ckpt, ParamSet& params, std::string_view prefix);

}  // namespace gbn
