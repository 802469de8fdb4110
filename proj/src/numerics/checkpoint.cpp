// SPDX-License-Identifier: Apache-2.0
#include "gbn/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gbn/parameter.hpp"

namespace gbn {
namespace {

[[noreturn]] void corrupt(const std::string& why) {
  throw std::runtime_error("checkpoint: corrupt file: " + why);
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex16(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return out;
}

constexpr std::string_view kTrailer = "fnv1a64 ";

template <class U>
void put_le(std::string& out, U bits) {
  for (std::size_t b = 0; b < sizeof(U); ++b)
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

template <class U>
U get_le(const char* p) {
  U bits = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b)
    bits |= static_cast<U>(static_cast<unsigned char>(p[b])) << (8 * b);
  return bits;
}

bool valid_name(std::string_view name) {
  if (name.empty()) return false;
  for (char c : name)
    if (c == ' ' || c == '\n' || c == '\t' || c == '\r') return false;
  return true;
}

std::size_t parse_size(std::string_view tok, const std::string& what) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || p != tok.data() + tok.size()) corrupt("bad " + what + " '" + std::string(tok) + "'");
  return v;
}

}  // namespace

const char* dtype_name(DType d) {
  switch (d) {
    case DType::f64: return "f64";
    case DType::f32: return "f32";
    case DType::u8: return "u8";
  }
  return "?";
}

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::f64: return 8;
    case DType::f32: return 4;
    case DType::u8: return 1;
  }
  return 0;
}

Checkpoint::Entry* Checkpoint::find(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return &e;
  return nullptr;
}

const Checkpoint::Entry& Checkpoint::entry(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e;
  throw std::out_of_range("checkpoint: no entry named " + std::string(name));
}

void Checkpoint::put(std::string name, const Tensor& t, DType dtype) {
  if (!valid_name(name)) throw std::invalid_argument("checkpoint: invalid entry name '" + name + "'");
  if (dtype == DType::u8) throw std::invalid_argument("checkpoint: tensors are stored as f64 or f32");
  Entry e{std::move(name), dtype, {}, {}};
  for (std::size_t d : t.shape().dims()) e.dims.push_back(d);
  e.payload.reserve(t.size() * dtype_size(dtype));
  for (double x : t.data()) {
    if (dtype == DType::f64)
      put_le(e.payload, std::bit_cast<std::uint64_t>(x));
    else
      put_le(e.payload, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  }
  if (Entry* old = find(e.name)) *old = std::move(e);
  else entries_.push_back(std::move(e));
}

void Checkpoint::put_bytes(std::string name, std::string_view bytes) {
  if (!valid_name(name)) throw std::invalid_argument("checkpoint: invalid entry name '" + name + "'");
  Entry e{std::move(name), DType::u8, {bytes.size()}, std::string(bytes)};
  if (bytes.empty()) e.dims.clear();  // written as "name u8" with no payload
  if (Entry* old = find(e.name)) *old = std::move(e);
  else entries_.push_back(std::move(e));
}

bool Checkpoint::contains(std::string_view name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

DType Checkpoint::dtype(std::string_view name) const { return entry(name).dtype; }

Tensor Checkpoint::tensor(std::string_view name) const {
  const Entry& e = entry(name);
  if (e.dtype == DType::u8) throw std::invalid_argument("checkpoint: entry " + e.name + " holds bytes");
  Shape shape{std::span<const std::size_t>(e.dims)};
  std::vector<double> data(shape.numel());
  const std::size_t w = dtype_size(e.dtype);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const char* p = e.payload.data() + i * w;
    data[i] = e.dtype == DType::f64
                  ? std::bit_cast<double>(get_le<std::uint64_t>(p))
                  : static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
  }
  return Tensor(shape, std::move(data));
}

std::string Checkpoint::bytes(std::string_view name) const {
  const Entry& e = entry(name);
  if (e.dtype != DType::u8) throw std::invalid_argument("checkpoint: entry " + e.name + " holds a tensor");
  return e.payload;
}

std::vector<std::string> Checkpoint::names() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) out.push_back(e.name);
  return out;
}

std::string Checkpoint::serialize() const {
  std::string out = std::to_string(entries_.size()) + "\n";
  for (const auto& e : entries_) {
    out += e.name;
    out += ' ';
    out += dtype_name(e.dtype);
    for (std::size_t d : e.dims) out += ' ' + std::to_string(d);
    out += '\n';
    out += e.payload;
  }
  return with_checksum(std::move(out));
}

std::string Checkpoint::with_checksum(std::string body) {
  const std::uint64_t h = fnv1a(body);
  body += std::string(kTrailer) + hex16(h) + "\n";
  return body;
}

Checkpoint Checkpoint::parse(std::string_view file) {
  const std::size_t trailer_len = kTrailer.size() + 17;
  if (file.size() < trailer_len) corrupt("missing checksum trailer");
  const std::string_view data = file.substr(0, file.size() - trailer_len);
  const std::string_view trailer = file.substr(data.size());
  if (trailer.substr(0, kTrailer.size()) != kTrailer || trailer.back() != '\n')
    corrupt("missing checksum trailer");
  if (trailer.substr(kTrailer.size(), 16) != hex16(fnv1a(data))) corrupt("checksum mismatch");
  std::size_t pos = 0;
  auto read_line = [&]() -> std::string_view {
    const std::size_t nl = data.find('\n', pos);
    if (nl == std::string_view::npos) corrupt("truncated header");
    std::string_view line = data.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  const std::size_t count = parse_size(read_line(), "entry count");
  Checkpoint ckpt;
  for (std::size_t k = 0; k < count; ++k) {
    std::string_view line = read_line();
    std::vector<std::string_view> tok;
    std::size_t s = 0;
    while (s <= line.size()) {
      const std::size_t sp = line.find(' ', s);
      const std::size_t end = sp == std::string_view::npos ? line.size() : sp;
      if (end > s) tok.push_back(line.substr(s, end - s));
      s = end + 1;
    }
    if (tok.size() < 2) corrupt("entry header '" + std::string(line) + "'");
    Entry e;
    e.name = std::string(tok[0]);
    if (tok[1] == "f64") e.dtype = DType::f64;
    else if (tok[1] == "f32") e.dtype = DType::f32;
    else if (tok[1] == "u8") e.dtype = DType::u8;
    else corrupt("unknown dtype '" + std::string(tok[1]) + "'");
    std::size_t numel = 1;
    for (std::size_t i = 2; i < tok.size(); ++i) {
      const std::size_t d = parse_size(tok[i], "dimension");
      if (d == 0) corrupt("zero dimension in " + e.name);
      e.dims.push_back(d);
      numel *= d;
    }
    if (e.dtype == DType::u8 && e.dims.empty()) numel = 0;
    if (e.dtype != DType::u8 && e.dims.size() > Shape::kMaxRank) corrupt("rank too large in " + e.name);
    const std::size_t bytes = numel * dtype_size(e.dtype);
    if (data.size() - pos < bytes) corrupt("payload of " + e.name + " truncated");
    e.payload = std::string(data.substr(pos, bytes));
    pos += bytes;
    if (ckpt.contains(e.name)) corrupt("duplicate entry " + e.name);
    ckpt.entries_.push_back(std::move(e));
  }
  if (pos != data.size()) corrupt("trailing bytes after last entry");
  return ckpt;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + tmp.string());
    const std::string data = serialize();
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw std::runtime_error("checkpoint: write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void save_params(Checkpoint& ckpt, const ParamSet& params, std::string_view prefix,
                 DType dtype) {
  for (std::size_t i = 0; i < params.size(); ++i)
    ckpt.put(std::string(prefix) + params[i].name, params[i].value, dtype);
}

void load_params(const Checkpoint& ckpt, ParamSet& params, std::string_view prefix) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    Tensor t = ckpt.tensor(std::string(prefix) + p.name);
    if (t.shape() != p.value.shape())
      throw std::runtime_error("checkpoint: shape mismatch for " + p.name + ": file " +
                               t.shape().str() + ", model " + p.value.shape().str());
    p.value = std::move(t);
  }
}

}  // namespace gbn
