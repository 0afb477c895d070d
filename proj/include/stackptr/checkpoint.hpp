#pragma once

// Checkpoint directory layout:
//   manifest.txt  format tag, config, provenance, and one
//                 "tensor <name> <shape> <byte offset>" line per tensor
//   vocab.txt     vocabulary tables in id order
//   params.bin    tensors as little-endian 32-bit floats, manifest order
// Serialization is canonical: loading and re-saving reproduces every byte.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "stackptr/config.hpp"
#include "stackptr/errors.hpp"
#include "stackptr/parser.hpp"
#include "stackptr/tensor.hpp"
#include "stackptr/vocabulary.hpp"

namespace stackptr {

inline constexpr std::string_view kCheckpointFormat = "stackptr-ckpt/1";

struct Checkpoint {
  ParameterStore params;
  Vocabulary vocab;
  TrainConfig config;
  std::vector<std::string> provenance;
  std::string format_version{kCheckpointFormat};

  static Checkpoint from_parser(const Parser& p, std::vector<std::string> provenance = {}) {
    return {p.params(), p.vocab(), p.config(), std::move(provenance), std::string(kCheckpointFormat)};
  }

  Parser to_parser() const { return Parser(config, vocab, params); }
};

// Float32 rounding applied on save; values after a load/save cycle are stable.
inline void round_to_float(ParameterStore& params) {
  for (auto& e : params.entries())
    for (auto& v : e.tensor.values) v = static_cast<double>(static_cast<float>(v));
}

namespace detail {

inline void put_f32(std::string& out, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((u >> (8 * k)) & 0xFF));
}

inline float get_f32(const std::string& in, std::size_t off) {
  std::uint32_t u = 0;
  for (int k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[off + k])) << (8 * k);
  return std::bit_cast<float>(u);
}

inline void write_text(const std::filesystem::path& p, const std::string& data) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

}  // namespace detail

inline std::string manifest_text(const Checkpoint& c) {
  std::string m = "format " + std::string(kCheckpointFormat) + "\n";
  for (const auto& [k, v] : c.config.items()) m += "config " + k + "=" + v + "\n";
  for (const auto& p : c.provenance) m += "provenance " + p + "\n";
  std::size_t offset = 0;
  for (const auto& e : c.params.entries()) {
    m += "tensor " + e.name + " " + shape_string(e.tensor.shape) + " " + std::to_string(offset) + "\n";
    offset += e.tensor.size() * 4;
  }
  return m;
}

inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::string blob;
  blob.reserve(c.params.scalar_count() * 4);
  for (const auto& e : c.params.entries())
    for (double v : e.tensor.values) detail::put_f32(blob, static_cast<float>(v));

  // Write beside the target and swap in, so a failure leaves no partial checkpoint.
  fs::path tmp = dir;
  tmp += ".partial";
  fs::remove_all(tmp);
  try {
    fs::create_directories(tmp);
    detail::write_text(tmp / "manifest.txt", manifest_text(c));
    detail::write_text(tmp / "vocab.txt", vocabulary_to_text(c.vocab));
    detail::write_text(tmp / "params.bin", blob);
    fs::remove_all(dir);
    fs::rename(tmp, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  Checkpoint c;
  const std::string manifest = read_file((dir / "manifest.txt").string());
  const std::string blob = read_file((dir / "params.bin").string());
  c.vocab = vocabulary_from_text(read_file((dir / "vocab.txt").string()));

  std::istringstream in(manifest);
  std::string line;
  std::size_t line_no = 0;
  std::size_t expected_offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    const std::string kind = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? std::string() : line.substr(sp + 1);
    if (kind == "format") {
      if (rest != kCheckpointFormat) throw FormatError("unsupported checkpoint format '" + rest + "'", line_no);
      c.format_version = rest;
    } else if (kind == "config") {
      const auto eq = rest.find('=');
      if (eq == std::string::npos || !c.config.set(rest.substr(0, eq), rest.substr(eq + 1)))
        throw FormatError("bad config entry '" + rest + "'", line_no);
    } else if (kind == "provenance") {
      c.provenance.push_back(rest);
    } else if (kind == "tensor") {
      std::istringstream ls(rest);
      std::string name, shape_text;
      std::size_t offset = 0;
      if (!(ls >> name >> shape_text >> offset)) throw FormatError("bad tensor entry", line_no);
      Shape shape;
      std::istringstream ss(shape_text);
      std::string dim;
      while (std::getline(ss, dim, ',')) shape.push_back(std::stoul(dim));
      if (offset != expected_offset) throw FormatError("tensor offsets are not contiguous", line_no);
      const std::size_t count = shape_size(shape);
      if (offset + count * 4 > blob.size()) throw FormatError("tensor " + name + " extends past params.bin", line_no);
      std::vector<double> values(count);
      for (std::size_t k = 0; k < count; ++k) values[k] = detail::get_f32(blob, offset + 4 * k);
      c.params.add(name, Tensor(shape, std::move(values)));
      expected_offset = offset + count * 4;
    } else {
      throw FormatError("unknown manifest entry '" + kind + "'", line_no);
    }
  }
  if (c.format_version != kCheckpointFormat) throw FormatError("manifest lacks a format tag");
  if (expected_offset != blob.size()) throw FormatError("params.bin has trailing bytes");
  c.config.validate();
  c.params.rng_seed = c.config.seed;
  return c;
}

}  // namespace stackptr
