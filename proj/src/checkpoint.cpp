#include "srpo/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "srpo/digest.hpp"
#include "srpo/error.hpp"

namespace srpo {
namespace {

constexpr const char* kMagic = "srpo-checkpoint";
constexpr int kVersion = 1;

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

[[noreturn]] void corrupt(const std::string& what) { throw InvalidInput("checkpoint: " + what); }

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  os << kMagic << ' ' << kVersion << '\n';
  os << "dims " << p.dims().d_model << ' ' << p.dims().d_hidden << ' ' << kStateDim << '\n';
  for (const auto& [k, v] : ckpt.meta) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw InvalidInput("checkpoint: metadata key '" + k + "' contains whitespace");
    os << "meta " << k << ' ' << v << '\n';
  }
  for (int b = 0; b < kNumBlocks; ++b) {
    const auto block = p.block(static_cast<Block>(b));
    os << "array " << block_name(static_cast<Block>(b)) << ' ' << block.size() << '\n';
    for (std::size_t i = 0; i < block.size(); ++i) os << (i ? " " : "") << format_double(block[i]);
    os << '\n';
  }
  os << "end\n";
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != kMagic) corrupt("bad header");
  if (version != kVersion) corrupt("unsupported version " + std::to_string(version));

  std::string tag;
  PolicyDims dims;
  int state_dim = 0;
  if (!(is >> tag >> dims.d_model >> dims.d_hidden >> state_dim) || tag != "dims") corrupt("missing dims");
  if (state_dim != kStateDim) corrupt("state_dim mismatch");
  if (dims.d_model < 1 || dims.d_hidden < 0) corrupt("invalid dims");

  Checkpoint ckpt{PolicyParams(dims), {}};
  int next_block = 0;
  while (is >> tag) {
    if (tag == "end") {
      if (next_block != kNumBlocks) corrupt("missing arrays");
      ckpt.params.validate();
      return ckpt;
    }
    if (tag == "meta") {
      std::string key, value;
      is >> key;
      std::getline(is, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ckpt.meta[key] = value;
    } else if (tag == "array") {
      std::string name;
      std::size_t count = 0;
      if (!(is >> name >> count)) corrupt("truncated array header");
      if (next_block >= kNumBlocks || name != block_name(static_cast<Block>(next_block)))
        corrupt("unexpected array '" + name + "'");
      auto block = ckpt.params.block(static_cast<Block>(next_block));
      if (count != block.size()) corrupt("array '" + name + "' has wrong length");
      for (double& x : block) {
        std::string tok;
        if (!(is >> tok)) corrupt("truncated array '" + name + "'");
        char* end = nullptr;
        x = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') corrupt("bad number '" + tok + "'");
      }
      ++next_block;
    } else {
      corrupt("unknown record '" + tag + "'");
    }
  }
  corrupt("missing end marker");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("checkpoint: cannot open " + path.string() + " for writing");
  write_checkpoint(os, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("checkpoint: cannot open " + path.string());
  return read_checkpoint(is);
}

std::string params_digest(const PolicyParams& params) {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(params.dims().d_model));
  h.add(static_cast<std::uint64_t>(params.dims().d_hidden));
  for (double x : params.flat()) h.add(x);
  return h.hex();
}

}  // namespace srpo
