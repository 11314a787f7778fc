#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "srpo/policy.hpp"

namespace srpo {

// Versioned text format:
//
//   srpo-checkpoint 1
//   dims <d_model> <d_hidden> <state_dim>
//   meta <key> <value>            (zero or more)
//   array <name> <count>
//   <count values, %.17g, space separated>
//   ...
//   end
//
// Values are written with 17 significant digits, so a save/load cycle is
// bit-identical.
struct Checkpoint {
  PolicyParams params;
  std::map<std::string, std::string> meta;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& is);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// 64-bit FNV-1a over the bit patterns of the parameters, as 16 hex digits.
std::string params_digest(const PolicyParams& params);

}  // namespace srpo
