#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "srpo/digest.hpp"
#include "srpo/env.hpp"
#include "srpo/optim.hpp"

namespace srpo {

// Oracle-labeled states for supervised bootstrapping.
struct SftDataset {
  std::vector<LabeledItem> items;
  EnvConfig env;
  std::uint64_t seed = 0;

  std::string digest() const;
};

struct CorpusItem {
  Observation obs;
  std::vector<double> rewards;  // one entry per candidate action
};

// Frozen offline corpus of (observation, counterfactual reward vector).
struct OfflineCorpus {
  std::vector<CorpusItem> items;
  std::string policy_id;  // digest of the generating policy
  EnvConfig env;
  std::uint64_t seed = 0;
  double reward_scale = 1.0;

  std::string digest() const;
};

// Same corpus with every reward multiplied by `factor` (> 0).
OfflineCorpus rescale_corpus(const OfflineCorpus& corpus, double factor);

// Text format: a header line carrying the digest, provenance lines, then one
// item per line. load_corpus recomputes the digest and throws InvalidInput
// when it does not match the header.
void write_corpus(std::ostream& os, const OfflineCorpus& corpus);
OfflineCorpus read_corpus(std::istream& is);
void save_corpus(const std::filesystem::path& path, const OfflineCorpus& corpus);
OfflineCorpus load_corpus(const std::filesystem::path& path);

void hash_env_config(Fnv1a& h, const EnvConfig& cfg);

}  // namespace srpo
