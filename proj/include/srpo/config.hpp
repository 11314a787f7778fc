#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "srpo/env.hpp"
#include "srpo/optim.hpp"
#include "srpo/pipeline.hpp"

namespace srpo {

enum class SweepKind { RewardScale, Tau, Agents, Rounds };
std::string_view sweep_kind_name(SweepKind k);

struct SweepConfig {
  SweepKind kind = SweepKind::RewardScale;
  std::vector<double> grid{0.1, 1.0, 10.0};
  std::vector<Algo> algos{Algo::SoftRankPO, Algo::Grpo};
  bool present = false;  // a [sweep] section was given
};

// INI-style experiment description:
//
//   seed = 0
//   out = runs/default
//
//   [env]        EnvConfig fields
//   [optim]      beta lambda lr schedule (constant|inv_sqrt) updater (adam|sgd)
//                objective (rank_matching|kl_regularized) clip_ratio value_coef
//                tau softrank_epsilon grpo_epsilon
//   [pipeline]   PipelineConfig fields, plus d_model d_hidden and
//                reward_horizon (round|final)
//   [sweep]      kind (reward_scale|tau|agents|rounds), grid, algos
//
// Lists are comma separated. Missing keys keep their defaults; unknown keys
// are rejected.
struct ExperimentConfig {
  EnvConfig env;
  OptimConfig optim;
  PipelineConfig pipeline;
  SweepConfig sweep;
  std::uint64_t seed = 0;
  std::string out = "runs/default";

  void validate() const;
};

// Throws ConfigError whose key() is "section.key" for the offending entry.
ExperimentConfig parse_config(std::istream& is);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved config in the same format, every key present. Parsing the
// echo yields an identical config.
std::string format_config(const ExperimentConfig& cfg);

// FNV-1a of format_config with `out` blanked.
std::string config_digest(const ExperimentConfig& cfg);

}  // namespace srpo
