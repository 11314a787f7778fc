#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "srpo/dataset.hpp"
#include "srpo/env.hpp"
#include "srpo/optim.hpp"
#include "srpo/reward.hpp"

namespace srpo {

struct PipelineConfig {
  int sft_episodes = 2000;
  int corpus_episodes = 5000;
  int sft_max_epochs = 60;
  // Stop SFT once the loss improved by less than this over sft_patience epochs.
  double sft_tolerance = 1e-5;
  int sft_patience = 10;
  double sft_lr = 1e-3;
  int rl_epochs = 20;
  int batch_size = 256;
  double heldout_fraction = 0.1;
  int eval_episodes = 5000;
  double reward_scale = 1.0;
  RewardHorizon reward_horizon = RewardHorizon::Round;
  int ppo_episodes_per_iter = 64;
  int ppo_epochs = 4;
  PolicyDims dims;
  double init_scale = 0.1;

  void validate() const;
};

enum class Algo { SoftRankPO, Grpo, Ppo };
std::string_view algo_name(Algo a);
std::optional<Algo> parse_algo(std::string_view name);

// Independent seeds for the stages of one experiment.
enum class Stage { SftData, SftInit, SftTrain, Corpus, Finetune, Eval };
std::uint64_t stage_seed(std::uint64_t seed, Stage stage);

// Rolls episodes under the oracle labeling rule and records (observation,
// oracle action) at every agent-round.
SftDataset generate_sft_dataset(const EnvConfig& env, int n_episodes, std::uint64_t seed);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double heldout_loss = 0;
  double accuracy = 0;  // SFT: training-label accuracy
};

struct SftResult {
  PolicyParams params;
  std::vector<EpochRecord> epochs;
  double final_loss = 0;
};

SftResult train_sft(const SftDataset& data, PolicyParams init, const OptimConfig& optim,
                    const PipelineConfig& pipe, std::uint64_t seed);

// Oracle dataset, random init and SFT, each from its own stage seed.
SftResult bootstrap_policy(const EnvConfig& env, const OptimConfig& optim, const PipelineConfig& pipe,
                           std::uint64_t seed);

// Rollouts sampling from `policy`; every agent-round stores the observation
// and the counterfactual reward vector over its three actions.
OfflineCorpus generate_offline_corpus(const PolicyParams& policy, const EnvConfig& env, int n_episodes,
                                      std::uint64_t seed, double reward_scale = 1.0,
                                      RewardHorizon horizon = RewardHorizon::Round);

struct TrainResult {
  PolicyParams params;
  std::vector<StepMetrics> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
};

// Advantages each offline algorithm trains on.
std::vector<TrainItem> shape_corpus(const OfflineCorpus& corpus, Algo algo, const OptimConfig& cfg);

// Deterministic 90/10-style split of corpus indices.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_corpus(std::size_t n, double heldout_fraction,
                                                                           std::uint64_t seed);

// Mini-batch optimization of optim.objective on the offline corpus with
// `reference` as both initialization and KL anchor. Returns the epoch
// checkpoint with the lowest held-out loss.
TrainResult train_softrankpo(const OfflineCorpus& corpus, const PolicyParams& reference, const OptimConfig& optim,
                             const PipelineConfig& pipe, std::uint64_t seed);

// GRPO reuses the offline corpus with z-score advantages; PPO collects fresh
// on-policy rollouts from `env` and runs the same number of updates.
TrainResult train_baseline(Algo algo, const OfflineCorpus& corpus, const PolicyParams& reference,
                           const EnvConfig& env, const OptimConfig& optim, const PipelineConfig& pipe,
                           std::uint64_t seed);

// Number of optimizer steps an offline run performs on this corpus.
long offline_step_budget(std::size_t corpus_size, const PipelineConfig& pipe);

struct EvalReport {
  double accuracy = 0;
  std::array<double, kNumActions> action_freq{};
  double mean_cost = 0;  // Refine + Concede actions per episode
  int episodes = 0;
  double accuracy_halfwidth = 0;
  std::array<double, kNumActions> action_freq_halfwidth{};
  double cost_halfwidth = 0;
};

// Greedy (argmax) rollouts. Episode e uses a stream derived from (seed, e),
// so two policies evaluated with the same seed face the same draws.
EvalReport evaluate(const PolicyParams& policy, const EnvConfig& env, int n_episodes, std::uint64_t seed);

// Same, for an arbitrary per-agent decision rule.
using DecisionRule = std::function<Action(const WorldState&, int agent, const Observation&)>;
EvalReport evaluate_rule(const DecisionRule& rule, const EnvConfig& env, int n_episodes, std::uint64_t seed);

// One line-delimited record per round of an episode: round, per-agent
// cluster / action / reward, consensus.
std::vector<std::string> trace_episode(const PolicyParams& policy, const EnvConfig& env, std::uint64_t seed);

}  // namespace srpo
