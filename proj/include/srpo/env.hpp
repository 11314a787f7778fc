#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "srpo/policy.hpp"
#include "srpo/rng.hpp"

namespace srpo {

// Synthetic deliberation team. Surrogate solver agents hold answers grouped
// into clusters (cluster 0 is the correct answer) and act for a fixed number
// of rounds.
struct EnvConfig {
  int n_agents = 3;
  int n_rounds = 3;
  double difficulty = 0.5;
  double p_init_correct = 0.7;
  // Added to the initial success probability; the sum is capped at 1.
  double correct_floor = 0.05;
  double refine_gain = 0.6;
  double refine_degrade = 0.15;
  double confidence_fidelity = 0.3;
  double critic_accuracy = 0.65;
  int answer_space = 4;
  // Mixed into every episode stream the pipeline derives.
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  double initial_success_probability() const;
};

struct AgentState {
  int cluster = 0;
  bool correct = true;
  double confidence = 0.5;
  bool critic_says_correct = true;
  double step_count = 0.5;
  double op_mix_algebraic = 0.3;
  double op_mix_arithmetic = 0.3;
};

struct WorldState {
  std::vector<AgentState> agents;
  int round = 0;
};

// What happened to one agent in a step.
struct TransitionInfo {
  Action action = Action::Persist;
  bool correct_before = false;
  bool correct_after = false;
  bool answer_changed = false;
};

struct ConsensusResult {
  int cluster = 0;
  bool correct = false;
};

class DeliberationEnv {
 public:
  explicit DeliberationEnv(EnvConfig cfg);

  const EnvConfig& config() const noexcept { return cfg_; }

  std::pair<WorldState, std::vector<Observation>> reset(Rng& rng) const;

  Observation observe(const WorldState& state, int agent) const;
  std::vector<Observation> observe_all(const WorldState& state) const;

  // Joint simultaneous step. Each agent draws from its own stream derived
  // from `round_key` and its index, and always consumes the same draws
  // whatever it does, so replaying a key with one agent's action changed
  // leaves every other agent's outcome untouched.
  std::pair<WorldState, std::vector<TransitionInfo>> step_with_key(const WorldState& state,
                                                                  const std::vector<Action>& actions,
                                                                  std::uint64_t round_key) const;
  std::pair<WorldState, std::vector<TransitionInfo>> step(const WorldState& state,
                                                         const std::vector<Action>& actions, Rng& rng) const;

  bool terminal(const WorldState& state) const { return state.round >= cfg_.n_rounds; }

 private:
  EnvConfig cfg_;
};

// Plurality vote; ties go to the tied cluster holding the most confident
// agent (lowest index on equal confidence).
ConsensusResult consensus(const WorldState& state);
ConsensusResult consensus_without(const WorldState& state, int agent);

// Labeling rule with access to the latent truth: correct -> Persist; else a
// correct peer exists -> Concede; else Refine.
Action oracle_action(const WorldState& state, int agent);

// Peer whose answer a conceding agent adopts: highest displayed confidence,
// lowest index on ties.
int concede_target(const WorldState& state, int agent);

}  // namespace srpo
