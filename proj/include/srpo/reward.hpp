#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "srpo/env.hpp"
#include "srpo/softrank.hpp"

namespace srpo {

// r_local + r_global, both in {-1, 0, 1}.
struct RewardBreakdown {
  int local = 0;
  int global = 0;
  double scale_factor = 1.0;

  int total() const { return local + global; }
  double scaled() const { return scale_factor * total(); }
};

// 1[after] - 1[before].
int local_delta_reward(bool correct_before, bool correct_after);

// 1[consensus correct] - 1[consensus without `agent` correct].
int lookahead_consensus_reward(const WorldState& state, int agent);

double scale_reward(double r, double factor);

enum class RewardHorizon {
  Round,  // consensus terms read off the post-step state of the current round
  Final,  // continue to the last round with the behaviour policy, then read
};

// Joint action for the remaining rounds under RewardHorizon::Final. Receives
// the state and a key for any sampling it does.
using JointPolicy = std::function<std::vector<Action>(const WorldState&, std::uint64_t key)>;

struct RewardOptions {
  RewardHorizon horizon = RewardHorizon::Round;
  double scale = 1.0;
  JointPolicy continuation;  // required for RewardHorizon::Final
  std::uint64_t continuation_key = 0;
};

RewardBreakdown reward_for(const DeliberationEnv& env, const WorldState& before, const WorldState& after,
                           int agent, const RewardOptions& opts);

// Rewards of each of `agent`'s three candidate actions, replaying the round
// from `state` with everyone else's actions and every random stream held
// fixed. Entries are scaled by opts.scale.
RewardVector counterfactual_reward_vector(const DeliberationEnv& env, const WorldState& state,
                                          const std::vector<Action>& joint_actions, int agent,
                                          std::uint64_t round_key, const RewardOptions& opts = {});

}  // namespace srpo
