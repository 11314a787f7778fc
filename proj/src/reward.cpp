#include "srpo/reward.hpp"

#include <cmath>
#include <string>

#include "srpo/error.hpp"

namespace srpo {

int local_delta_reward(bool correct_before, bool correct_after) {
  return (correct_after ? 1 : 0) - (correct_before ? 1 : 0);
}

int lookahead_consensus_reward(const WorldState& state, int agent) {
  return (consensus(state).correct ? 1 : 0) - (consensus_without(state, agent).correct ? 1 : 0);
}

double scale_reward(double r, double factor) {
  if (!(factor > 0) || !std::isfinite(factor))
    throw InvalidInput("scale_reward: factor must be positive, got " + std::to_string(factor));
  return r * factor;
}

RewardBreakdown reward_for(const DeliberationEnv& env, const WorldState& before, const WorldState& after,
                           int agent, const RewardOptions& opts) {
  RewardBreakdown r;
  r.scale_factor = opts.scale;
  r.local = local_delta_reward(before.agents.at(agent).correct, after.agents.at(agent).correct);

  if (opts.horizon == RewardHorizon::Round) {
    r.global = lookahead_consensus_reward(after, agent);
    return r;
  }
  if (!opts.continuation) throw InvalidInput("reward: final-state horizon needs a continuation policy");
  WorldState s = after;
  while (!env.terminal(s)) {
    const auto round = static_cast<std::uint64_t>(s.round);
    const auto actions = opts.continuation(s, derive_seed(opts.continuation_key, {round, 0}));
    s = env.step_with_key(s, actions, derive_seed(opts.continuation_key, {round, 1})).first;
  }
  r.global = lookahead_consensus_reward(s, agent);
  return r;
}

RewardVector counterfactual_reward_vector(const DeliberationEnv& env, const WorldState& state,
                                          const std::vector<Action>& joint_actions, int agent,
                                          std::uint64_t round_key, const RewardOptions& opts) {
  if (agent < 0 || agent >= static_cast<int>(state.agents.size()))
    throw InvalidInput("counterfactual_reward_vector: agent index out of range");
  if (joint_actions.size() != state.agents.size())
    throw InternalError("counterfactual_reward_vector: joint action count does not match team size");
  scale_reward(1.0, opts.scale);

  std::vector<double> values(kNumActions);
  auto actions = joint_actions;
  for (int a = 0; a < kNumActions; ++a) {
    actions[agent] = static_cast<Action>(a);
    const auto next = env.step_with_key(state, actions, round_key).first;
    values[a] = reward_for(env, state, next, agent, opts).scaled();
  }
  return RewardVector(std::move(values));
}

}  // namespace srpo
