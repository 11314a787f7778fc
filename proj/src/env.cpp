#include "srpo/env.hpp"

#include <algorithm>
#include <map>
#include <string>

#include "srpo/error.hpp"

namespace srpo {
namespace {

void require_probability(double x, const char* key) {
  if (!(x >= 0.0 && x <= 1.0))
    throw ConfigError(std::string("env: ") + key + " must lie in [0, 1], got " + std::to_string(x), key);
}

// Uniform draws an agent consumes when its answer changes.
struct ChannelDraws {
  double confidence, critic, steps, mix_u, mix_v;
};

ChannelDraws draw_channels(Rng& rng) {
  ChannelDraws d{};
  d.confidence = rng.uniform();
  d.critic = rng.uniform();
  d.steps = rng.uniform();
  d.mix_u = rng.uniform();
  d.mix_v = rng.uniform();
  return d;
}

void apply_channels(AgentState& a, const ChannelDraws& d, const EnvConfig& cfg) {
  const double rho = cfg.confidence_fidelity;
  a.confidence = rho * (a.correct ? 1.0 : 0.0) + (1.0 - rho) * d.confidence;
  const bool critic_truthful = d.critic < cfg.critic_accuracy;
  a.critic_says_correct = critic_truthful ? a.correct : !a.correct;
  a.step_count = d.steps;
  a.op_mix_algebraic = std::min(d.mix_u, d.mix_v);
  a.op_mix_arithmetic = std::max(d.mix_u, d.mix_v) - a.op_mix_algebraic;
}

int wrong_cluster(double u, const EnvConfig& cfg) {
  const int n_wrong = cfg.answer_space - 1;
  return 1 + std::min(n_wrong - 1, static_cast<int>(u * n_wrong));
}

ConsensusResult vote(const WorldState& state, int excluded) {
  std::map<int, int> counts;
  for (int i = 0; i < static_cast<int>(state.agents.size()); ++i)
    if (i != excluded) ++counts[state.agents[i].cluster];
  if (counts.empty()) throw InvalidInput("consensus: no voting agents");

  int best_count = 0;
  for (const auto& [cluster, n] : counts) best_count = std::max(best_count, n);

  int winner = -1;
  double best_conf = -1.0;
  for (int i = 0; i < static_cast<int>(state.agents.size()); ++i) {
    if (i == excluded) continue;
    const auto& a = state.agents[i];
    if (counts[a.cluster] == best_count && a.confidence > best_conf) {
      best_conf = a.confidence;
      winner = a.cluster;
    }
  }
  return {winner, winner == 0};
}

}  // namespace

void EnvConfig::validate() const {
  if (n_agents < 2) throw ConfigError("env: n_agents must be >= 2, got " + std::to_string(n_agents), "n_agents");
  if (n_rounds < 1) throw ConfigError("env: n_rounds must be >= 1, got " + std::to_string(n_rounds), "n_rounds");
  if (answer_space < 2)
    throw ConfigError("env: answer_space must be >= 2, got " + std::to_string(answer_space), "answer_space");
  require_probability(difficulty, "difficulty");
  require_probability(p_init_correct, "p_init_correct");
  require_probability(correct_floor, "correct_floor");
  require_probability(refine_gain, "refine_gain");
  require_probability(refine_degrade, "refine_degrade");
  require_probability(confidence_fidelity, "confidence_fidelity");
  if (!(critic_accuracy >= 0.5 && critic_accuracy <= 1.0))
    throw ConfigError("env: critic_accuracy must lie in [0.5, 1]", "critic_accuracy");
}

double EnvConfig::initial_success_probability() const {
  return std::min(1.0, p_init_correct * (1.0 - difficulty) + correct_floor);
}

DeliberationEnv::DeliberationEnv(EnvConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::pair<WorldState, std::vector<Observation>> DeliberationEnv::reset(Rng& rng) const {
  WorldState s;
  s.agents.resize(cfg_.n_agents);
  const double p = cfg_.initial_success_probability();
  for (auto& a : s.agents) {
    const double u_correct = rng.uniform();
    const double u_cluster = rng.uniform();
    const auto channels = draw_channels(rng);
    a.correct = u_correct < p;
    a.cluster = a.correct ? 0 : wrong_cluster(u_cluster, cfg_);
    apply_channels(a, channels, cfg_);
  }
  auto obs = observe_all(s);
  return {std::move(s), std::move(obs)};
}

Observation DeliberationEnv::observe(const WorldState& state, int agent) const {
  const int n = static_cast<int>(state.agents.size());
  if (agent < 0 || agent >= n) throw InvalidInput("observe: agent index " + std::to_string(agent) + " out of range");

  auto describe = [&](int i) {
    const auto& a = state.agents[i];
    int same = 0;
    for (int j = 0; j < n; ++j)
      if (j != i && state.agents[j].cluster == a.cluster) ++same;
    MetaCognitiveState z;
    z.answer = {static_cast<double>(same) / (n - 1), same == 0 ? 1.0 : 0.0, static_cast<double>(same + 1) / n};
    z.profile = {a.step_count, a.op_mix_algebraic, a.op_mix_arithmetic, a.confidence};
    z.critic = {a.critic_says_correct ? 1.0 : 0.0, a.critic_says_correct ? 0.0 : 1.0};
    return z;
  };

  Observation obs;
  obs.own = describe(agent);
  for (int j = 0; j < n; ++j)
    if (j != agent) obs.peers.push_back(describe(j));
  return obs;
}

std::vector<Observation> DeliberationEnv::observe_all(const WorldState& state) const {
  std::vector<Observation> out;
  out.reserve(state.agents.size());
  for (int i = 0; i < static_cast<int>(state.agents.size()); ++i) out.push_back(observe(state, i));
  return out;
}

int concede_target(const WorldState& state, int agent) {
  int target = -1;
  double best = -1.0;
  for (int j = 0; j < static_cast<int>(state.agents.size()); ++j) {
    if (j == agent) continue;
    if (state.agents[j].confidence > best) {
      best = state.agents[j].confidence;
      target = j;
    }
  }
  return target;
}

std::pair<WorldState, std::vector<TransitionInfo>> DeliberationEnv::step_with_key(
    const WorldState& state, const std::vector<Action>& actions, std::uint64_t round_key) const {
  if (terminal(state)) throw InvalidInput("step: episode already terminal");
  if (actions.size() != state.agents.size())
    throw InvalidInput("step: expected one action per agent (" + std::to_string(state.agents.size()) + "), got " +
                       std::to_string(actions.size()));

  WorldState next = state;
  next.round = state.round + 1;
  std::vector<TransitionInfo> info(state.agents.size());
  const double refine_success = cfg_.refine_gain * (1.0 - cfg_.difficulty);

  for (std::size_t i = 0; i < state.agents.size(); ++i) {
    Rng rng(derive_seed(round_key, {static_cast<std::uint64_t>(i)}));
    const double u_refine = rng.uniform();
    const double u_wrong = rng.uniform();
    const auto channels = draw_channels(rng);

    const auto& before = state.agents[i];
    auto& after = next.agents[i];
    switch (actions[i]) {
      case Action::Persist:
        break;
      case Action::Refine:
        if (!before.correct && u_refine < refine_success) after.cluster = 0;
        else if (before.correct && u_refine < cfg_.refine_degrade) after.cluster = wrong_cluster(u_wrong, cfg_);
        break;
      case Action::Concede:
        after.cluster = state.agents[concede_target(state, static_cast<int>(i))].cluster;
        break;
    }
    after.correct = after.cluster == 0;
    info[i] = {actions[i], before.correct, after.correct, after.cluster != before.cluster};
    if (info[i].answer_changed) apply_channels(after, channels, cfg_);
  }
  return {std::move(next), std::move(info)};
}

std::pair<WorldState, std::vector<TransitionInfo>> DeliberationEnv::step(const WorldState& state,
                                                                        const std::vector<Action>& actions,
                                                                        Rng& rng) const {
  return step_with_key(state, actions, rng.next_u64());
}

ConsensusResult consensus(const WorldState& state) { return vote(state, -1); }

ConsensusResult consensus_without(const WorldState& state, int agent) {
  if (agent < 0 || agent >= static_cast<int>(state.agents.size()))
    throw InvalidInput("consensus_without: agent index out of range");
  return vote(state, agent);
}

Action oracle_action(const WorldState& state, int agent) {
  if (agent < 0 || agent >= static_cast<int>(state.agents.size()))
    throw InvalidInput("oracle_action: agent index out of range");
  if (state.agents[agent].correct) return Action::Persist;
  for (int j = 0; j < static_cast<int>(state.agents.size()); ++j)
    if (j != agent && state.agents[j].correct) return Action::Concede;
  return Action::Refine;
}

}  // namespace srpo
