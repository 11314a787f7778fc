#include "srpo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "json.hpp"
#include "srpo/checkpoint.hpp"
#include "srpo/error.hpp"
#include "srpo/tabular.hpp"

namespace srpo {
namespace {

// Stream tags keep the derived seeds of different pipeline stages apart.
enum StreamTag : std::uint64_t { kSplit = 1, kShuffle = 2, kPpoRollout = 3 };

std::uint64_t episode_seed(const EnvConfig& env, std::uint64_t seed, std::uint64_t episode) {
  return derive_seed(seed, {env.seed, episode});
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(idx[i - 1], idx[j]);
  }
}

template <typename T>
std::vector<T> gather(const std::vector<T>& items, std::span<const std::size_t> idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(items[i]);
  return out;
}

void require_finite(double x, const std::string& what) {
  if (!std::isfinite(x)) throw NumericError(what + " is not finite (" + std::to_string(x) + ")");
}

double offline_loss(std::span<const TrainItem> items, const PolicyParams& params, const PolicyParams& ref,
                    const OptimConfig& cfg) {
  double loss = 0;
  for (const auto& item : items) {
    const auto d = action_distribution(item.obs, params);
    const auto r = action_distribution(item.obs, ref);
    loss += cfg.objective == Objective::RankMatching
                ? tabular::rank_matching(d.logits, r.log_probs, item.advantages, cfg.beta).loss
                : tabular::softrankpo(d.logits, r.log_probs, item.advantages, cfg.beta, cfg.lambda).loss;
  }
  return items.empty() ? 0.0 : loss / static_cast<double>(items.size());
}

RewardOptions reward_options(const DeliberationEnv& env, const PolicyParams* policy, double scale,
                             RewardHorizon horizon, std::uint64_t key) {
  RewardOptions opts;
  opts.scale = scale;
  opts.horizon = horizon;
  opts.continuation_key = key;
  if (horizon == RewardHorizon::Final && policy) {
    opts.continuation = [&env, policy](const WorldState& s, std::uint64_t k) {
      Rng rng(k);
      std::vector<Action> actions;
      for (const auto& obs : env.observe_all(s)) actions.push_back(sample_action(action_distribution(obs, *policy), rng));
      return actions;
    };
  }
  return opts;
}

}  // namespace

void PipelineConfig::validate() const {
  auto positive = [](long v, const char* key) {
    if (v < 1) throw ConfigError(std::string("pipeline: ") + key + " must be >= 1", key);
  };
  positive(sft_episodes, "sft_episodes");
  positive(corpus_episodes, "corpus_episodes");
  positive(sft_max_epochs, "sft_max_epochs");
  positive(sft_patience, "sft_patience");
  positive(rl_epochs, "rl_epochs");
  positive(batch_size, "batch_size");
  positive(eval_episodes, "eval_episodes");
  positive(ppo_episodes_per_iter, "ppo_episodes_per_iter");
  positive(ppo_epochs, "ppo_epochs");
  if (!(sft_lr > 0)) throw ConfigError("pipeline: sft_lr must be positive", "sft_lr");
  if (!(sft_tolerance >= 0)) throw ConfigError("pipeline: sft_tolerance must be >= 0", "sft_tolerance");
  if (!(heldout_fraction > 0 && heldout_fraction < 1))
    throw ConfigError("pipeline: heldout_fraction must lie in (0, 1)", "heldout_fraction");
  if (!(reward_scale > 0)) throw ConfigError("pipeline: reward_scale must be positive", "reward_scale");
  if (dims.d_model < 1) throw ConfigError("pipeline: d_model must be >= 1", "d_model");
  if (dims.d_hidden < 0) throw ConfigError("pipeline: d_hidden must be >= 0", "d_hidden");
  if (!(init_scale > 0)) throw ConfigError("pipeline: init_scale must be positive", "init_scale");
}

std::string_view algo_name(Algo a) {
  switch (a) {
    case Algo::SoftRankPO: return "softrankpo";
    case Algo::Grpo: return "grpo";
    case Algo::Ppo: return "ppo";
  }
  return "?";
}

std::optional<Algo> parse_algo(std::string_view name) {
  for (Algo a : {Algo::SoftRankPO, Algo::Grpo, Algo::Ppo})
    if (algo_name(a) == name) return a;
  return std::nullopt;
}

std::uint64_t stage_seed(std::uint64_t seed, Stage stage) {
  return derive_seed(seed, {0x5eed, static_cast<std::uint64_t>(stage)});
}

SftResult bootstrap_policy(const EnvConfig& env, const OptimConfig& optim, const PipelineConfig& pipe,
                           std::uint64_t seed) {
  pipe.validate();
  const auto data = generate_sft_dataset(env, pipe.sft_episodes, stage_seed(seed, Stage::SftData));
  Rng init_rng(stage_seed(seed, Stage::SftInit));
  auto init = PolicyParams::random(pipe.dims, init_rng, pipe.init_scale);
  return train_sft(data, std::move(init), optim, pipe, stage_seed(seed, Stage::SftTrain));
}

SftDataset generate_sft_dataset(const EnvConfig& env_cfg, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw InvalidInput("generate_sft_dataset: need at least one episode");
  const DeliberationEnv env(env_cfg);
  SftDataset data;
  data.env = env_cfg;
  data.seed = seed;
  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(episode_seed(env_cfg, seed, static_cast<std::uint64_t>(e)));
    auto [state, obs] = env.reset(rng);
    while (!env.terminal(state)) {
      obs = env.observe_all(state);
      std::vector<Action> actions;
      for (int i = 0; i < env_cfg.n_agents; ++i) {
        actions.push_back(oracle_action(state, i));
        data.items.push_back({obs[i], actions.back()});
      }
      state = env.step(state, actions, rng).first;
    }
  }
  return data;
}

SftResult train_sft(const SftDataset& data, PolicyParams init, const OptimConfig& optim,
                    const PipelineConfig& pipe, std::uint64_t seed) {
  if (data.items.empty()) throw InvalidInput("train_sft: empty dataset");
  OptimConfig cfg = optim;
  cfg.lr = pipe.sft_lr;
  cfg.schedule = Schedule::Constant;
  cfg.updater = UpdaterKind::Adam;

  SftResult out{std::move(init), {}, 0.0};
  UpdaterState state;
  std::vector<std::size_t> order(data.items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(pipe.batch_size);

  for (int epoch = 1; epoch <= pipe.sft_max_epochs; ++epoch) {
    Rng rng(derive_seed(seed, {kShuffle, static_cast<std::uint64_t>(epoch)}));
    shuffle_indices(order, rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const auto idx = std::span(order).subspan(start, std::min(batch, order.size() - start));
      const auto items = gather(data.items, idx);
      auto r = sft_loss_and_grad(items, out.params);
      require_finite(r.loss, "sft loss at epoch " + std::to_string(epoch));
      epoch_loss += r.loss * static_cast<double>(idx.size());
      update_step(out.params.flat(), r.grad, cfg, state);
    }
    epoch_loss /= static_cast<double>(order.size());

    int hits = 0;
    for (const auto& item : data.items)
      hits += greedy_action(action_distribution(item.obs, out.params)) == item.label;
    out.epochs.push_back({epoch, epoch_loss, epoch_loss, static_cast<double>(hits) / data.items.size()});

    const auto n = out.epochs.size();
    if (n > static_cast<std::size_t>(pipe.sft_patience) &&
        out.epochs[n - 1 - pipe.sft_patience].train_loss - epoch_loss < pipe.sft_tolerance)
      break;
  }
  out.final_loss = sft_loss_and_grad(data.items, out.params).loss;
  require_finite(out.final_loss, "final sft loss");
  return out;
}

OfflineCorpus generate_offline_corpus(const PolicyParams& policy, const EnvConfig& env_cfg, int n_episodes,
                                      std::uint64_t seed, double reward_scale, RewardHorizon horizon) {
  if (n_episodes < 1) throw InvalidInput("generate_offline_corpus: need at least one episode");
  policy.validate();
  const DeliberationEnv env(env_cfg);
  OfflineCorpus corpus;
  corpus.policy_id = params_digest(policy);
  corpus.env = env_cfg;
  corpus.seed = seed;
  corpus.reward_scale = reward_scale;

  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(episode_seed(env_cfg, seed, static_cast<std::uint64_t>(e)));
    auto [state, obs] = env.reset(rng);
    while (!env.terminal(state)) {
      obs = env.observe_all(state);
      std::vector<Action> actions;
      for (const auto& o : obs) actions.push_back(sample_action(action_distribution(o, policy), rng));
      const std::uint64_t key = rng.next_u64();
      const auto opts = reward_options(env, &policy, reward_scale, horizon, derive_seed(key, {0xc0}));
      for (int i = 0; i < env_cfg.n_agents; ++i) {
        const auto rewards = counterfactual_reward_vector(env, state, actions, i, key, opts);
        corpus.items.push_back({obs[i], std::vector<double>(rewards.values().begin(), rewards.values().end())});
      }
      state = env.step_with_key(state, actions, key).first;
    }
  }
  return corpus;
}

std::vector<TrainItem> shape_corpus(const OfflineCorpus& corpus, Algo algo, const OptimConfig& cfg) {
  std::vector<TrainItem> items;
  items.reserve(corpus.items.size());
  for (const auto& c : corpus.items) {
    TrainItem t{c.obs, c.rewards, {}};
    t.advantages = algo == Algo::Grpo ? grpo_advantages(c.rewards, cfg.grpo_epsilon).values
                                      : softrank_advantages(c.rewards, cfg.softrank).values;
    items.push_back(std::move(t));
  }
  return items;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_corpus(std::size_t n, double heldout_fraction,
                                                                           std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {kSplit}));
  shuffle_indices(idx, rng);
  auto n_held = static_cast<std::size_t>(std::llround(heldout_fraction * static_cast<double>(n)));
  if (n >= 2) n_held = std::clamp<std::size_t>(n_held, 1, n - 1);
  else n_held = 0;
  std::vector<std::size_t> held(idx.end() - static_cast<std::ptrdiff_t>(n_held), idx.end());
  idx.resize(n - n_held);
  return {std::move(idx), std::move(held)};
}

long offline_step_budget(std::size_t corpus_size, const PipelineConfig& pipe) {
  const auto n_train = split_corpus(corpus_size, pipe.heldout_fraction, 0).first.size();
  const auto per_epoch = (n_train + pipe.batch_size - 1) / pipe.batch_size;
  return static_cast<long>(per_epoch) * pipe.rl_epochs;
}

namespace {

TrainResult train_offline(Algo algo, const OfflineCorpus& corpus, const PolicyParams& reference,
                          const OptimConfig& optim, const PipelineConfig& pipe, std::uint64_t seed) {
  optim.validate();
  if (corpus.items.size() < 2) throw InvalidInput("offline training needs at least two corpus items");
  const auto items = shape_corpus(corpus, algo, optim);
  auto [train_idx, held_idx] = split_corpus(items.size(), pipe.heldout_fraction, seed);
  const auto heldout = gather(items, held_idx);

  TrainResult out{reference, {}, {}, 0};
  PolicyParams params = reference;
  UpdaterState state;
  const auto batch = static_cast<std::size_t>(pipe.batch_size);
  double best = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= pipe.rl_epochs; ++epoch) {
    Rng rng(derive_seed(seed, {kShuffle, static_cast<std::uint64_t>(epoch)}));
    shuffle_indices(train_idx, rng);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < train_idx.size(); start += batch) {
      const auto idx = std::span(train_idx).subspan(start, std::min(batch, train_idx.size() - start));
      const auto mb = gather(items, idx);
      auto r = objective_loss_and_grad(mb, params, reference, optim, /*with_variance=*/true);
      require_finite(r.loss, std::string(algo_name(algo)) + " loss at epoch " + std::to_string(epoch) + " step " +
                                 std::to_string(state.step + 1));
      epoch_loss += r.loss * static_cast<double>(idx.size());
      update_step(params.flat(), r.grad, optim, state);
      out.steps.push_back({state.step, r.loss, r.kl, r.entropy, l2_norm(r.grad), r.grad_variance});
    }
    EpochRecord rec{epoch, epoch_loss / static_cast<double>(train_idx.size()),
                    offline_loss(heldout, params, reference, optim), 0.0};
    require_finite(rec.heldout_loss, "held-out loss at epoch " + std::to_string(epoch));
    out.epochs.push_back(rec);
    if (rec.heldout_loss < best) {
      best = rec.heldout_loss;
      out.best_epoch = epoch;
      out.params = params;
    }
  }
  return out;
}

TrainResult train_ppo(const PolicyParams& reference, const EnvConfig& env_cfg, long budget, const OptimConfig& optim,
                      const PipelineConfig& pipe, std::uint64_t seed) {
  optim.validate();
  const DeliberationEnv env(env_cfg);
  TrainResult out{reference, {}, {}, 0};
  PolicyParams& params = out.params;
  auto value = make_value_params(params.dims());
  UpdaterState policy_state, value_state;
  const auto batch = static_cast<std::size_t>(pipe.batch_size);
  std::uint64_t episode = 0;
  int iteration = 0;

  while (policy_state.step < budget) {
    ++iteration;
    std::vector<PpoItem> rollouts;
    for (int e = 0; e < pipe.ppo_episodes_per_iter; ++e, ++episode) {
      Rng rng(episode_seed(env_cfg, derive_seed(seed, {kPpoRollout}), episode));
      auto [state, obs] = env.reset(rng);
      while (!env.terminal(state)) {
        obs = env.observe_all(state);
        std::vector<Action> actions;
        std::vector<double> log_probs;
        for (const auto& o : obs) {
          const auto d = action_distribution(o, params);
          actions.push_back(sample_action(d, rng));
          log_probs.push_back(d.log_probs[static_cast<int>(actions.back())]);
        }
        const std::uint64_t key = rng.next_u64();
        const auto next = env.step_with_key(state, actions, key).first;
        const auto opts = reward_options(env, &params, pipe.reward_scale, pipe.reward_horizon, derive_seed(key, {0xc0}));
        for (int i = 0; i < env_cfg.n_agents; ++i) {
          const double ret = reward_for(env, state, next, i, opts).scaled();
          const double baseline = value_estimate(obs[i], params, value);
          rollouts.push_back({obs[i], actions[i], log_probs[i], ret, ret - baseline});
        }
        state = next;
      }
    }

    std::vector<std::size_t> order(rollouts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    double iter_loss = 0;
    long iter_steps = 0;
    for (int pass = 0; pass < pipe.ppo_epochs && policy_state.step < budget; ++pass) {
      Rng rng(derive_seed(seed, {kShuffle, static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(pass)}));
      shuffle_indices(order, rng);
      for (std::size_t start = 0; start < order.size() && policy_state.step < budget; start += batch) {
        const auto idx = std::span(order).subspan(start, std::min(batch, order.size() - start));
        const auto mb = gather(rollouts, idx);
        auto r = ppo_loss_and_grad(mb, params, value, optim);
        require_finite(r.loss, "ppo loss at iteration " + std::to_string(iteration));
        update_step(params.flat(), r.policy_grad, optim, policy_state);
        update_step(value, r.value_grad, optim, value_state);
        out.steps.push_back({policy_state.step, r.loss, 0.0, 0.0, l2_norm(r.policy_grad), 0.0});
        iter_loss += r.loss;
        ++iter_steps;
      }
    }
    out.epochs.push_back({iteration, iter_steps ? iter_loss / iter_steps : 0.0, 0.0, 0.0});
  }
  out.best_epoch = iteration;
  return out;
}

}  // namespace

TrainResult train_softrankpo(const OfflineCorpus& corpus, const PolicyParams& reference, const OptimConfig& optim,
                             const PipelineConfig& pipe, std::uint64_t seed) {
  return train_offline(Algo::SoftRankPO, corpus, reference, optim, pipe, seed);
}

TrainResult train_baseline(Algo algo, const OfflineCorpus& corpus, const PolicyParams& reference,
                           const EnvConfig& env, const OptimConfig& optim, const PipelineConfig& pipe,
                           std::uint64_t seed) {
  switch (algo) {
    case Algo::SoftRankPO:
    case Algo::Grpo: return train_offline(algo, corpus, reference, optim, pipe, seed);
    case Algo::Ppo: return train_ppo(reference, env, offline_step_budget(corpus.items.size(), pipe), optim, pipe, seed);
  }
  throw InternalError("train_baseline: unknown algorithm");
}

EvalReport evaluate_rule(const DecisionRule& rule, const EnvConfig& env_cfg, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw InvalidInput("evaluate: need at least one episode");
  const DeliberationEnv env(env_cfg);
  EvalReport rep;
  rep.episodes = n_episodes;
  std::array<double, kNumActions> counts{};
  double correct = 0, cost_sum = 0, cost_sq = 0;

  for (int e = 0; e < n_episodes; ++e) {
    Rng rng(episode_seed(env_cfg, seed, static_cast<std::uint64_t>(e)));
    auto [state, obs] = env.reset(rng);
    double cost = 0;
    while (!env.terminal(state)) {
      obs = env.observe_all(state);
      std::vector<Action> actions;
      for (int i = 0; i < env_cfg.n_agents; ++i) {
        actions.push_back(rule(state, i, obs[i]));
        counts[static_cast<int>(actions.back())] += 1;
        if (actions.back() != Action::Persist) cost += 1;
      }
      state = env.step(state, actions, rng).first;
    }
    correct += consensus(state).correct ? 1 : 0;
    cost_sum += cost;
    cost_sq += cost * cost;
  }

  const double n = n_episodes;
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  constexpr double z = 1.959963984540054;
  rep.accuracy = correct / n;
  rep.accuracy_halfwidth = z * std::sqrt(rep.accuracy * (1 - rep.accuracy) / n);
  for (int a = 0; a < kNumActions; ++a) {
    rep.action_freq[a] = counts[a] / total;
    rep.action_freq_halfwidth[a] = z * std::sqrt(rep.action_freq[a] * (1 - rep.action_freq[a]) / total);
  }
  rep.mean_cost = cost_sum / n;
  const double var = n > 1 ? std::max(0.0, (cost_sq - n * rep.mean_cost * rep.mean_cost) / (n - 1)) : 0.0;
  rep.cost_halfwidth = z * std::sqrt(var / n);
  return rep;
}

EvalReport evaluate(const PolicyParams& policy, const EnvConfig& env, int n_episodes, std::uint64_t seed) {
  policy.validate();
  return evaluate_rule(
      [&](const WorldState&, int, const Observation& obs) { return greedy_action(action_distribution(obs, policy)); },
      env, n_episodes, seed);
}

std::vector<std::string> trace_episode(const PolicyParams& policy, const EnvConfig& env_cfg, std::uint64_t seed) {
  const DeliberationEnv env(env_cfg);
  Rng rng(episode_seed(env_cfg, seed, 0));
  auto [state, obs] = env.reset(rng);
  std::vector<std::string> lines;
  while (!env.terminal(state)) {
    obs = env.observe_all(state);
    std::vector<Action> actions;
    for (const auto& o : obs) actions.push_back(greedy_action(action_distribution(o, policy)));
    const auto key = rng.next_u64();
    const auto next = env.step_with_key(state, actions, key).first;
    nlohmann::json rec;
    rec["round"] = state.round;
    for (int i = 0; i < env_cfg.n_agents; ++i) {
      const auto r = reward_for(env, state, next, i, RewardOptions{});
      rec["agents"].push_back({{"agent", i},
                               {"cluster_before", state.agents[i].cluster},
                               {"action", std::string(action_name(actions[i]))},
                               {"cluster_after", next.agents[i].cluster},
                               {"r_local", r.local},
                               {"r_global", r.global}});
    }
    const auto c = consensus(next);
    rec["consensus"] = {{"cluster", c.cluster}, {"correct", c.correct}};
    lines.push_back(rec.dump());
    state = next;
  }
  return lines;
}

}  // namespace srpo
