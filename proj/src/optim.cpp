#include "srpo/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "srpo/error.hpp"
#include "srpo/tabular.hpp"

namespace srpo {

void OptimConfig::validate() const {
  if (!(beta > 0) || !std::isfinite(beta)) throw ConfigError("optim: beta must be positive", "beta");
  if (!(lambda >= 0) || !std::isfinite(lambda)) throw ConfigError("optim: lambda must be >= 0", "lambda");
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("optim: lr must be positive", "lr");
  if (!(clip_ratio > 0) || clip_ratio >= 1) throw ConfigError("optim: clip_ratio must be in (0, 1)", "clip_ratio");
  if (!(value_coef >= 0)) throw ConfigError("optim: value_coef must be >= 0", "value_coef");
  if (!(grpo_epsilon > 0)) throw ConfigError("optim: grpo_epsilon must be positive", "grpo_epsilon");
  softrank.validate();
}

namespace {

std::array<double, kNumActions> to_array(const std::vector<double>& v, double scale = 1.0) {
  std::array<double, kNumActions> out{};
  for (int a = 0; a < kNumActions; ++a) out[a] = scale * v[a];
  return out;
}

void check_item(const TrainItem& item) {
  if (item.advantages.size() != static_cast<std::size_t>(kNumActions) ||
      item.rewards.size() != static_cast<std::size_t>(kNumActions))
    throw InvalidBatch("train item: reward/advantage length must equal the action count (3)");
}

// Accumulates per-item gradients, optionally tracking their spread.
class GradAccumulator {
 public:
  GradAccumulator(std::size_t n, std::size_t batch, bool with_variance)
      : sum_(n, 0.0), inv_batch_(1.0 / static_cast<double>(batch)), with_variance_(with_variance) {
    if (with_variance_) {
      sumsq_.assign(n, 0.0);
      item_.assign(n, 0.0);
    }
  }

  void add(const ForwardPass& pass, const PolicyParams& params, const std::vector<double>& d_logits) {
    if (!with_variance_) {
      backward(pass, params, to_array(d_logits, inv_batch_), {}, sum_);
      return;
    }
    std::fill(item_.begin(), item_.end(), 0.0);
    backward(pass, params, to_array(d_logits), {}, item_);
    for (std::size_t j = 0; j < item_.size(); ++j) {
      sum_[j] += item_[j] * inv_batch_;
      sumsq_[j] += item_[j] * item_[j] * inv_batch_;
    }
  }

  std::vector<double> take(double& variance) {
    variance = 0;
    if (with_variance_)
      for (std::size_t j = 0; j < sum_.size(); ++j) variance += std::max(0.0, sumsq_[j] - sum_[j] * sum_[j]);
    return std::move(sum_);
  }

 private:
  std::vector<double> sum_, sumsq_, item_;
  double inv_batch_;
  bool with_variance_;
};

}  // namespace

double l2_norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> make_value_params(const PolicyDims& dims) {
  return std::vector<double>(static_cast<std::size_t>(2 * dims.d_model + 1), 0.0);
}

double value_estimate(const Observation& obs, const PolicyParams& params, std::span<const double> value_params) {
  const auto features = encode(obs, params);
  if (value_params.size() != features.size() + 1) throw ConfigError("value head size mismatch");
  double v = value_params.back();
  for (std::size_t c = 0; c < features.size(); ++c) v += value_params[c] * features[c];
  return v;
}

double implicit_kl_reward(const PolicyParams& params, const PolicyParams& ref_params, const Observation& obs,
                          Action action, double beta) {
  const auto a = static_cast<int>(action);
  return beta * (action_distribution(obs, params).log_probs[a] - action_distribution(obs, ref_params).log_probs[a]);
}

BatchResult softrankpo_loss_and_grad(std::span<const TrainItem> batch, const PolicyParams& params,
                                     const PolicyParams& ref_params, const OptimConfig& cfg, bool with_variance) {
  if (batch.empty()) throw InvalidBatch("softrankpo: empty batch");
  GradAccumulator acc(params.size(), batch.size(), with_variance);
  BatchResult out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    check_item(item);
    const auto pass = forward(item.obs, params);
    const auto ref = action_distribution(item.obs, ref_params);
    const auto s = tabular::softrankpo(pass.dist.logits, ref.log_probs, item.advantages, cfg.beta, cfg.lambda);
    out.loss += s.loss * inv;
    out.kl += s.kl * inv;
    out.entropy += s.entropy * inv;
    acc.add(pass, params, s.d_logits);
  }
  out.grad = acc.take(out.grad_variance);
  return out;
}

BatchResult rank_matching_loss_and_grad(std::span<const TrainItem> batch, const PolicyParams& params,
                                        const PolicyParams& ref_params, const OptimConfig& cfg, bool with_variance) {
  if (batch.empty()) throw InvalidBatch("rank_matching: empty batch");
  GradAccumulator acc(params.size(), batch.size(), with_variance);
  BatchResult out;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    check_item(item);
    const auto pass = forward(item.obs, params);
    const auto ref = action_distribution(item.obs, ref_params);
    const auto s = tabular::rank_matching(pass.dist.logits, ref.log_probs, item.advantages, cfg.beta);
    out.loss += s.loss * inv;
    out.kl += s.kl * inv;
    out.entropy += s.entropy * inv;
    acc.add(pass, params, s.d_logits);
  }
  out.grad = acc.take(out.grad_variance);
  return out;
}

BatchResult objective_loss_and_grad(std::span<const TrainItem> batch, const PolicyParams& params,
                                    const PolicyParams& ref_params, const OptimConfig& cfg, bool with_variance) {
  return cfg.objective == Objective::RankMatching
             ? rank_matching_loss_and_grad(batch, params, ref_params, cfg, with_variance)
             : softrankpo_loss_and_grad(batch, params, ref_params, cfg, with_variance);
}

double rank_matching_loss(std::span<const TrainItem> batch, const PolicyParams& params,
                          const PolicyParams& ref_params, const OptimConfig& cfg) {
  if (batch.empty()) throw InvalidBatch("rank_matching: empty batch");
  double loss = 0;
  for (const auto& item : batch) {
    check_item(item);
    const auto d = action_distribution(item.obs, params);
    const auto ref = action_distribution(item.obs, ref_params);
    loss += tabular::rank_matching(d.logits, ref.log_probs, item.advantages, cfg.beta).loss;
  }
  return loss / static_cast<double>(batch.size());
}

TripleTerms triple_decomposition(std::span<const TrainItem> batch, const PolicyParams& params,
                                 const PolicyParams& ref_params, const OptimConfig& cfg) {
  if (batch.empty()) throw InvalidBatch("triple_decomposition: empty batch");
  TripleTerms t;
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    check_item(item);
    const auto d = action_distribution(item.obs, params);
    const auto ref = action_distribution(item.obs, ref_params);
    const auto parts = tabular::decompose(d.logits, ref.log_probs, item.advantages, cfg.beta);
    t.advantage += parts.advantage * inv;
    t.variance += parts.variance * inv;
    t.covariance += parts.covariance * inv;
  }
  return t;
}

AdvantageVector grpo_advantages(std::span<const double> rewards, double epsilon) {
  // Validates length and finiteness.
  const RewardVector checked(std::vector<double>(rewards.begin(), rewards.end()));
  AdvantageVector out;
  out.values.assign(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    out.degenerate = true;
    return out;
  }
  const double k = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / k;
  double ss = 0;
  for (double r : rewards) ss += (r - mean) * (r - mean);
  const double denom = std::sqrt(ss / k) + epsilon;
  for (std::size_t i = 0; i < rewards.size(); ++i) out.values[i] = (rewards[i] - mean) / denom;
  return out;
}

void attach_old_log_probs(std::span<PpoItem> batch, const PolicyParams& old_params) {
  for (auto& item : batch)
    item.old_log_prob = action_distribution(item.obs, old_params).log_probs[static_cast<int>(item.action)];
}

PpoResult ppo_loss_and_grad(std::span<const PpoItem> batch, const PolicyParams& params,
                            std::span<const double> value_params, const OptimConfig& cfg) {
  if (batch.empty()) throw InvalidBatch("ppo: empty batch");
  const std::size_t n_features = static_cast<std::size_t>(2 * params.dims().d_model);
  if (value_params.size() != n_features + 1) throw ConfigError("ppo: value head size mismatch");

  PpoResult out;
  out.policy_grad.assign(params.size(), 0.0);
  out.value_grad.assign(value_params.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::vector<double> d_features(n_features);

  for (const auto& item : batch) {
    if (!item.old_log_prob) throw InvalidBatch("ppo: rollout item is missing its old log-probability");
    const auto pass = forward(item.obs, params);
    const int a = static_cast<int>(item.action);
    const double ratio = std::exp(pass.dist.log_probs[a] - *item.old_log_prob);
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    const double unclipped = ratio * item.advantage;
    const double clipped = clipped_ratio * item.advantage;
    const bool use_unclipped = unclipped <= clipped;
    if (!use_unclipped) out.clip_fraction += inv;

    double value = value_params.back();
    for (std::size_t c = 0; c < n_features; ++c) value += value_params[c] * pass.features[c];
    const double value_err = value - item.ret;
    out.loss += (-std::min(unclipped, clipped) + cfg.value_coef * value_err * value_err) * inv;

    // d(-surrogate)/d log pi(a) = -ratio * A on the active unclipped branch.
    const double d_logp = use_unclipped ? -unclipped * inv : 0.0;
    std::array<double, kNumActions> d_logits{};
    for (int j = 0; j < kNumActions; ++j) d_logits[j] = d_logp * ((j == a ? 1.0 : 0.0) - pass.dist.probs[j]);

    const double d_value = 2.0 * cfg.value_coef * value_err * inv;
    for (std::size_t c = 0; c < n_features; ++c) {
      out.value_grad[c] += d_value * pass.features[c];
      d_features[c] = d_value * value_params[c];
    }
    out.value_grad.back() += d_value;
    backward(pass, params, d_logits, d_features, out.policy_grad);
  }
  return out;
}

BatchResult sft_loss_and_grad(std::span<const LabeledItem> batch, const PolicyParams& params) {
  if (batch.empty()) throw InvalidBatch("sft: empty batch");
  BatchResult out;
  out.grad.assign(params.size(), 0.0);
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const auto& item : batch) {
    const int label = static_cast<int>(item.label);
    if (label < 0 || label >= kNumActions) throw InvalidBatch("sft: invalid label " + std::to_string(label));
    const auto pass = forward(item.obs, params);
    out.loss -= pass.dist.log_probs[label] * inv;
    for (int a = 0; a < kNumActions; ++a) out.entropy -= pass.dist.probs[a] * pass.dist.log_probs[a] * inv;
    std::array<double, kNumActions> d_logits{};
    for (int a = 0; a < kNumActions; ++a) d_logits[a] = -((a == label ? 1.0 : 0.0) - pass.dist.probs[a]) * inv;
    backward(pass, params, d_logits, {}, out.grad);
  }
  return out;
}

double learning_rate(const OptimConfig& cfg, long step) {
  if (step < 1) throw InvalidInput("learning_rate: step counter starts at 1");
  return cfg.schedule == Schedule::InvSqrt ? cfg.lr / std::sqrt(static_cast<double>(step)) : cfg.lr;
}

void update_step(std::span<double> params, std::span<const double> grads, const OptimConfig& cfg,
                 UpdaterState& state) {
  if (params.size() != grads.size()) throw ConfigError("update_step: parameter/gradient size mismatch");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (!std::isfinite(grads[i]))
      throw NumericError("update_step: gradient entry " + std::to_string(i) + " is " + std::to_string(grads[i]) +
                         " at step " + std::to_string(state.step + 1));

  ++state.step;
  const double eta = learning_rate(cfg, state.step);
  if (cfg.updater == UpdaterKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta * grads[i];
    return;
  }

  constexpr double b1 = 0.9, b2 = 0.999, stabilizer = 1e-8;
  if (state.m.size() != params.size()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1 - b2) * grads[i] * grads[i];
    params[i] -= eta * (state.m[i] / c1) / (std::sqrt(state.v[i] / c2) + stabilizer);
  }
}

}  // namespace srpo
