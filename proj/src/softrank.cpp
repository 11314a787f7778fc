#include "srpo/softrank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "srpo/error.hpp"

namespace srpo {

RewardVector::RewardVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.size() < 2)
    throw InvalidInput("RewardVector: need at least 2 entries, got " + std::to_string(values_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!std::isfinite(values_[i]))
      throw InvalidInput("RewardVector: entry " + std::to_string(i) + " is not finite");
}

void SoftRankConfig::validate() const {
  if (!(tau > 0) || !std::isfinite(tau)) throw ConfigError("softrank: tau must be positive", "tau");
  if (!(epsilon > 0) || !std::isfinite(epsilon))
    throw ConfigError("softrank: epsilon must be positive", "epsilon");
}

std::vector<double> rank(std::span<const double> values) {
  const std::size_t k = values.size();
  for (std::size_t i = 0; i < k; ++i)
    if (!std::isfinite(values[i]))
      throw InvalidInput("rank: entry " + std::to_string(i) + " is not finite");

  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(k);
  std::size_t start = 0;
  while (start < k) {
    std::size_t end = start + 1;
    while (end < k && values[order[end]] == values[order[start]]) ++end;
    const double midrank = 0.5 * static_cast<double>(start + end - 1);
    for (std::size_t j = start; j < end; ++j) ranks[order[j]] = midrank;
    start = end;
  }
  return ranks;
}

AdvantageVector softrank_advantages(std::span<const double> rewards, const SoftRankConfig& cfg) {
  cfg.validate();
  if (rewards.size() < 2) throw InvalidInput("softrank_advantages: need at least 2 rewards");
  const auto ranks = rank(rewards);
  const std::size_t k = rewards.size();

  AdvantageVector out;
  out.values.assign(k, 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    out.degenerate = true;
    return out;
  }

  const double kd = static_cast<double>(k);
  std::vector<double> scores(k);
  for (std::size_t i = 0; i < k; ++i)
    scores[i] = inverse_normal_cdf(std::pow((ranks[i] + 0.5) / kd, cfg.tau));

  // Moments are summed in rank order so that permuting the input permutes
  // the output bit for bit.
  auto sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / kd;
  double ss = 0;
  for (double s : sorted) ss += (s - mean) * (s - mean);
  const double denom = std::sqrt(ss / kd) + cfg.epsilon;
  for (std::size_t i = 0; i < k; ++i) out.values[i] = (scores[i] - mean) / denom;
  return out;
}

AdvantageVector softrank_advantages(const RewardVector& rewards, const SoftRankConfig& cfg) {
  return softrank_advantages(rewards.values(), cfg);
}

}  // namespace srpo
