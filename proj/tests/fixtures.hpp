#pragma once

// Random inputs shared by the test binaries.

#include <random>
#include <vector>

#include "srpo/optim.hpp"
#include "srpo/policy.hpp"

namespace fixture {

inline srpo::MetaCognitiveState random_state(std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0, 1);
  srpo::MetaCognitiveState z;
  const double frac = std::floor(u(gen) * 3) / 2;
  z.answer = {std::min(frac, 1.0), frac == 0 ? 1.0 : 0.0, (std::min(frac, 1.0) * 2 + 1) / 3};
  const double a = u(gen), b = u(gen);
  z.profile = {u(gen), std::min(a, b), std::max(a, b) - std::min(a, b), u(gen)};
  const bool says_correct = u(gen) < 0.5;
  z.critic = {says_correct ? 1.0 : 0.0, says_correct ? 0.0 : 1.0};
  return z;
}

inline srpo::Observation random_observation(std::mt19937_64& gen, int n_peers = 2) {
  srpo::Observation obs;
  obs.own = random_state(gen);
  for (int j = 0; j < n_peers; ++j) obs.peers.push_back(random_state(gen));
  return obs;
}

inline srpo::PolicyParams random_params(std::mt19937_64& gen, srpo::PolicyDims dims = {}, double scale = 0.5) {
  srpo::PolicyParams p(dims);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& x : p.flat()) x = u(gen);
  return p;
}

inline std::vector<double> random_advantages(std::mt19937_64& gen) {
  std::normal_distribution<double> n;
  std::vector<double> a(srpo::kNumActions);
  double mean = 0;
  for (double& x : a) mean += (x = n(gen)) / srpo::kNumActions;
  for (double& x : a) x -= mean;
  return a;
}

// Copy of `p` with its flat entries replaced by `x`.
inline srpo::PolicyParams with_flat(const srpo::PolicyParams& p, std::span<const double> x) {
  srpo::PolicyParams out = p;
  std::copy(x.begin(), x.end(), out.flat().begin());
  return out;
}

}  // namespace fixture
