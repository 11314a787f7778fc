#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "srpo/rng.hpp"

namespace srpo {

enum class Action : int { Persist = 0, Refine = 1, Concede = 2 };

inline constexpr int kNumActions = 3;
inline constexpr int kStateDim = 9;

std::string_view action_name(Action a);

// One agent's meta-cognitive features.
struct MetaCognitiveState {
  // Agreement: fraction of peers sharing my answer cluster, unique-answer
  // flag, own cluster size / team size.
  std::array<double, 3> answer{};
  // Reasoning profile: normalized step count, two operator-mix weights,
  // self-assessed confidence.
  std::array<double, 4> profile{};
  // Critic verdict one-hot: (says correct, says incorrect).
  std::array<double, 2> critic{};

  std::array<double, kStateDim> features() const;
  void validate() const;

  bool operator==(const MetaCognitiveState&) const = default;
};

struct Observation {
  MetaCognitiveState own;
  std::vector<MetaCognitiveState> peers;

  bool operator==(const Observation&) const = default;
};

struct PolicyDims {
  int d_model = 16;
  // 0 selects the linear ablation: logits come straight from the encoded
  // features without the tanh hidden layer.
  int d_hidden = 32;

  bool operator==(const PolicyDims&) const = default;
};

// Named parameter blocks, in storage order.
enum class Block : int {
  EncoderWeight, EncoderBias, Query, Key, Value, HiddenWeight, HiddenBias, HeadWeight, HeadBias
};
inline constexpr int kNumBlocks = 9;
std::string_view block_name(Block b);

// All weights of the encoder + cross-attention + softmax head, stored in one
// flat array so optimizers and gradient checks can treat them uniformly.
// Matrices are row-major, shape (out, in).
class PolicyParams {
 public:
  explicit PolicyParams(PolicyDims dims = {});

  // Weights uniform in [-scale, scale], biases zero.
  static PolicyParams random(PolicyDims dims, Rng& rng, double scale = 0.1);

  const PolicyDims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::span<double> flat() noexcept { return data_; }
  std::span<const double> flat() const noexcept { return data_; }

  std::span<double> block(Block b) noexcept;
  std::span<const double> block(Block b) const noexcept;
  // (rows, cols) of a block; biases are (n, 1).
  std::pair<int, int> block_shape(Block b) const noexcept;

  // Throws ConfigError if any entry is non-finite.
  void validate() const;

  bool operator==(const PolicyParams&) const = default;

 private:
  PolicyDims dims_;
  std::array<std::size_t, kNumBlocks + 1> offsets_{};
  std::vector<double> data_;
};

struct ActionDistribution {
  std::array<double, kNumActions> logits{};
  std::array<double, kNumActions> probs{};
  std::array<double, kNumActions> log_probs{};
};

ActionDistribution softmax_distribution(const std::array<double, kNumActions>& logits);

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardPass {
  std::vector<std::array<double, kStateDim>> inputs;  // own first, then peers
  std::vector<std::vector<double>> encoded;           // tanh encodings, same order
  std::vector<double> query;
  std::vector<std::vector<double>> keys, values;      // peers only
  std::vector<double> attention;                      // softmax weights over peers
  std::vector<double> features;                       // (own encoding, context)
  std::vector<double> hidden;
  ActionDistribution dist;
};

ForwardPass forward(const Observation& obs, const PolicyParams& params);

// Accumulates into `grad` (size params.size()) the gradient of a scalar whose
// derivative w.r.t. the logits is `d_logits` and w.r.t. the encoded
// features is `d_features` (may be empty).
void backward(const ForwardPass& pass, const PolicyParams& params,
              const std::array<double, kNumActions>& d_logits, std::span<const double> d_features,
              std::span<double> grad);

// Scaled dot-product attention weights softmax(q . k_j / sqrt(d)).
std::vector<double> attention_weights(std::span<const double> query,
                                      const std::vector<std::vector<double>>& keys);

// Concatenation (own encoding, attention context); 2 * d_model entries.
std::vector<double> encode(const Observation& obs, const PolicyParams& params);

ActionDistribution action_distribution(const Observation& obs, const PolicyParams& params);

// Exact gradient of log pi(action | obs) over every parameter entry.
std::vector<double> grad_log_prob(const Observation& obs, Action action, const PolicyParams& params);

// Inverse-CDF draw over the three probabilities.
Action sample_action(const ActionDistribution& dist, Rng& rng);

Action greedy_action(const ActionDistribution& dist);

}  // namespace srpo
