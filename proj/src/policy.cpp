#include "srpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srpo/error.hpp"

namespace srpo {

std::string_view action_name(Action a) {
  switch (a) {
    case Action::Persist: return "persist";
    case Action::Refine: return "refine";
    case Action::Concede: return "concede";
  }
  return "?";
}

std::string_view block_name(Block b) {
  switch (b) {
    case Block::EncoderWeight: return "encoder.weight";
    case Block::EncoderBias: return "encoder.bias";
    case Block::Query: return "attention.query";
    case Block::Key: return "attention.key";
    case Block::Value: return "attention.value";
    case Block::HiddenWeight: return "hidden.weight";
    case Block::HiddenBias: return "hidden.bias";
    case Block::HeadWeight: return "head.weight";
    case Block::HeadBias: return "head.bias";
  }
  return "?";
}

std::array<double, kStateDim> MetaCognitiveState::features() const {
  return {answer[0], answer[1], answer[2], profile[0], profile[1],
          profile[2], profile[3], critic[0], critic[1]};
}

void MetaCognitiveState::validate() const {
  auto in_unit = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!in_unit(answer[0]) || (answer[1] != 0.0 && answer[1] != 1.0) || !(answer[2] > 0.0) ||
      answer[2] > 1.0)
    throw InvalidInput("MetaCognitiveState: agreement features out of range");
  if (!in_unit(profile[0]) || profile[1] < 0 || profile[2] < 0 || profile[1] + profile[2] > 1.0 ||
      !in_unit(profile[3]))
    throw InvalidInput("MetaCognitiveState: profile features out of range");
  const bool one_hot = (critic[0] == 1.0 && critic[1] == 0.0) || (critic[0] == 0.0 && critic[1] == 1.0);
  if (!one_hot) throw InvalidInput("MetaCognitiveState: critic verdict is not one-hot");
}

PolicyParams::PolicyParams(PolicyDims dims) : dims_(dims) {
  if (dims.d_model < 1 || dims.d_hidden < 0)
    throw ConfigError("PolicyParams: d_model must be >= 1 and d_hidden >= 0", "d_model");
  std::size_t total = 0;
  for (int b = 0; b < kNumBlocks; ++b) {
    offsets_[b] = total;
    const auto [rows, cols] = block_shape(static_cast<Block>(b));
    total += static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  }
  offsets_[kNumBlocks] = total;
  data_.assign(total, 0.0);
}

std::pair<int, int> PolicyParams::block_shape(Block b) const noexcept {
  const int d = dims_.d_model, h = dims_.d_hidden;
  const int head_in = h > 0 ? h : 2 * d;
  switch (b) {
    case Block::EncoderWeight: return {d, kStateDim};
    case Block::EncoderBias: return {d, 1};
    case Block::Query:
    case Block::Key:
    case Block::Value: return {d, d};
    case Block::HiddenWeight: return {h, 2 * d};
    case Block::HiddenBias: return {h, 1};
    case Block::HeadWeight: return {kNumActions, head_in};
    case Block::HeadBias: return {kNumActions, 1};
  }
  return {0, 0};
}

std::span<double> PolicyParams::block(Block b) noexcept {
  const auto i = static_cast<std::size_t>(b);
  return std::span<double>(data_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

std::span<const double> PolicyParams::block(Block b) const noexcept {
  const auto i = static_cast<std::size_t>(b);
  return std::span<const double>(data_).subspan(offsets_[i], offsets_[i + 1] - offsets_[i]);
}

PolicyParams PolicyParams::random(PolicyDims dims, Rng& rng, double scale) {
  PolicyParams p(dims);
  for (Block b : {Block::EncoderWeight, Block::Query, Block::Key, Block::Value, Block::HiddenWeight,
                  Block::HeadWeight})
    for (double& w : p.block(b)) w = scale * (2.0 * rng.uniform() - 1.0);
  return p;
}

void PolicyParams::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      throw ConfigError("PolicyParams: entry " + std::to_string(i) + " is not finite");
}

namespace {

// y = W x (+ b), W row-major (rows, cols).
void matvec(std::span<const double> w, std::span<const double> x, std::span<double> y,
            std::span<const double> bias = {}) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < y.size(); ++r) {
    double acc = bias.empty() ? 0.0 : bias[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

// dx += W^T dy; dW += dy x^T.
void matvec_backward(std::span<const double> w, std::span<const double> x, std::span<const double> dy,
                     std::span<double> dw, std::span<double> dx) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const double g = dy[r];
    if (g == 0.0) continue;
    double* drow = dw.data() + r * cols;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) {
      drow[c] += g * x[c];
      if (!dx.empty()) dx[c] += g * row[c];
    }
  }
}

std::span<double> grad_block(const PolicyParams& params, std::span<double> grad, Block b) {
  const auto base = params.block(b).data() - params.flat().data();
  return grad.subspan(static_cast<std::size_t>(base), params.block(b).size());
}

}  // namespace

ActionDistribution softmax_distribution(const std::array<double, kNumActions>& logits) {
  ActionDistribution d;
  d.logits = logits;
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0;
  for (int a = 0; a < kNumActions; ++a) s += std::exp(logits[a] - m);
  const double lse = m + std::log(s);
  for (int a = 0; a < kNumActions; ++a) {
    d.log_probs[a] = logits[a] - lse;
    d.probs[a] = std::exp(d.log_probs[a]);
  }
  return d;
}

std::vector<double> attention_weights(std::span<const double> query,
                                      const std::vector<std::vector<double>>& keys) {
  std::vector<double> w(keys.size());
  if (keys.empty()) return w;
  const double scale = 1.0 / std::sqrt(static_cast<double>(query.size()));
  for (std::size_t j = 0; j < keys.size(); ++j) {
    double s = 0;
    for (std::size_t c = 0; c < query.size(); ++c) s += query[c] * keys[j][c];
    w[j] = s * scale;
  }
  const double m = *std::max_element(w.begin(), w.end());
  double total = 0;
  for (double& x : w) total += (x = std::exp(x - m));
  for (double& x : w) x /= total;
  return w;
}

ForwardPass forward(const Observation& obs, const PolicyParams& params) {
  const int d = params.dims().d_model;
  const int h = params.dims().d_hidden;
  ForwardPass f;

  f.inputs.push_back(obs.own.features());
  for (const auto& peer : obs.peers) f.inputs.push_back(peer.features());

  const auto enc_w = params.block(Block::EncoderWeight);
  const auto enc_b = params.block(Block::EncoderBias);
  f.encoded.assign(f.inputs.size(), std::vector<double>(d));
  for (std::size_t j = 0; j < f.inputs.size(); ++j) {
    matvec(enc_w, f.inputs[j], f.encoded[j], enc_b);
    for (double& x : f.encoded[j]) x = std::tanh(x);
  }

  f.query.assign(d, 0.0);
  matvec(params.block(Block::Query), f.encoded[0], f.query);
  const std::size_t n_peers = obs.peers.size();
  f.keys.assign(n_peers, std::vector<double>(d));
  f.values.assign(n_peers, std::vector<double>(d));
  for (std::size_t j = 0; j < n_peers; ++j) {
    matvec(params.block(Block::Key), f.encoded[j + 1], f.keys[j]);
    matvec(params.block(Block::Value), f.encoded[j + 1], f.values[j]);
  }
  f.attention = attention_weights(f.query, f.keys);

  f.features.assign(2 * d, 0.0);
  std::copy(f.encoded[0].begin(), f.encoded[0].end(), f.features.begin());
  for (std::size_t j = 0; j < n_peers; ++j)
    for (int c = 0; c < d; ++c) f.features[d + c] += f.attention[j] * f.values[j][c];

  std::array<double, kNumActions> logits{};
  if (h > 0) {
    f.hidden.assign(h, 0.0);
    matvec(params.block(Block::HiddenWeight), f.features, f.hidden, params.block(Block::HiddenBias));
    for (double& x : f.hidden) x = std::tanh(x);
    matvec(params.block(Block::HeadWeight), f.hidden, logits, params.block(Block::HeadBias));
  } else {
    matvec(params.block(Block::HeadWeight), f.features, logits, params.block(Block::HeadBias));
  }
  f.dist = softmax_distribution(logits);
  return f;
}

void backward(const ForwardPass& f, const PolicyParams& params,
              const std::array<double, kNumActions>& d_logits, std::span<const double> d_features,
              std::span<double> grad) {
  if (grad.size() != params.size()) throw ConfigError("backward: gradient buffer size mismatch");
  const int d = params.dims().d_model;
  const int h = params.dims().d_hidden;

  auto g_head_b = grad_block(params, grad, Block::HeadBias);
  for (int a = 0; a < kNumActions; ++a) g_head_b[a] += d_logits[a];

  std::vector<double> df(2 * d, 0.0);
  if (h > 0) {
    std::vector<double> dh(h, 0.0);
    matvec_backward(params.block(Block::HeadWeight), f.hidden, d_logits,
                    grad_block(params, grad, Block::HeadWeight), dh);
    for (int i = 0; i < h; ++i) dh[i] *= 1.0 - f.hidden[i] * f.hidden[i];
    auto g_hid_b = grad_block(params, grad, Block::HiddenBias);
    for (int i = 0; i < h; ++i) g_hid_b[i] += dh[i];
    matvec_backward(params.block(Block::HiddenWeight), f.features, dh,
                    grad_block(params, grad, Block::HiddenWeight), df);
  } else {
    matvec_backward(params.block(Block::HeadWeight), f.features, d_logits,
                    grad_block(params, grad, Block::HeadWeight), df);
  }
  if (!d_features.empty())
    for (int c = 0; c < 2 * d; ++c) df[c] += d_features[c];

  std::vector<std::vector<double>> de(f.encoded.size(), std::vector<double>(d, 0.0));
  for (int c = 0; c < d; ++c) de[0][c] = df[c];

  const std::size_t n_peers = f.keys.size();
  if (n_peers > 0) {
    const std::span<const double> dc(df.data() + d, d);
    // Through the attention-weighted sum of values.
    std::vector<double> dw(n_peers);
    for (std::size_t j = 0; j < n_peers; ++j) {
      double s = 0;
      for (int c = 0; c < d; ++c) s += dc[c] * f.values[j][c];
      dw[j] = s;
    }
    double wdw = 0;
    for (std::size_t j = 0; j < n_peers; ++j) wdw += f.attention[j] * dw[j];
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    std::vector<double> dq(d, 0.0), dk(d), dv(d);
    for (std::size_t j = 0; j < n_peers; ++j) {
      const double ds = f.attention[j] * (dw[j] - wdw) * scale;
      for (int c = 0; c < d; ++c) {
        dq[c] += ds * f.keys[j][c];
        dk[c] = ds * f.query[c];
        dv[c] = f.attention[j] * dc[c];
      }
      matvec_backward(params.block(Block::Key), f.encoded[j + 1], dk,
                      grad_block(params, grad, Block::Key), de[j + 1]);
      matvec_backward(params.block(Block::Value), f.encoded[j + 1], dv,
                      grad_block(params, grad, Block::Value), de[j + 1]);
    }
    matvec_backward(params.block(Block::Query), f.encoded[0], dq, grad_block(params, grad, Block::Query),
                    de[0]);
  }

  auto g_enc_w = grad_block(params, grad, Block::EncoderWeight);
  auto g_enc_b = grad_block(params, grad, Block::EncoderBias);
  for (std::size_t j = 0; j < f.encoded.size(); ++j) {
    for (int c = 0; c < d; ++c) de[j][c] *= 1.0 - f.encoded[j][c] * f.encoded[j][c];
    for (int c = 0; c < d; ++c) g_enc_b[c] += de[j][c];
    matvec_backward(params.block(Block::EncoderWeight), f.inputs[j], de[j], g_enc_w, {});
  }
}

std::vector<double> encode(const Observation& obs, const PolicyParams& params) {
  return forward(obs, params).features;
}

ActionDistribution action_distribution(const Observation& obs, const PolicyParams& params) {
  return forward(obs, params).dist;
}

std::vector<double> grad_log_prob(const Observation& obs, Action action, const PolicyParams& params) {
  const auto pass = forward(obs, params);
  std::array<double, kNumActions> d_logits{};
  for (int a = 0; a < kNumActions; ++a)
    d_logits[a] = (a == static_cast<int>(action) ? 1.0 : 0.0) - pass.dist.probs[a];
  std::vector<double> grad(params.size(), 0.0);
  backward(pass, params, d_logits, {}, grad);
  return grad;
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
  const double u = rng.uniform();
  double cumulative = 0;
  for (int a = 0; a < kNumActions - 1; ++a) {
    cumulative += dist.probs[a];
    if (u < cumulative) return static_cast<Action>(a);
  }
  // Remaining mass; guard against a zero-probability last action absorbing
  // round-off.
  for (int a = kNumActions - 1; a > 0; --a)
    if (dist.probs[a] > 0) return static_cast<Action>(a);
  return Action::Persist;
}

Action greedy_action(const ActionDistribution& dist) {
  return static_cast<Action>(std::max_element(dist.probs.begin(), dist.probs.end()) - dist.probs.begin());
}

}  // namespace srpo
