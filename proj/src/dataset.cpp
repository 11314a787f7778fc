#include "srpo/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "srpo/digest.hpp"
#include "srpo/error.hpp"

namespace srpo {
namespace {

constexpr const char* kCorpusMagic = "srpo-corpus";
constexpr int kCorpusVersion = 1;

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void hash_state(Fnv1a& h, const MetaCognitiveState& z) {
  for (double x : z.features()) h.add(x);
}

void hash_observation(Fnv1a& h, const Observation& obs) {
  hash_state(h, obs.own);
  h.add(static_cast<std::uint64_t>(obs.peers.size()));
  for (const auto& p : obs.peers) hash_state(h, p);
}

void write_state(std::ostream& os, const MetaCognitiveState& z) {
  for (double x : z.features()) os << ' ' << fmt(x);
}

MetaCognitiveState read_state(std::istream& is) {
  std::array<double, kStateDim> f{};
  for (double& x : f)
    if (!(is >> x)) throw InvalidInput("corpus: truncated state");
  MetaCognitiveState z;
  z.answer = {f[0], f[1], f[2]};
  z.profile = {f[3], f[4], f[5], f[6]};
  z.critic = {f[7], f[8]};
  return z;
}

template <typename T>
T read_field(std::istream& is, const std::string& expected) {
  std::string tag;
  T value{};
  if (!(is >> tag >> value) || tag != expected) throw InvalidInput("corpus: expected '" + expected + "'");
  return value;
}

}  // namespace

void hash_env_config(Fnv1a& h, const EnvConfig& c) {
  h.add(static_cast<std::uint64_t>(c.n_agents));
  h.add(static_cast<std::uint64_t>(c.n_rounds));
  h.add(c.difficulty);
  h.add(c.p_init_correct);
  h.add(c.correct_floor);
  h.add(c.refine_gain);
  h.add(c.refine_degrade);
  h.add(c.confidence_fidelity);
  h.add(c.critic_accuracy);
  h.add(static_cast<std::uint64_t>(c.answer_space));
  h.add(c.seed);
}

std::string SftDataset::digest() const {
  Fnv1a h;
  hash_env_config(h, env);
  h.add(seed);
  h.add(static_cast<std::uint64_t>(items.size()));
  for (const auto& item : items) {
    hash_observation(h, item.obs);
    h.add(static_cast<std::uint64_t>(item.label));
  }
  return h.hex();
}

std::string OfflineCorpus::digest() const {
  Fnv1a h;
  h.add(policy_id);
  hash_env_config(h, env);
  h.add(seed);
  h.add(reward_scale);
  h.add(static_cast<std::uint64_t>(items.size()));
  for (const auto& item : items) {
    hash_observation(h, item.obs);
    h.add(static_cast<std::uint64_t>(item.rewards.size()));
    for (double r : item.rewards) h.add(r);
  }
  return h.hex();
}

OfflineCorpus rescale_corpus(const OfflineCorpus& corpus, double factor) {
  if (!(factor > 0)) throw InvalidInput("rescale_corpus: factor must be positive");
  OfflineCorpus out = corpus;
  out.reward_scale = corpus.reward_scale * factor;
  for (auto& item : out.items)
    for (double& r : item.rewards) r *= factor;
  return out;
}

void write_corpus(std::ostream& os, const OfflineCorpus& c) {
  const auto& e = c.env;
  os << kCorpusMagic << ' ' << kCorpusVersion << ' ' << c.digest() << '\n';
  os << "policy " << c.policy_id << '\n';
  os << "seed " << c.seed << '\n';
  os << "reward_scale " << fmt(c.reward_scale) << '\n';
  os << "env " << e.n_agents << ' ' << e.n_rounds << ' ' << fmt(e.difficulty) << ' ' << fmt(e.p_init_correct)
     << ' ' << fmt(e.correct_floor) << ' ' << fmt(e.refine_gain) << ' ' << fmt(e.refine_degrade) << ' '
     << fmt(e.confidence_fidelity) << ' ' << fmt(e.critic_accuracy) << ' ' << e.answer_space << ' ' << e.seed
     << '\n';
  os << "items " << c.items.size() << '\n';
  for (const auto& item : c.items) {
    os << item.obs.peers.size();
    write_state(os, item.obs.own);
    for (const auto& p : item.obs.peers) write_state(os, p);
    os << ' ' << item.rewards.size();
    for (double r : item.rewards) os << ' ' << fmt(r);
    os << '\n';
  }
  os << "end\n";
}

OfflineCorpus read_corpus(std::istream& is) {
  std::string magic, recorded;
  int version = 0;
  if (!(is >> magic >> version >> recorded) || magic != kCorpusMagic) throw InvalidInput("corpus: bad header");
  if (version != kCorpusVersion) throw InvalidInput("corpus: unsupported version");

  OfflineCorpus c;
  c.policy_id = read_field<std::string>(is, "policy");
  c.seed = read_field<std::uint64_t>(is, "seed");
  c.reward_scale = read_field<double>(is, "reward_scale");
  std::string tag;
  auto& e = c.env;
  if (!(is >> tag >> e.n_agents >> e.n_rounds >> e.difficulty >> e.p_init_correct >> e.correct_floor >>
        e.refine_gain >> e.refine_degrade >> e.confidence_fidelity >> e.critic_accuracy >> e.answer_space >>
        e.seed) ||
      tag != "env")
    throw InvalidInput("corpus: bad env record");
  const auto count = read_field<std::size_t>(is, "items");
  c.items.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    CorpusItem item;
    std::size_t peers = 0, k = 0;
    if (!(is >> peers)) throw InvalidInput("corpus: truncated item");
    item.obs.own = read_state(is);
    for (std::size_t j = 0; j < peers; ++j) item.obs.peers.push_back(read_state(is));
    if (!(is >> k)) throw InvalidInput("corpus: truncated item");
    item.rewards.resize(k);
    for (double& r : item.rewards)
      if (!(is >> r)) throw InvalidInput("corpus: truncated rewards");
    c.items.push_back(std::move(item));
  }
  if (!(is >> tag) || tag != "end") throw InvalidInput("corpus: missing end marker");
  if (c.digest() != recorded)
    throw InvalidInput("corpus: content digest mismatch (recorded " + recorded + ", computed " + c.digest() + ")");
  return c;
}

void save_corpus(const std::filesystem::path& path, const OfflineCorpus& corpus) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("corpus: cannot open " + path.string() + " for writing");
  write_corpus(os, corpus);
}

OfflineCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidInput("corpus: cannot open " + path.string());
  return read_corpus(is);
}

}  // namespace srpo
