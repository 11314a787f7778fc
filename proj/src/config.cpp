#include "srpo/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "srpo/digest.hpp"
#include "srpo/error.hpp"

namespace srpo {
namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& text, const std::string& key) {
  const auto s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("config: cannot parse '" + s + "' for " + key, key);
  return value;
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (auto t = trim(item); !t.empty()) out.push_back(t);
  return out;
}

struct Field {
  std::string key;
  std::function<void(const std::string& value, const std::string& qualified)> set;
  std::function<std::string()> get;
};

Field real(std::string key, double& x) {
  return {std::move(key), [&x](const std::string& v, const std::string& q) { x = parse_number<double>(v, q); },
          [&x] { return fmt(x); }};
}

Field integer(std::string key, int& x) {
  return {std::move(key), [&x](const std::string& v, const std::string& q) { x = parse_number<int>(v, q); },
          [&x] { return std::to_string(x); }};
}

Field unsigned64(std::string key, std::uint64_t& x) {
  return {std::move(key),
          [&x](const std::string& v, const std::string& q) { x = parse_number<std::uint64_t>(v, q); },
          [&x] { return std::to_string(x); }};
}

template <typename E>
Field choice(std::string key, E& x, std::vector<std::pair<std::string, E>> names) {
  return {std::move(key),
          [&x, names](const std::string& v, const std::string& q) {
            const auto t = trim(v);
            std::string valid;
            for (const auto& [name, value] : names) {
              if (name == t) {
                x = value;
                return;
              }
              valid += (valid.empty() ? "" : ", ") + name;
            }
            throw ConfigError("config: invalid value '" + t + "' for " + q + " (valid: " + valid + ")", q);
          },
          [&x, names] {
            for (const auto& [name, value] : names)
              if (value == x) return name;
            return std::string("?");
          }};
}

struct Section {
  std::string name;  // empty for top-level keys
  std::vector<Field> fields;
};

std::vector<Section> schema(ExperimentConfig& c) {
  auto& e = c.env;
  auto& o = c.optim;
  auto& p = c.pipeline;
  auto& s = c.sweep;
  std::vector<Section> out;
  out.push_back({"",
                 {unsigned64("seed", c.seed),
                  {"out", [&c](const std::string& v, const std::string&) { c.out = trim(v); }, [&c] { return c.out; }}}});
  out.push_back({"env",
                 {integer("n_agents", e.n_agents), integer("n_rounds", e.n_rounds), real("difficulty", e.difficulty),
                  real("p_init_correct", e.p_init_correct), real("correct_floor", e.correct_floor),
                  real("refine_gain", e.refine_gain), real("refine_degrade", e.refine_degrade),
                  real("confidence_fidelity", e.confidence_fidelity), real("critic_accuracy", e.critic_accuracy),
                  integer("answer_space", e.answer_space), unsigned64("seed", e.seed)}});
  out.push_back({"optim",
                 {real("beta", o.beta), real("lambda", o.lambda), real("lr", o.lr),
                  choice("schedule", o.schedule, {{"constant", Schedule::Constant}, {"inv_sqrt", Schedule::InvSqrt}}),
                  choice("updater", o.updater, {{"adam", UpdaterKind::Adam}, {"sgd", UpdaterKind::Sgd}}),
                  choice("objective", o.objective,
                         {{"rank_matching", Objective::RankMatching}, {"kl_regularized", Objective::KlRegularized}}),
                  real("clip_ratio", o.clip_ratio), real("value_coef", o.value_coef), real("tau", o.softrank.tau),
                  real("softrank_epsilon", o.softrank.epsilon), real("grpo_epsilon", o.grpo_epsilon)}});
  out.push_back({"pipeline",
                 {integer("sft_episodes", p.sft_episodes), integer("corpus_episodes", p.corpus_episodes),
                  integer("sft_max_epochs", p.sft_max_epochs), real("sft_tolerance", p.sft_tolerance),
                  integer("sft_patience", p.sft_patience), real("sft_lr", p.sft_lr), integer("rl_epochs", p.rl_epochs),
                  integer("batch_size", p.batch_size), real("heldout_fraction", p.heldout_fraction),
                  integer("eval_episodes", p.eval_episodes), real("reward_scale", p.reward_scale),
                  choice("reward_horizon", p.reward_horizon,
                         {{"round", RewardHorizon::Round}, {"final", RewardHorizon::Final}}),
                  integer("ppo_episodes_per_iter", p.ppo_episodes_per_iter), integer("ppo_epochs", p.ppo_epochs),
                  integer("d_model", p.dims.d_model), integer("d_hidden", p.dims.d_hidden),
                  real("init_scale", p.init_scale)}});

  Field kind = choice("kind", s.kind,
                      {{"reward_scale", SweepKind::RewardScale},
                       {"tau", SweepKind::Tau},
                       {"agents", SweepKind::Agents},
                       {"rounds", SweepKind::Rounds}});
  Field grid{"grid",
             [&s](const std::string& v, const std::string& q) {
               s.grid.clear();
               for (const auto& item : split_list(v)) s.grid.push_back(parse_number<double>(item, q));
             },
             [&s] {
               std::string t;
               for (double x : s.grid) t += (t.empty() ? "" : ", ") + fmt(x);
               return t;
             }};
  Field algos{"algos",
              [&s](const std::string& v, const std::string& q) {
                s.algos.clear();
                for (const auto& item : split_list(v)) {
                  auto a = parse_algo(item);
                  if (!a) throw ConfigError("config: unknown algorithm '" + item + "' in " + q +
                                                " (valid: softrankpo, grpo, ppo)",
                                            q);
                  s.algos.push_back(*a);
                }
              },
              [&s] {
                std::string t;
                for (Algo a : s.algos) t += (t.empty() ? "" : ", ") + std::string(algo_name(a));
                return t;
              }};
  out.push_back({"sweep", {std::move(kind), std::move(grid), std::move(algos)}});
  return out;
}

template <typename F>
void with_prefix(const std::string& section, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(e.what(), section + "." + e.key());
  }
}

}  // namespace

std::string_view sweep_kind_name(SweepKind k) {
  switch (k) {
    case SweepKind::RewardScale: return "reward_scale";
    case SweepKind::Tau: return "tau";
    case SweepKind::Agents: return "agents";
    case SweepKind::Rounds: return "rounds";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  with_prefix("env", [&] { env.validate(); });
  with_prefix("optim", [&] { optim.validate(); });
  with_prefix("pipeline", [&] { pipeline.validate(); });
  if (out.empty()) throw ConfigError("config: out must not be empty", "out");
  if (sweep.present) {
    if (sweep.grid.empty()) throw ConfigError("config: sweep grid is empty", "sweep.grid");
    if (sweep.algos.empty()) throw ConfigError("config: sweep algos is empty", "sweep.algos");
    for (double x : sweep.grid) {
      const bool integral = sweep.kind == SweepKind::Agents || sweep.kind == SweepKind::Rounds;
      if (!(x > 0) || (integral && x != static_cast<int>(x)))
        throw ConfigError("config: invalid sweep grid value " + fmt(x), "sweep.grid");
    }
  }
}

ExperimentConfig parse_config(std::istream& is) {
  pt::ptree tree;
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("config: " + std::string(e.what()), "");
  }

  ExperimentConfig cfg;
  auto sections = schema(cfg);
  auto find_section = [&](const std::string& name) -> Section* {
    for (auto& s : sections)
      if (s.name == name) return &s;
    return nullptr;
  };
  auto apply = [](Section& section, const std::string& key, const std::string& value) {
    const auto qualified = section.name.empty() ? key : section.name + "." + key;
    for (auto& f : section.fields)
      if (f.key == key) return f.set(value, qualified);
    throw ConfigError("config: unknown key '" + qualified + "'", qualified);
  };

  for (const auto& [name, node] : tree) {
    if (node.empty() && !find_section(name)) {
      apply(*find_section(""), name, node.data());
      continue;
    }
    Section* section = name.empty() ? nullptr : find_section(name);
    if (!section) throw ConfigError("config: unknown section '" + name + "'", name);
    if (name == "sweep") cfg.sweep.present = true;
    for (const auto& [key, leaf] : node) apply(*section, key, leaf.data());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InvalidInput("config: cannot open " + path.string());
  return parse_config(is);
}

std::string format_config(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  std::ostringstream os;
  for (const auto& section : schema(copy)) {
    if (section.name == "sweep" && !cfg.sweep.present) continue;
    if (!section.name.empty()) os << "\n[" << section.name << "]\n";
    for (const auto& f : section.fields) os << f.key << " = " << f.get() << '\n';
  }
  return os.str();
}

std::string config_digest(const ExperimentConfig& cfg) {
  // Where results are written does not change them.
  ExperimentConfig copy = cfg;
  copy.out.clear();
  Fnv1a h;
  h.add(std::string_view(format_config(copy)));
  return h.hex();
}

}  // namespace srpo
