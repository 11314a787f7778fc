#include "srpo/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "json.hpp"
#include "srpo/checkpoint.hpp"
#include "srpo/config.hpp"
#include "srpo/dataset.hpp"
#include "srpo/error.hpp"
#include "srpo/pipeline.hpp"
#include "srpo/sweep.hpp"

namespace srpo {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string config;
  std::string algo;
  std::string checkpoint;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<long> episodes;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot open " + path.string() + " for writing");
  return os;
}

// Loads the config, applies flag overrides and echoes the resolved result
// into the output directory.
ExperimentConfig resolve(const Options& opt) {
  auto cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (!opt.out.empty()) cfg.out = opt.out;
  cfg.validate();
  fs::create_directories(cfg.out);
  open_out(fs::path(cfg.out) / "config.ini") << format_config(cfg);
  return cfg;
}

json stamp(const ExperimentConfig& cfg) {
  return {{"config_digest", config_digest(cfg)}, {"seed", cfg.seed}};
}

void write_jsonl(const fs::path& path, const ExperimentConfig& cfg, const std::vector<json>& records) {
  auto os = open_out(path);
  os << stamp(cfg).dump() << '\n';
  for (const auto& r : records) os << r.dump() << '\n';
}

std::map<std::string, std::string> stamp_meta(const ExperimentConfig& cfg, const std::string& kind) {
  return {{"kind", kind}, {"config_digest", config_digest(cfg)}, {"seed", std::to_string(cfg.seed)}};
}

fs::path checkpoint_path(const Options& opt, const ExperimentConfig& cfg) {
  return opt.checkpoint.empty() ? fs::path(cfg.out) / "sft.ckpt" : fs::path(opt.checkpoint);
}

Checkpoint read_existing_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) throw InvalidInput("checkpoint not found: " + path.string() + " (run `srpo sft` first)");
  return load_checkpoint(path);
}

int cmd_sft(const Options& opt, std::ostream& out) {
  const auto cfg = resolve(opt);
  const auto sft = bootstrap_policy(cfg.env, cfg.optim, cfg.pipeline, cfg.seed);

  Checkpoint ckpt{sft.params, stamp_meta(cfg, "sft")};
  ckpt.meta["final_loss"] = fmt(sft.final_loss);
  const auto path = fs::path(cfg.out) / "sft.ckpt";
  save_checkpoint(path, ckpt);

  std::vector<json> records;
  for (const auto& e : sft.epochs) records.push_back({{"epoch", e.epoch}, {"loss", e.train_loss}, {"accuracy", e.accuracy}});
  write_jsonl(fs::path(cfg.out) / "sft_metrics.jsonl", cfg, records);

  out << "sft: " << sft.epochs.size() << " epochs, final loss " << fmt(sft.final_loss) << ", training accuracy "
      << fmt(sft.epochs.back().accuracy) << "\n"
      << "checkpoint: " << path.string() << "\n";
  return 0;
}

OfflineCorpus obtain_corpus(const ExperimentConfig& cfg, const PolicyParams& reference, std::ostream& out) {
  const auto path = fs::path(cfg.out) / "corpus.txt";
  const auto seed = stage_seed(cfg.seed, Stage::Corpus);
  if (fs::exists(path)) {
    auto corpus = load_corpus(path);
    Fnv1a want, have;
    hash_env_config(want, cfg.env);
    hash_env_config(have, corpus.env);
    if (corpus.policy_id != params_digest(reference) || corpus.seed != seed || want.value() != have.value() ||
        corpus.reward_scale != cfg.pipeline.reward_scale)
      throw InvalidInput("existing corpus " + path.string() +
                         " was generated from a different checkpoint or config; remove it to regenerate");
    out << "corpus: reusing " << path.string() << " (digest " << corpus.digest() << " verified)\n";
    return corpus;
  }
  auto corpus = generate_offline_corpus(reference, cfg.env, cfg.pipeline.corpus_episodes, seed,
                                        cfg.pipeline.reward_scale, cfg.pipeline.reward_horizon);
  save_corpus(path, corpus);
  out << "corpus: generated " << corpus.items.size() << " items (digest " << corpus.digest() << ")\n";
  return corpus;
}

int cmd_train(const Options& opt, std::ostream& out) {
  const auto algo = parse_algo(opt.algo);
  if (!algo) throw InvalidInput("unknown algorithm '" + opt.algo + "' (valid: softrankpo, grpo, ppo)");
  const auto cfg = resolve(opt);
  const auto reference = read_existing_checkpoint(checkpoint_path(opt, cfg)).params;
  const auto corpus = obtain_corpus(cfg, reference, out);
  const auto before = corpus.digest();

  const auto trained = train_baseline(*algo, corpus, reference, cfg.env, cfg.optim, cfg.pipeline,
                                      stage_seed(cfg.seed, Stage::Finetune));
  if (corpus.digest() != before) throw InternalError("training modified the offline corpus");

  const std::string name(algo_name(*algo));
  Checkpoint ckpt{trained.params, stamp_meta(cfg, name)};
  ckpt.meta["reference"] = params_digest(reference);
  ckpt.meta["corpus"] = before;
  ckpt.meta["best_epoch"] = std::to_string(trained.best_epoch);
  const auto path = fs::path(cfg.out) / (name + ".ckpt");
  save_checkpoint(path, ckpt);

  std::vector<json> steps, epochs;
  for (const auto& s : trained.steps)
    steps.push_back({{"step", s.step},
                     {"loss", s.loss},
                     {"kl", s.kl},
                     {"entropy", s.entropy},
                     {"grad_norm", s.grad_norm},
                     {"grad_variance", s.grad_variance}});
  for (const auto& e : trained.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"heldout_loss", e.heldout_loss}});
  write_jsonl(fs::path(cfg.out) / (name + "_steps.jsonl"), cfg, steps);
  write_jsonl(fs::path(cfg.out) / (name + "_epochs.jsonl"), cfg, epochs);

  out << name << ": " << trained.steps.size() << " steps, best epoch " << trained.best_epoch << "\n"
      << "checkpoint: " << path.string() << "\n";
  return 0;
}

std::string report_table(const EvalReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "episodes      %d\n"
                "accuracy      %.4f +/- %.4f\n"
                "persist       %.4f +/- %.4f\n"
                "refine        %.4f +/- %.4f\n"
                "concede       %.4f +/- %.4f\n"
                "mean cost     %.4f +/- %.4f\n",
                r.episodes, r.accuracy, r.accuracy_halfwidth, r.action_freq[0], r.action_freq_halfwidth[0],
                r.action_freq[1], r.action_freq_halfwidth[1], r.action_freq[2], r.action_freq_halfwidth[2],
                r.mean_cost, r.cost_halfwidth);
  return buf;
}

int cmd_eval(const Options& opt, std::ostream& out) {
  const auto cfg = resolve(opt);
  const auto ckpt_path = checkpoint_path(opt, cfg);
  const auto ckpt = read_existing_checkpoint(ckpt_path);
  const long n = opt.episodes.value_or(cfg.pipeline.eval_episodes);
  if (n < 1) throw InvalidInput("--episodes must be >= 1, got " + std::to_string(n));

  const auto rep = evaluate(ckpt.params, cfg.env, static_cast<int>(n), stage_seed(cfg.seed, Stage::Eval));
  const auto table = report_table(rep);
  const auto stem = "eval_" + ckpt_path.stem().string();
  open_out(fs::path(cfg.out) / (stem + ".txt")) << "checkpoint    " << ckpt_path.string() << "\n" << table;

  json j = stamp(cfg);
  j["checkpoint"] = params_digest(ckpt.params);
  j["episodes"] = rep.episodes;
  j["accuracy"] = rep.accuracy;
  j["accuracy_halfwidth"] = rep.accuracy_halfwidth;
  j["action_freq"] = {{"persist", rep.action_freq[0]}, {"refine", rep.action_freq[1]}, {"concede", rep.action_freq[2]}};
  j["action_freq_halfwidth"] = {{"persist", rep.action_freq_halfwidth[0]},
                                {"refine", rep.action_freq_halfwidth[1]},
                                {"concede", rep.action_freq_halfwidth[2]}};
  j["mean_cost"] = rep.mean_cost;
  j["cost_halfwidth"] = rep.cost_halfwidth;
  open_out(fs::path(cfg.out) / (stem + ".json")) << j.dump(2) << '\n';

  out << table;
  return 0;
}

int cmd_sweep(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto cfg = resolve(opt);
  if (!cfg.sweep.present) throw ConfigError("config has no [sweep] section", "sweep");
  const auto result = run_sweep(cfg);

  const auto header = "# config_digest=" + config_digest(cfg) + " seed=" + std::to_string(cfg.seed) + "\n";
  auto table = open_out(fs::path(cfg.out) / "sweep_table.tsv");
  table << header;
  write_sweep_table(table, result);
  auto curves = open_out(fs::path(cfg.out) / "sweep_curves.tsv");
  curves << header;
  write_sweep_curves(curves, result);

  for (const auto& r : result.rows) {
    out << sweep_kind_name(r.kind) << '=' << fmt(r.value) << ' ' << algo_name(r.algo) << ": ";
    if (r.ok)
      out << "accuracy " << fmt(r.report.accuracy) << '\n';
    else
      out << "failed\n";
    if (!r.ok) err << "cell " << fmt(r.value) << ' ' << algo_name(r.algo) << " failed: " << r.error << '\n';
  }
  if (result.failures() == result.rows.size()) {
    err << "error: every sweep cell failed\n";
    return 1;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Meta-cognitive deliberation policies: SFT bootstrapping, offline fine-tuning, evaluation"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opt.config, "Experiment config file")->required();
    cmd->add_option("--out", opt.out, "Output directory (overrides the config)");
    cmd->add_option("--seed", opt.seed, "Experiment seed (overrides the config)");
  };
  auto* sft = app.add_subcommand("sft", "Generate oracle data and train the SFT policy");
  add_common(sft);
  auto* train = app.add_subcommand("train", "Fine-tune the SFT policy");
  add_common(train);
  train->add_option("--algo", opt.algo, "softrankpo | grpo | ppo")->required();
  train->add_option("--checkpoint", opt.checkpoint, "Reference checkpoint (default <out>/sft.ckpt)");
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint with greedy actions");
  add_common(eval);
  eval->add_option("--checkpoint", opt.checkpoint, "Checkpoint to evaluate (default <out>/sft.ckpt)");
  eval->add_option("--episodes", opt.episodes, "Evaluation episodes (default from config)");
  auto* sweep = app.add_subcommand("sweep", "Run the configured ablation sweep");
  add_common(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (*sft) return cmd_sft(opt, out);
    if (*train) return cmd_train(opt, out);
    if (*eval) return cmd_eval(opt, out);
    if (*sweep) return cmd_sweep(opt, out, err);
    return 1;
  } catch (const ConfigError& e) {
    err << "error: " << e.what();
    if (!e.key().empty()) err << " [key: " << e.key() << "]";
    err << '\n';
    return 1;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace srpo
