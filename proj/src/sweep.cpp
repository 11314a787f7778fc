#include "srpo/sweep.hpp"

#include <cstdio>
#include <optional>
#include <ostream>

#include "srpo/dataset.hpp"

namespace srpo {
namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string one_line(std::string s) {
  for (char& c : s)
    if (c == '\t' || c == '\n') c = ' ';
  return s;
}

struct Shared {
  PolicyParams reference;
  OfflineCorpus corpus;
};

Shared prepare(const ExperimentConfig& cfg) {
  auto sft = bootstrap_policy(cfg.env, cfg.optim, cfg.pipeline, cfg.seed);
  auto corpus = generate_offline_corpus(sft.params, cfg.env, cfg.pipeline.corpus_episodes,
                                        stage_seed(cfg.seed, Stage::Corpus), cfg.pipeline.reward_scale,
                                        cfg.pipeline.reward_horizon);
  return {std::move(sft.params), std::move(corpus)};
}

}  // namespace

std::size_t SweepResult::failures() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.ok ? 0 : 1;
  return n;
}

SweepResult run_sweep(const ExperimentConfig& base) {
  SweepResult result;
  const auto& sweep = base.sweep;
  const bool env_fixed = sweep.kind == SweepKind::RewardScale || sweep.kind == SweepKind::Tau;
  std::optional<Shared> shared;

  for (double value : sweep.grid) {
    ExperimentConfig cfg = base;
    double corpus_factor = 1.0;
    switch (sweep.kind) {
      case SweepKind::RewardScale:
        corpus_factor = value;
        cfg.pipeline.reward_scale = base.pipeline.reward_scale * value;
        break;
      case SweepKind::Tau: cfg.optim.softrank.tau = value; break;
      case SweepKind::Agents: cfg.env.n_agents = static_cast<int>(value); break;
      case SweepKind::Rounds: cfg.env.n_rounds = static_cast<int>(value); break;
    }

    std::optional<Shared> local;
    std::string setup_error;
    try {
      // Per-cell settings only; the grid itself was checked with the config.
      cfg.env.validate();
      cfg.optim.validate();
      cfg.pipeline.validate();
      if (env_fixed) {
        if (!shared) shared = prepare(base);
      } else {
        local = prepare(cfg);
      }
    } catch (const std::exception& e) {
      setup_error = e.what();
    }

    for (Algo algo : sweep.algos) {
      SweepRow row;
      row.kind = sweep.kind;
      row.value = value;
      row.algo = algo;
      row.seed = cfg.seed;
      if (!setup_error.empty()) {
        row.error = setup_error;
        result.rows.push_back(row);
        continue;
      }
      try {
        const Shared& s = env_fixed ? *shared : *local;
        const auto corpus = corpus_factor == 1.0 ? s.corpus : rescale_corpus(s.corpus, corpus_factor);
        const auto trained = train_baseline(algo, corpus, s.reference, cfg.env, cfg.optim, cfg.pipeline,
                                            stage_seed(cfg.seed, Stage::Finetune));
        row.report = evaluate(trained.params, cfg.env, cfg.pipeline.eval_episodes, stage_seed(cfg.seed, Stage::Eval));
        row.final_train_loss = trained.epochs.empty() ? 0.0 : trained.epochs.back().train_loss;
        row.best_epoch = trained.best_epoch;
        row.steps = static_cast<long>(trained.steps.size());
        row.ok = true;
        for (const auto& ep : trained.epochs) result.curves.push_back({result.rows.size(), ep});
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      result.rows.push_back(row);
    }
  }
  return result;
}

void write_sweep_table(std::ostream& os, const SweepResult& result) {
  os << "kind\tvalue\talgo\tseed\tstatus\taccuracy\taccuracy_hw\tpersist\trefine\tconcede\tmean_cost\t"
        "final_train_loss\tbest_epoch\tsteps\terror\n";
  for (const auto& r : result.rows) {
    const auto& rep = r.report;
    os << sweep_kind_name(r.kind) << '\t' << fmt(r.value) << '\t' << algo_name(r.algo) << '\t' << r.seed << '\t'
       << (r.ok ? "ok" : "failed") << '\t' << fmt(rep.accuracy) << '\t' << fmt(rep.accuracy_halfwidth) << '\t'
       << fmt(rep.action_freq[0]) << '\t' << fmt(rep.action_freq[1]) << '\t' << fmt(rep.action_freq[2]) << '\t'
       << fmt(rep.mean_cost) << '\t' << fmt(r.final_train_loss) << '\t' << r.best_epoch << '\t' << r.steps << '\t'
       << (r.error.empty() ? "-" : one_line(r.error)) << '\n';
  }
}

void write_sweep_curves(std::ostream& os, const SweepResult& result) {
  os << "kind\tvalue\talgo\tseed\tepoch\ttrain_loss\theldout_loss\n";
  for (const auto& p : result.curves) {
    const auto& r = result.rows[p.row];
    os << sweep_kind_name(r.kind) << '\t' << fmt(r.value) << '\t' << algo_name(r.algo) << '\t' << r.seed << '\t'
       << p.epoch.epoch << '\t' << fmt(p.epoch.train_loss) << '\t' << fmt(p.epoch.heldout_loss) << '\n';
  }
}

}  // namespace srpo
