#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "srpo/config.hpp"
#include "srpo/pipeline.hpp"

namespace srpo {

struct SweepRow {
  SweepKind kind = SweepKind::RewardScale;
  double value = 0;
  Algo algo = Algo::SoftRankPO;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;  // set when the cell failed
  EvalReport report;
  double final_train_loss = 0;
  int best_epoch = 0;
  long steps = 0;
};

struct SweepCurvePoint {
  std::size_t row = 0;  // index into SweepResult::rows
  EpochRecord epoch;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::vector<SweepCurvePoint> curves;
  std::size_t failures() const;
};

// One row per (grid value, algorithm). SFT and the base corpus are shared
// across cells whenever the grid does not touch the environment; the
// reward-scale sweep trains on rescaled copies of one corpus. A failing cell
// is recorded and the sweep moves on.
SweepResult run_sweep(const ExperimentConfig& cfg);

// Tab-separated, header first.
//   table:  kind value algo seed status accuracy accuracy_hw persist refine
//           concede mean_cost final_train_loss best_epoch steps error
//   curves: kind value algo seed epoch train_loss heldout_loss
void write_sweep_table(std::ostream& os, const SweepResult& result);
void write_sweep_curves(std::ostream& os, const SweepResult& result);

}  // namespace srpo
