#pragma once

// Replicated generate -> fit -> score runs over a list of noise scales.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "monocurve/metrics.hpp"
#include "monocurve/synthdata.hpp"
#include "monocurve/trainer.hpp"

namespace monocurve::study {

struct ReplicateResult {
  double sigma_f = 0.0;
  int replicate = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  metrics::ScoreReport score;  // standardized space, x100
  int stop_iteration = 0;
  int best_iteration = -1;
  double val_L_minus = 0.0;
  double orth_error = 0.0;
  double monotone_violation = 0.0;  // worst component
  double seconds = 0.0;
};

/// Generates `spec`, fits it with `config` and scores the fitted curve on the
/// full data against the true curve. Curve and truth are both standardized
/// with the data's column statistics. Library errors are caught into
/// ok = false.
ReplicateResult run_replicate(const synth::SyntheticSpec& spec, const trainer::TrainConfig& config,
                              std::size_t w2_cap = 1024);

struct StudyConfig {
  synth::SyntheticSpec base;  // sigma_f and seed are overridden per run
  std::vector<double> sigma_fs;
  int replicates = 2;
  trainer::TrainConfig train;
  std::size_t w2_cap = 1024;
  unsigned threads = 1;
};

/// Fit seed paired with a data seed. Offset so the split and network draws do
/// not replay the generator's stream.
std::uint64_t fit_seed(std::uint64_t data_seed);

/// Replicate r at every noise scale uses data seed base.seed + r and
/// fit_seed of it, so the noise draws differ across scales only by their
/// scale. Results are sigma-major.
std::vector<ReplicateResult> run_study(const StudyConfig& config);

}  // namespace monocurve::study
