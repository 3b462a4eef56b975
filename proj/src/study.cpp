#include "monocurve/study.hpp"

#include <algorithm>
#include <chrono>

#include "monocurve/error.hpp"
#include "monocurve/parallel.hpp"

namespace monocurve::study {

std::uint64_t fit_seed(std::uint64_t data_seed) { return data_seed + 0x9E3779B97F4A7C15ULL; }

ReplicateResult run_replicate(const synth::SyntheticSpec& spec, const trainer::TrainConfig& config,
                              std::size_t w2_cap) {
  const auto started = std::chrono::steady_clock::now();
  ReplicateResult out;
  out.sigma_f = spec.sigma_f;
  out.seed = spec.seed;
  try {
    const synth::LabeledSample sample = synth::generate(spec);
    const trainer::FitResult fitted = trainer::fit(sample.X, config);
    const trainer::CurveModel& model = fitted.model;
    const Eigen::MatrixXd z = model.stats.apply(sample.X);
    const Eigen::MatrixXd curve = trainer::evaluate_curve(model, z);
    const Eigen::MatrixXd truth = model.stats.apply(sample.truth);
    out.score = metrics::score_curve(curve, truth, w2_cap, spec.seed);
    out.stop_iteration = fitted.report.stop_iteration;
    out.best_iteration = fitted.report.best_iteration;
    out.val_L_minus = fitted.report.final_val.L_minus;
    out.orth_error = trainer::orthogonality_error(model.U);
    const Eigen::VectorXd s = trainer::diagonal_coordinates(model, z);
    for (const auto& net : model.ginv_nets) {
      out.monotone_violation = std::max(
          out.monotone_violation, trainer::monotone_violation_fraction(net, s.minCoeff(), s.maxCoeff()));
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<ReplicateResult> run_study(const StudyConfig& config) {
  if (config.replicates < 1) throw Error(Errc::InvalidArgument, "replicates must be >= 1");
  if (config.sigma_fs.empty()) throw Error(Errc::InvalidArgument, "sigma_f list is empty");
  const auto reps = static_cast<std::size_t>(config.replicates);
  std::vector<ReplicateResult> results(config.sigma_fs.size() * reps);
  parallel_for(results.size(), config.threads, [&](std::size_t idx) {
    const std::size_t level = idx / reps;
    const int r = static_cast<int>(idx % reps);
    synth::SyntheticSpec spec = config.base;
    spec.sigma_f = config.sigma_fs[level];
    spec.seed = config.base.seed + static_cast<std::uint64_t>(r);
    trainer::TrainConfig train = config.train;
    train.seed = fit_seed(spec.seed);
    results[idx] = run_replicate(spec, train, config.w2_cap);
    results[idx].replicate = r;
  });
  return results;
}

}  // namespace monocurve::study
