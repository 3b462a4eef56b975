#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "monocurve/convex.hpp"
#include "monocurve/csv.hpp"
#include "monocurve/error.hpp"
#include "monocurve/metrics.hpp"
#include "monocurve/study.hpp"
#include "monocurve/synthdata.hpp"
#include "monocurve/trainer.hpp"

namespace monocurve::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

int exit_code(Errc code) {
  switch (code) {
    case Errc::InvalidArgument:
      return Usage;
    case Errc::NonFinite:
    case Errc::NoConvergence:
    case Errc::NotStrictlyIncreasing:
    case Errc::CovarianceNotPSD:
    case Errc::TapeMismatch:
      return NumericalError;
    default:
      return DataError;
  }
}

unsigned default_threads() {
  if (const char* env = std::getenv("MONOCURVE_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1 && v <= 256) return static_cast<unsigned>(v);
  }
  return 1;
}

std::uint64_t fresh_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

std::string fmt(double v) { return csv::format_double(v); }

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt(v[i]);
  return out;
}

// Ordered key=value record written next to each command's outputs. Keys are
// the long flag names, so the file replays through --config.
class Resolved {
 public:
  void set(const std::string& key, const std::string& value) { entries_.emplace_back(key, value); }
  void set(const std::string& key, double value) { set(key, fmt(value)); }
  void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

  std::string str(const std::string& command) const {
    std::string out = "# monocurve " + command + "\n";
    for (const auto& [k, v] : entries_) out += k + "=" + v + "\n";
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

void write_resolved(const std::string& path, const std::string& command, const Resolved& r) {
  csv::write_file_atomic(path, r.str(command));
}

std::vector<std::string> names(const std::string& prefix, Eigen::Index k) {
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= k; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Observation columns: x1..xk when present, otherwise every column.
Eigen::MatrixXd observations(const csv::Table& t) {
  const auto cols = t.numbered_columns("x");
  return cols.empty() ? t.data : t.select(cols);
}

std::optional<Eigen::MatrixXd> truth_columns(const csv::Table& t) {
  const auto cols = t.numbered_columns("t");
  if (cols.empty()) return std::nullopt;
  return t.select(cols);
}

// ---------------------------------------------------------------------------

struct TrainFlags {
  trainer::TrainConfig config;
  std::string optimizer = "adam";
  bool no_rotation = false;
  double multiplier_rate = -1.0;  // < 0: same as the learning rate
  double max_val_violation = -1.0;  // < 0: no feasibility gate
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda", config.lambda, "reconstruction weight")->capture_default_str();
    cmd->add_option("--tau", config.tau, "inverse-penalty weight")->capture_default_str();
    cmd->add_option("--lr", config.learning_rate, "learning rate")->capture_default_str();
    cmd->add_option("--lr-final", config.lr_final_fraction,
                    "fraction of --lr reached at --max-iters (geometric decay)")
        ->capture_default_str();
    cmd->add_option("--max-iters", config.max_iters)->capture_default_str();
    cmd->add_option("--patience", config.patience)->capture_default_str();
    cmd->add_option("--min-iters", config.min_iters, "warm-up iterations before validation checks")
        ->capture_default_str();
    cmd->add_option("--optimizer", optimizer)->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
    cmd->add_flag("--no-rotation", no_rotation, "fix U = I");
    cmd->add_option("--multiplier-rate", multiplier_rate, "multiplier step (default: --lr)");
    cmd->add_option("--max-val-violation", max_val_violation,
                    "only snapshot iterates whose validation L- is at most this");
    cmd->add_option("--val-fraction", config.val_fraction)->capture_default_str();
    cmd->add_option("--depth", config.depth)->capture_default_str();
    cmd->add_option("--width", config.width)->capture_default_str();
    seed_opt = cmd->add_option("--seed", seed, "random seed (default: fresh)");
  }

  trainer::TrainConfig resolve() {
    if (seed_opt->count() == 0) seed = fresh_seed();
    config.seed = seed;
    config.optimizer = optimizer == "sgd" ? trainer::Optimizer::LiteralSGD : trainer::Optimizer::Adam;
    config.use_rotation = !no_rotation;
    config.multiplier_rate.reset();
    if (multiplier_rate >= 0.0) config.multiplier_rate = multiplier_rate;
    config.max_val_violation.reset();
    if (max_val_violation >= 0.0) config.max_val_violation = max_val_violation;
    config.validate();
    return config;
  }

  void record(Resolved& r, bool with_seed = true) const {
    r.set("lambda", config.lambda);
    r.set("tau", config.tau);
    r.set("lr", config.learning_rate);
    r.set("lr-final", config.lr_final_fraction);
    r.set("max-iters", config.max_iters);
    r.set("patience", config.patience);
    r.set("min-iters", config.min_iters);
    r.set("optimizer", optimizer);
    r.set("no-rotation", no_rotation);
    if (multiplier_rate >= 0.0) r.set("multiplier-rate", multiplier_rate);
    if (max_val_violation >= 0.0) r.set("max-val-violation", max_val_violation);
    r.set("val-fraction", config.val_fraction);
    r.set("depth", config.depth);
    r.set("width", config.width);
    if (with_seed) r.set("seed", seed);
  }
};

json terms_json(const trainer::LossTerms& t) {
  return json{{"L_plus", t.L_plus}, {"L_minus", t.L_minus}, {"R", t.R}, {"M", t.M}, {"P_O", t.P_O}};
}

// ---------------------------------------------------------------------------

struct SimulateCmd {
  synth::SyntheticSpec spec;
  std::string out = "data.csv";
  CLI::Option* seed_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--family", spec.family, "curve family 1, 2 or 3")->capture_default_str();
    cmd->add_option("--dim", spec.dim, "2 or 3")->capture_default_str();
    cmd->add_option("--n", spec.n)->capture_default_str();
    cmd->add_option("--sigma-f", spec.sigma_f, "noise scale")->capture_default_str();
    seed_opt = cmd->add_option("--seed", spec.seed);
    cmd->add_option("--out", out)->capture_default_str();
  }

  int run() {
    if (seed_opt->count() == 0) spec.seed = fresh_seed();
    const synth::LabeledSample sample = synth::generate(spec);
    const Eigen::Index n = sample.X.rows(), k = sample.X.cols();
    Eigen::MatrixXd table(n, 1 + 2 * k);
    table << sample.S, sample.X, sample.truth;
    std::vector<std::string> header{"s"};
    for (const auto& h : names("x", k)) header.push_back(h);
    for (const auto& h : names("t", k)) header.push_back(h);
    csv::write_file_atomic(out, csv::to_string(header, table));

    Resolved r;
    r.set("family", spec.family);
    r.set("dim", spec.dim);
    r.set("n", static_cast<std::uint64_t>(spec.n));
    r.set("sigma-f", spec.sigma_f);
    r.set("seed", spec.seed);
    r.set("out", out);
    write_resolved(out + ".config", "simulate", r);
    if (sample.repair_count > 0) {
      std::cerr << "covariance repaired for " << sample.repair_count << " of " << n << " rows\n";
    }
    std::cout << "wrote " << out << " (" << n << " rows)\n";
    return Ok;
  }
};

struct FitCmd {
  TrainFlags train;
  std::string data;
  std::string out_model = "model.txt";
  std::string out_report = "report.json";
  std::string out_curve = "curve.csv";

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data, "CSV with x1..xk columns (or only numeric columns)")->required();
    train.attach(cmd);
    cmd->add_option("--out-model", out_model)->capture_default_str();
    cmd->add_option("--out-report", out_report)->capture_default_str();
    cmd->add_option("--out-curve", out_curve)->capture_default_str();
  }

  int run() {
    const trainer::TrainConfig config = train.resolve();
    const csv::Table table = csv::load_csv(data, true);
    const Eigen::MatrixXd X = observations(table);
    const trainer::FitResult res = trainer::fit(X, config);
    const trainer::CurveModel& model = res.model;

    std::ostringstream model_text;
    trainer::write_model(model_text, model);
    csv::write_file_atomic(out_model, model_text.str());

    const Eigen::MatrixXd z = model.stats.apply(X);
    const Eigen::VectorXd s = trainer::diagonal_coordinates(model, z);
    const Eigen::MatrixXd curve = model.stats.invert(trainer::evaluate_curve(model, z));
    const std::optional<Eigen::MatrixXd> truth = truth_columns(table);
    const Eigen::Index k = X.cols();
    std::vector<std::string> header{"s"};
    for (const auto& h : names("c", k)) header.push_back(h);
    Eigen::MatrixXd out(X.rows(), 1 + k + (truth ? k : 0));
    out.col(0) = s;
    out.middleCols(1, k) = curve;
    if (truth) {
      out.rightCols(k) = *truth;
      for (const auto& h : names("t", k)) header.push_back(h);
    }
    csv::write_file_atomic(out_curve, csv::to_string(header, out));

    const trainer::FitReport& rep = res.report;
    json j;
    j["stop_iteration"] = rep.stop_iteration;
    j["best_iteration"] = rep.best_iteration;
    j["early_stopped"] = rep.early_stopped;
    j["wall_seconds"] = rep.wall_seconds;
    j["n_train"] = rep.n_train;
    j["n_val"] = rep.n_val;
    j["final_validation"] = terms_json(rep.final_val);
    j["lambda_L"] = model.lambda_L;
    j["lambda_O"] = model.lambda_O;
    j["orthogonality_error"] = trainer::orthogonality_error(model.U);
    if (truth) {
      const metrics::ScoreReport sc =
          metrics::score_curve(model.stats.apply(curve), model.stats.apply(*truth), 1024, config.seed);
      j["hausdorff_x100"] = sc.hausdorff_x100;
      j["wasserstein2_x100"] = sc.wasserstein2_x100;
    }
    j["trace"] = json{{"L_plus", rep.L_plus}, {"L_minus", rep.L_minus}, {"R", rep.R},
                      {"M", rep.M},           {"P_O", rep.P_O},         {"val", rep.val},
                      {"lambda_L", rep.lambda_L}, {"lambda_O", rep.lambda_O}};
    csv::write_file_atomic(out_report, j.dump(2) + "\n");

    Resolved r;
    r.set("data", data);
    train.record(r);
    r.set("out-model", out_model);
    r.set("out-report", out_report);
    r.set("out-curve", out_curve);
    write_resolved(out_model + ".config", "fit", r);

    std::cout << "iterations " << rep.stop_iteration << ", best " << rep.best_iteration
              << ", validation L_H " << rep.final_val.L_plus << ", L_R " << rep.final_val.R
              << ", L- " << rep.final_val.L_minus << "\n";
    return Ok;
  }
};

struct EvaluateCmd {
  std::string curve;
  std::string truth;
  std::string data;
  std::string out = "score.json";
  std::size_t cap = 1024;
  std::uint64_t seed = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("--curve", curve, "CSV with c1..ck, else x1..xk, else only numeric columns")->required();
    cmd->add_option("--truth", truth, "CSV with t1..tk (or only numeric columns)")->required();
    cmd->add_option("--data", data, "standardize both sets with this file's x1..xk statistics");
    cmd->add_option("--cap", cap, "subsample size for the 2-Wasserstein distance")->capture_default_str();
    cmd->add_option("--seed", seed, "subsampling seed")->capture_default_str();
    cmd->add_option("--out", out)->capture_default_str();
  }

  int run() {
    const csv::Table ct = csv::load_csv(curve, true);
    const csv::Table tt = csv::load_csv(truth, true);
    const auto ccols = ct.numbered_columns("c");
    Eigen::MatrixXd C = ccols.empty() ? observations(ct) : ct.select(ccols);
    Eigen::MatrixXd T;
    if (auto t = truth_columns(tt)) {
      T = *t;
    } else {
      T = tt.data;
    }
    if (C.cols() != T.cols()) {
      throw Error(Errc::DimensionMismatch, "curve has " + std::to_string(C.cols()) +
                                               " coordinates, truth has " + std::to_string(T.cols()));
    }
    if (!data.empty()) {
      const trainer::Standardization st = trainer::standardize(observations(csv::load_csv(data, true)), nullptr);
      C = st.apply(C);
      T = st.apply(T);
    }
    const metrics::ScoreReport sc = metrics::score_curve(C, T, cap, seed);
    const std::string text = sc.to_json() + "\n";
    csv::write_file_atomic(out, text);
    std::cout << text;

    Resolved r;
    r.set("curve", curve);
    r.set("truth", truth);
    if (!data.empty()) r.set("data", data);
    r.set("cap", static_cast<std::uint64_t>(cap));
    r.set("seed", seed);
    r.set("out", out);
    write_resolved(out + ".config", "evaluate", r);
    return Ok;
  }
};

struct GridCmd {
  TrainFlags train;
  std::string data;
  std::vector<double> lambdas{1.0, 10.0, 100.0};
  std::vector<double> taus{0.1, 1.0, 10.0};
  std::string out = "grid.csv";

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", data)->required();
    cmd->add_option("--lambdas", lambdas, "comma-separated")->delimiter(',')->capture_default_str();
    cmd->add_option("--taus", taus, "comma-separated")->delimiter(',')->capture_default_str();
    train.attach(cmd);
    cmd->add_option("--out", out)->capture_default_str();
  }

  int run() {
    const trainer::TrainConfig config = train.resolve();
    const csv::Table table = csv::load_csv(data, true);
    const Eigen::MatrixXd X = observations(table);
    const std::optional<Eigen::MatrixXd> truth = truth_columns(table);
    const trainer::GridSearchResult g = trainer::grid_search(X, lambdas, taus, config, default_threads());

    std::vector<std::string> header{"lambda", "tau", "seed", "ok", "L_H", "L_R", "L_H_plus_L_R"};
    if (truth) {
      header.push_back("hausdorff_x100");
      header.push_back("wasserstein2_x100");
    }
    header.push_back("selected");
    std::string text;
    for (std::size_t i = 0; i < header.size(); ++i) text += (i ? "," : "") + header[i];
    text += "\n";
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t c = 0; c < g.cells.size(); ++c) {
      const trainer::GridCell& cell = g.cells[c];
      text += fmt(cell.lambda) + "," + fmt(cell.tau) + "," + std::to_string(cell.seed) + "," +
              (cell.ok ? "1" : "0") + "," + fmt(cell.ok ? cell.L_H : nan) + "," +
              fmt(cell.ok ? cell.L_R : nan) + "," + fmt(cell.ok ? cell.score() : nan);
      if (truth) {
        double h = nan, w = nan;
        if (cell.ok && cell.result) {
          const trainer::CurveModel& m = cell.result->model;
          const metrics::ScoreReport sc = metrics::score_curve(
              trainer::evaluate_curve(m, m.stats.apply(X)), m.stats.apply(*truth), 1024, cell.seed);
          h = sc.hausdorff_x100;
          w = sc.wasserstein2_x100;
        }
        text += "," + fmt(h) + "," + fmt(w);
      }
      text += std::string(",") + (c == g.selected ? "1" : "0") + "\n";
      if (!cell.ok) std::cerr << "cell lambda=" << cell.lambda << " tau=" << cell.tau << " failed: " << cell.error << "\n";
    }
    csv::write_file_atomic(out, text);

    Resolved r;
    r.set("data", data);
    r.set("lambdas", join(lambdas));
    r.set("taus", join(taus));
    train.record(r);
    r.set("out", out);
    write_resolved(out + ".config", "gridsearch", r);
    const trainer::GridCell& sel = g.cells[g.selected];
    std::cout << "selected lambda " << sel.lambda << ", tau " << sel.tau << " (L_H + L_R = " << sel.score()
              << ")\n";
    return Ok;
  }
};

struct ContourCmd {
  double p = 2.0;
  int grid = 201;
  double range = 2.0;
  std::string out = "contour.csv";

  void attach(CLI::App* cmd) {
    cmd->add_option("--p", p, "exponent of f(x) = |x|^p / p; the partner is its conjugate")->capture_default_str();
    cmd->add_option("--grid", grid, "points per axis")->capture_default_str();
    cmd->add_option("--range", range, "grid spans [-range, range] on both axes")->capture_default_str();
    cmd->add_option("--out", out)->capture_default_str();
  }

  int run() {
    if (!(p > 1.0) || !std::isfinite(p)) throw Error(Errc::InvalidArgument, "--p must be > 1");
    if (grid < 2) throw Error(Errc::InvalidArgument, "--grid must be >= 2");
    if (!(range > 0.0) || !std::isfinite(range)) throw Error(Errc::InvalidArgument, "--range must be > 0");
    const double q = p / (p - 1.0);
    const convex::CTuple tuple({convex::AnalyticConvexFn::power(p), convex::AnalyticConvexFn::power(q)});
    Eigen::MatrixXd table(static_cast<Eigen::Index>(grid) * grid, 3);
    double min_h = std::numeric_limits<double>::infinity();
    Eigen::Index row = 0;
    for (int i = 0; i < grid; ++i) {
      const double x1 = -range + 2.0 * range * i / (grid - 1);
      for (int j = 0; j < grid; ++j) {
        const double x2 = -range + 2.0 * range * j / (grid - 1);
        const double x[2] = {x1, x2};
        const double h = convex::H_eval(x, tuple);
        min_h = std::min(min_h, h);
        table.row(row++) << x1, x2, h;
      }
    }
    csv::write_file_atomic(out, csv::to_string({"x1", "x2", "H"}, table));
    Resolved r;
    r.set("p", p);
    r.set("grid", grid);
    r.set("range", range);
    r.set("out", out);
    write_resolved(out + ".config", "contour", r);
    std::cout << "min H over grid " << min_h << "\n";
    return Ok;
  }
};

struct StudyCmd {
  TrainFlags train;
  int family = 3;
  int dim = 2;
  std::size_t n = 5000;
  int replicates = 3;
  std::vector<double> sigma_fs{1.0};
  std::size_t cap = 1024;
  std::string out = "study";

  void attach(CLI::App* cmd) {
    cmd->add_option("--family", family)->capture_default_str();
    cmd->add_option("--dim", dim)->capture_default_str();
    cmd->add_option("--n", n)->capture_default_str();
    cmd->add_option("--replicates", replicates)->capture_default_str();
    cmd->add_option("--sigma-f-list", sigma_fs, "comma-separated noise scales")
        ->delimiter(',')
        ->capture_default_str();
    cmd->add_option("--cap", cap, "subsample size for the 2-Wasserstein distance")->capture_default_str();
    train.attach(cmd);
    cmd->add_option("--out", out, "output directory")->capture_default_str();
  }

  int run() {
    if (replicates < 2) throw Error(Errc::InvalidArgument, "--replicates must be >= 2");
    study::StudyConfig cfg;
    cfg.train = train.resolve();
    cfg.base.family = family;
    cfg.base.dim = dim;
    cfg.base.n = n;
    cfg.base.seed = train.seed;
    cfg.base.validate();
    cfg.sigma_fs = sigma_fs;
    cfg.replicates = replicates;
    cfg.w2_cap = cap;
    cfg.threads = default_threads();
    const std::vector<study::ReplicateResult> results = study::run_study(cfg);

    std::string raw =
        "sigma_f,replicate,seed,ok,hausdorff_x100,wasserstein2_x100,mse,stop_iteration,best_iteration,"
        "val_L_minus,orthogonality_error,monotone_violation\n";
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    for (const auto& res : results) {
      raw += fmt(res.sigma_f) + "," + std::to_string(res.replicate) + "," + std::to_string(res.seed) + "," +
             (res.ok ? "1" : "0") + "," + fmt(res.ok ? res.score.hausdorff_x100 : nan) + "," +
             fmt(res.ok ? res.score.wasserstein2_x100 : nan) + "," + fmt(res.ok ? res.score.mse : nan) +
             "," + std::to_string(res.stop_iteration) + "," + std::to_string(res.best_iteration) + "," +
             fmt(res.ok ? res.val_L_minus : nan) + "," + fmt(res.ok ? res.orth_error : nan) + "," +
             fmt(res.ok ? res.monotone_violation : nan) + "\n";
      if (!res.ok) {
        std::cerr << "sigma_f " << res.sigma_f << " replicate " << res.replicate << " failed: " << res.error << "\n";
      }
    }

    std::string summary =
        "sigma_f,n_ok,hausdorff_mean,hausdorff_std,wasserstein2_mean,wasserstein2_std,mse_mean,mse_std\n";
    std::string pretty = "sigma_f     Haus.                Wass.\n";
    const auto reps = static_cast<std::size_t>(replicates);
    for (std::size_t level = 0; level < sigma_fs.size(); ++level) {
      std::vector<double> h, w, m;
      for (std::size_t r = 0; r < reps; ++r) {
        const auto& res = results[level * reps + r];
        if (!res.ok) continue;
        h.push_back(res.score.hausdorff_x100);
        w.push_back(res.score.wasserstein2_x100);
        m.push_back(res.score.mse);
      }
      auto stats = [&](const std::vector<double>& v) {
        if (v.size() >= 2) return metrics::replicate_stats(v);
        metrics::ReplicateStats st;
        st.mean = v.empty() ? nan : v[0];
        st.std = nan;
        return st;
      };
      const auto sh = stats(h), sw = stats(w), sm = stats(m);
      summary += fmt(sigma_fs[level]) + "," + std::to_string(h.size()) + "," + fmt(sh.mean) + "," +
                 fmt(sh.std) + "," + fmt(sw.mean) + "," + fmt(sw.std) + "," + fmt(sm.mean) + "," +
                 fmt(sm.std) + "\n";
      char line[160];
      std::snprintf(line, sizeof line, "%-10g  %8.3f (%7.3f)  %8.3f (%7.3f)\n", sigma_fs[level], sh.mean,
                    sh.std, sw.mean, sw.std);
      pretty += line;
    }

    fs::create_directories(out);
    csv::write_file_atomic((fs::path(out) / "raw.csv").string(), raw);
    csv::write_file_atomic((fs::path(out) / "summary.csv").string(), summary);
    csv::write_file_atomic((fs::path(out) / "summary.txt").string(), pretty);

    Resolved r;
    r.set("family", family);
    r.set("dim", dim);
    r.set("n", static_cast<std::uint64_t>(n));
    r.set("replicates", replicates);
    r.set("sigma-f-list", join(sigma_fs));
    r.set("cap", static_cast<std::uint64_t>(cap));
    train.record(r);
    r.set("out", out);
    write_resolved((fs::path(out) / "resolved.config").string(), "study", r);
    std::cout << pretty;
    return Ok;
  }
};

}  // namespace

std::vector<std::string> config_arguments(const std::string& path,
                                          const std::vector<std::string>& explicit_args) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open config '" + path + "'");
  std::vector<std::string> out;
  std::string line;
  int line_no = 0;
  auto given = [&](const std::string& key) {
    const std::string flag = "--" + key;
    for (const auto& a : explicit_args) {
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    }
    return false;
  };
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ParseError, path + ": line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw Error(Errc::ParseError, path + ": line " + std::to_string(line_no) + ": empty key");
    if (!given(key)) out.push_back("--" + key + "=" + value);
  }
  return out;
}

int run(const std::vector<std::string>& args_in) {
  std::vector<std::string> args = args_in;
  if (args.empty()) args.push_back("monocurve");

  // Splice --config file entries in ahead of the explicit flags.
  try {
    for (std::size_t i = 2; i < args.size(); ++i) {
      std::string path;
      std::size_t consumed = 0;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
        consumed = 2;
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        consumed = 1;
      }
      if (consumed == 0) continue;
      std::vector<std::string> rest(args.begin() + 2, args.end());
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i - 2),
                 rest.begin() + static_cast<std::ptrdiff_t>(i - 2 + consumed));
      const std::vector<std::string> from_file = config_arguments(path, rest);
      std::vector<std::string> merged(args.begin(), args.begin() + 2);
      merged.insert(merged.end(), from_file.begin(), from_file.end());
      merged.insert(merged.end(), rest.begin(), rest.end());
      args = std::move(merged);
      break;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return Usage;
  }

  CLI::App app{"Monotone principal curves: simulate, fit, score."};
  app.require_subcommand(1, 1);
  app.set_help_all_flag("--help-all");

  SimulateCmd simulate;
  FitCmd fit;
  EvaluateCmd evaluate;
  GridCmd grid;
  ContourCmd contour;
  StudyCmd study_cmd;
  auto add = [&](const char* name, const char* desc, auto& cmd) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", "flat key=value file; explicit flags take precedence");
    cmd.attach(sub);
    return sub;
  };
  CLI::App* s_sim = add("simulate", "draw a synthetic data set", simulate);
  CLI::App* s_fit = add("fit", "fit a monotone curve", fit);
  CLI::App* s_eval = add("evaluate", "score a curve against a reference", evaluate);
  CLI::App* s_grid = add("gridsearch", "select (lambda, tau) on validation loss", grid);
  CLI::App* s_contour = add("contour", "tabulate H for |x|^p/p and its conjugate", contour);
  CLI::App* s_study = add("study", "replicated simulate/fit/evaluate over noise scales", study_cmd);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? Ok : Usage;
  }

  try {
    if (s_sim->parsed()) return simulate.run();
    if (s_fit->parsed()) return fit.run();
    if (s_eval->parsed()) return evaluate.run();
    if (s_grid->parsed()) return grid.run();
    if (s_contour->parsed()) return contour.run();
    if (s_study->parsed()) return study_cmd.run();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return DataError;
  }
  return Usage;
}

int run(int argc, const char* const* argv) {
  return run(std::vector<std::string>(argv, argv + argc));
}

}  // namespace monocurve::cli
