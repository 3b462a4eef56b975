// Acceptance suite. `acceptance [N ...]` runs the listed criteria (all when
// none are given) and prints one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../tools/cli.hpp"
#include "monocurve/convex.hpp"
#include "monocurve/csv.hpp"
#include "monocurve/metrics.hpp"
#include "monocurve/nn.hpp"
#include "monocurve/study.hpp"
#include "monocurve/synthdata.hpp"
#include "monocurve/trainer.hpp"

namespace fs = std::filesystem;
using namespace monocurve;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, fmt, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Training settings shared by the fit-quality criteria.
trainer::TrainConfig fit_config() {
  trainer::TrainConfig c;
  c.lambda = 1.0;
  c.tau = 1.0;
  c.learning_rate = 3e-2;
  c.lr_final_fraction = 1e-2;
  c.multiplier_rate = 0.2;
  c.max_val_violation = 1e-3;
  c.max_iters = 800;
  c.min_iters = 100;
  c.patience = 200;
  return c;
}

// ---------------------------------------------------------------------------

Outcome fenchel_young() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  int failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  for (double p : {1.5, 2.0, 3.0}) {
    const convex::AnalyticConvexFn f = convex::AnalyticConvexFn::power(p);
    for (int i = 0; i < 10000; ++i) {
      const double x = u(rng), y = u(rng);
      const double gap = f(x) + convex::conjugate_eval(f, y, {-5.0, 5.0}).value - x * y;
      worst = std::min(worst, gap);
      if (gap < -1e-9) ++failures;
    }
  }
  // Power(3) conjugate by the discrete transform, against |y|^1.5 / 1.5.
  const convex::AnalyticConvexFn cubic = convex::AnalyticConvexFn::power(3.0);
  double conj_err = 0.0;
  for (int i = 0; i <= 600; ++i) {
    const double y = -3.0 + 0.01 * i;
    const double numeric = convex::discrete_legendre([&](double x) { return cubic(x); }, y, {-4.0, 4.0}).value;
    conj_err = std::max(conj_err, std::abs(numeric - std::pow(std::abs(y), 1.5) / 1.5));
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && conj_err <= 1e-3 && secs < 5.0,
          format("failures %d, min gap %.3g, conjugate error %.3g, %.2f s", failures, worst, conj_err, secs)};
}

Outcome c_conjugate_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const convex::Interval box{-2.0, 2.0};
  const convex::PairwiseMap cube{0, 1, [](double u) { return u * u * u; }};
  const convex::PairwiseMap ids[3] = {{0, 1, [](double u) { return u; }},
                                      {0, 2, [](double u) { return u; }},
                                      {1, 2, [](double u) { return u; }}};
  const convex::CTuple t2 = convex::build_ctuple_from_curve(2, std::span(&cube, 1), box);
  const convex::CTuple t3 = convex::build_ctuple_from_curve(3, ids, box);
  double worst = 0.0;
  for (const convex::CTuple* t : {&t2, &t3}) {
    const convex::MonotoneCurve g = convex::diagonal_curve(*t);
    for (int i = 0; i <= 100; ++i) {
      const double s = -2.0 + 0.04 * i;
      const auto v = g(s);
      worst = std::max(worst, std::abs(std::accumulate(v.begin(), v.end(), 0.0) - s));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-4 && secs < 10.0, format("max |sum prox - s| %.3g, %.2f s", worst, secs)};
}

Outcome monotone_zero_set() {
  const auto t0 = std::chrono::steady_clock::now();
  const int grid = 201;
  const double range = 2.0, step = 2.0 * range / (grid - 1);
  bool ok = true;
  std::string detail;
  for (double p : {2.0, 3.0}) {
    const double q = p / (p - 1.0);
    const convex::CTuple t({convex::AnalyticConvexFn::power(p), convex::AnalyticConvexFn::power(q)});
    double min_h = std::numeric_limits<double>::infinity();
    std::vector<std::array<double, 2>> band, column_min;
    for (int i = 0; i < grid; ++i) {
      const double x1 = -range + step * i;
      double best = std::numeric_limits<double>::infinity(), best_y = 0.0;
      for (int j = 0; j < grid; ++j) {
        const double x2 = -range + step * j;
        const double x[2] = {x1, x2};
        const double h = convex::H_eval(x, t);
        min_h = std::min(min_h, h);
        if (std::abs(h) <= 1e-3) band.push_back({x1, x2});
        if (std::abs(h) < best) {
          best = std::abs(h);
          best_y = x2;
        }
      }
      if (best <= 1e-3) column_min.push_back({x1, best_y});
    }
    auto as_matrix = [](const std::vector<std::array<double, 2>>& pts) {
      Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), 2);
      for (std::size_t r = 0; r < pts.size(); ++r) m.row(static_cast<Eigen::Index>(r)) << pts[r][0], pts[r][1];
      return m;
    };
    // H(a) <= eps makes a_2 an eps-subgradient of f at a_1; adding the two
    // subgradient inequalities for a and b gives (b_2 - a_2)(b_1 - a_1) >= -2 eps.
    const bool band_ok = convex::check_monotone_set(as_matrix(band), 2.0 * 1e-3);
    const bool col_ok = convex::check_monotone_set(as_matrix(column_min), 0.0);
    ok = ok && min_h >= -1e-9 && band_ok && col_ok && !band.empty();
    detail += format("p=%g: min H %.3g, %zu level cells%s%s; ", p, min_h, band.size(),
                     band_ok ? "" : " NOT monotone", col_ok ? "" : ", column minima NOT monotone");
  }
  const double secs = seconds_since(t0);
  return {ok && secs < 5.0, detail + format("%.2f s", secs)};
}

template <class Net>
double gradient_probe(std::mt19937_64& rng, int probes) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::normal_distribution<double> nd(0.0, 0.3);
  double worst = 0.0;
  for (int probe = 0; probe < probes; ++probe) {
    Net net(4, 64);
    net.init_params(rng);
    Eigen::VectorXd& p = net.mutable_params();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] += nd(rng) * std::abs(p[i]) + 0.05 * nd(rng);
    if constexpr (std::is_same_v<Net, nn::IcnnNet>) nn::project_nonneg(net);
    std::vector<double> xs{u(rng), u(rng), u(rng)}, vw{u(rng), u(rng), u(rng)}, sw{u(rng), u(rng), u(rng)};
    auto objective = [&](const nn::ScalarNet& n, const std::vector<double>& at) {
      double acc = 0.0;
      for (std::size_t m = 0; m < at.size(); ++m) acc += vw[m] * n.forward(at[m]) + sw[m] * n.input_grad(at[m]);
      return acc;
    };
    const nn::Tape tape = net.record(xs, true);
    std::vector<double> dx(3);
    const Eigen::VectorXd g = net.backward(tape, vw, sw, dx);
    const double h = 1e-5;
    auto rel = [](double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); };

    std::uniform_int_distribution<Eigen::Index> pick(0, net.params().size() - 1);
    const Eigen::Index i = pick(rng);
    Net plus = net, minus = net;
    plus.mutable_params()[i] += h;
    minus.mutable_params()[i] -= h;
    worst = std::max(worst, rel(g[i], (objective(plus, xs) - objective(minus, xs)) / (2 * h)));

    const std::size_t m = static_cast<std::size_t>(probe) % 3;
    auto up = xs, down = xs;
    up[m] += h;
    down[m] -= h;
    worst = std::max(worst, rel(dx[m], (objective(net, up) - objective(net, down)) / (2 * h)));
  }
  return worst;
}

Outcome gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  const double icnn = gradient_probe<nn::IcnnNet>(rng, 100);
  const double plain = gradient_probe<nn::PlainNet>(rng, 100);
  const double secs = seconds_since(t0);
  return {icnn <= 1e-4 && plain <= 1e-4 && secs < 10.0,
          format("max relative error: input-convex %.3g, plain %.3g, %.2f s", icnn, plain, secs)};
}

Outcome icnn_convexity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  int violations = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < 10; ++n) {
    nn::IcnnNet net(4, 64);
    Eigen::VectorXd& p = net.mutable_params();
    for (Eigen::Index i = 0; i < p.size(); ++i) p[i] = 0.2 * nd(rng);
    nn::project_nonneg(net);
    for (int i = 0; i < 1000; ++i) {
      const double x = u(rng), y = u(rng);
      const double excess = net.forward(0.5 * (x + y)) - 0.5 * (net.forward(x) + net.forward(y));
      worst = std::max(worst, excess);
      if (excess > 1e-7) ++violations;
    }
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 5.0,
          format("violations %d, max midpoint excess %.3g, %.2f s", violations, worst, secs)};
}

Outcome fit_quality() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> haus;
  bool constraints = true;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    synth::SyntheticSpec spec;
    spec.family = 2;
    spec.dim = 2;
    spec.n = 5000;
    spec.seed = seed;
    trainer::TrainConfig cfg = fit_config();
    cfg.seed = study::fit_seed(seed);
    const study::ReplicateResult r = study::run_replicate(spec, cfg);
    if (!r.ok) return {false, "seed " + std::to_string(seed) + " failed: " + r.error};
    haus.push_back(r.score.hausdorff_x100);
    constraints = constraints && r.val_L_minus <= 1e-3 && r.orth_error <= 1e-2 && r.monotone_violation <= 0.01;
    detail += format("seed %d: Haus %.2f, val L- %.2g, orth %.2g, mono %.3f, best %d/%d; ", int(seed),
                     r.score.hausdorff_x100, r.val_L_minus, r.orth_error, r.monotone_violation,
                     r.best_iteration, r.stop_iteration);
  }
  const double mean = std::accumulate(haus.begin(), haus.end(), 0.0) / 3.0;
  const double secs = seconds_since(t0);
  return {mean <= 25.0 && constraints && secs <= 600.0,
          format("mean Haus %.2f; ", mean) + detail + format("%.0f s", secs)};
}

// Criteria 7 and 8 share the rotation-enabled sigma_f = 1 runs.
std::map<int, Outcome> noise_and_rotation(bool want7, bool want8) {
  const auto t0 = std::chrono::steady_clock::now();
  study::StudyConfig sc;
  sc.base.family = 3;
  sc.base.dim = 2;
  sc.base.n = 5000;
  sc.base.seed = 0;
  sc.replicates = 3;
  sc.train = fit_config();
  sc.sigma_fs = want7 ? std::vector<double>{1.0, 0.1, 0.01} : std::vector<double>{1.0};
  const auto rot = study::run_study(sc);

  auto level_mean = [](const std::vector<study::ReplicateResult>& rs, std::size_t level, int reps, bool* ok) {
    double acc = 0.0;
    for (int r = 0; r < reps; ++r) {
      const auto& res = rs[level * static_cast<std::size_t>(reps) + static_cast<std::size_t>(r)];
      if (!res.ok) *ok = false;
      acc += res.score.hausdorff_x100;
    }
    return acc / reps;
  };

  std::map<int, Outcome> out;
  bool all_ok = true;
  std::vector<double> means;
  for (std::size_t l = 0; l < sc.sigma_fs.size(); ++l) means.push_back(level_mean(rot, l, 3, &all_ok));
  if (want7) {
    const bool trend = means[0] > means[1] && means[1] > means[2];
    out[7] = {all_ok && trend && seconds_since(t0) <= 1800.0,
              format("mean Haus at sigma_f 1 / 0.1 / 0.01: %.2f / %.2f / %.2f, %.0f s", means[0], means[1], means[2],
                     seconds_since(t0))};
  }
  if (want8) {
    sc.sigma_fs = {1.0};
    sc.train.use_rotation = false;
    const auto fixed = study::run_study(sc);
    bool ok = all_ok;
    const double without = level_mean(fixed, 0, 3, &ok);
    out[8] = {ok && means[0] < without && seconds_since(t0) <= 1800.0,
              format("mean Haus with rotation %.2f, with U = I %.2f, %.0f s total", means[0], without,
                     seconds_since(t0))};
  }
  return out;
}

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd;
  auto random_set = [&](int n) {
    Eigen::MatrixXd A(n, 2);
    for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = nd(rng);
    return A;
  };
  double w2_err = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd A = random_set(5), B = random_set(5);
    std::vector<int> perm{0, 1, 2, 3, 4};
    double best = std::numeric_limits<double>::infinity();
    do {
      double c = 0.0;
      for (int i = 0; i < 5; ++i) c += (A.row(i) - B.row(perm[static_cast<std::size_t>(i)])).squaredNorm();
      best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    w2_err = std::max(w2_err, std::abs(metrics::wasserstein2(A, B) - std::sqrt(best / 5.0)));
  }
  int haus_mismatch = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd A = random_set(20), B = random_set(20);
    auto directed = [](const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q) {
      double worst = 0.0;
      for (Eigen::Index i = 0; i < P.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < Q.rows(); ++j) {
          double acc = 0.0;
          for (Eigen::Index c = 0; c < P.cols(); ++c) acc += (P(i, c) - Q(j, c)) * (P(i, c) - Q(j, c));
          best = std::min(best, std::sqrt(acc));
        }
        worst = std::max(worst, best);
      }
      return worst;
    };
    if (metrics::hausdorff(A, B) != std::max(directed(A, B), directed(B, A))) ++haus_mismatch;
  }
  int centroid_violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 30;
    const Eigen::MatrixXd A = random_set(n), B = (random_set(n).array() + 0.3 * (trial % 5)).matrix();
    if (metrics::wasserstein2(A, B) < (A.colwise().mean() - B.colwise().mean()).norm() - 1e-9) ++centroid_violations;
  }
  const double secs = seconds_since(t0);
  return {w2_err <= 1e-9 && haus_mismatch == 0 && centroid_violations == 0 && secs < 10.0,
          format("W2 vs permutations max error %.3g, Hausdorff mismatches %d, centroid violations %d, %.2f s", w2_err,
                 haus_mismatch, centroid_violations, secs)};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome replay() {
  const fs::path dir = fs::temp_directory_path() / ("monocurve_replay_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto p = [&](const std::string& name) { return (dir / name).string(); };
  auto tool = [](std::vector<std::string> args) {
    args.insert(args.begin(), "monocurve");
    return cli::run(args);
  };
  const std::vector<std::string> tiny{"--depth=2", "--width=16", "--max-iters=20", "--lr=0.01"};
  auto with = [&](std::vector<std::string> a, bool train) {
    if (train) a.insert(a.end(), tiny.begin(), tiny.end());
    return a;
  };

  struct Case {
    std::string name;
    std::vector<std::string> args;
    std::string config;
    std::vector<std::string> outputs;
  };
  // No seeds are given where the command accepts none: the resolved config
  // must carry the drawn one.
  const std::vector<Case> cases{
      {"simulate", {"simulate", "--family=3", "--n=400", "--out=" + p("data.csv")}, p("data.csv.config"),
       {p("data.csv")}},
      {"fit",
       with({"fit", "--data=" + p("data.csv"), "--out-model=" + p("model.txt"), "--out-report=" + p("report.json"),
             "--out-curve=" + p("curve.csv")},
            true),
       p("model.txt.config"),
       {p("curve.csv"), p("model.txt")}},
      {"evaluate", {"evaluate", "--curve=" + p("curve.csv"), "--truth=" + p("data.csv"), "--data=" + p("data.csv"),
                    "--cap=100", "--out=" + p("score.json")},
       p("score.json.config"),
       {p("score.json")}},
      {"gridsearch",
       with({"gridsearch", "--data=" + p("data.csv"), "--lambdas=1,10", "--taus=1", "--out=" + p("grid.csv")}, true),
       p("grid.csv.config"),
       {p("grid.csv")}},
      {"contour", {"contour", "--p=3", "--grid=41", "--out=" + p("contour.csv")}, p("contour.csv.config"),
       {p("contour.csv")}},
      {"study",
       with({"study", "--family=2", "--n=200", "--replicates=2", "--sigma-f-list=1,0.1", "--out=" + p("study")}, true),
       p("study/resolved.config"),
       {p("study/raw.csv"), p("study/summary.csv"), p("study/summary.txt")}},
  };

  bool ok = true;
  std::string detail;
  for (const Case& c : cases) {
    if (tool(c.args) != 0) {
      ok = false;
      detail += c.name + " failed; ";
      continue;
    }
    std::vector<std::string> first;
    for (const auto& f : c.outputs) first.push_back(slurp(f));
    for (const auto& f : c.outputs) fs::remove(f);
    const bool ran = tool({c.name, "--config", c.config}) == 0;
    bool same = ran;
    for (std::size_t i = 0; i < c.outputs.size(); ++i) same = same && slurp(c.outputs[i]) == first[i] && !first[i].empty();
    ok = ok && same;
    detail += c.name + (same ? " identical; " : " DIFFERS; ");
  }
  fs::remove_all(dir);
  return {ok, detail};
}

const std::map<int, const char*> kNames{
    {1, "convex-analysis properties"}, {2, "c-conjugate identity"}, {3, "monotone zero set"},
    {4, "gradient correctness"},       {5, "ICNN convexity"},      {6, "desk-scale fit quality"},
    {7, "noise trend"},                {8, "rotation ablation"},   {9, "metric oracles"},
    {10, "determinism and replay"}};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  if (wanted.empty()) {
    for (const auto& [n, name] : kNames) wanted.push_back(n);
  }
  std::sort(wanted.begin(), wanted.end());

  std::map<int, Outcome> results;
  const bool want7 = std::count(wanted.begin(), wanted.end(), 7) > 0;
  const bool want8 = std::count(wanted.begin(), wanted.end(), 8) > 0;
  for (int n : wanted) {
    if (results.count(n)) continue;
    switch (n) {
      case 1: results[n] = fenchel_young(); break;
      case 2: results[n] = c_conjugate_identity(); break;
      case 3: results[n] = monotone_zero_set(); break;
      case 4: results[n] = gradient_correctness(); break;
      case 5: results[n] = icnn_convexity(); break;
      case 6: results[n] = fit_quality(); break;
      case 7:
      case 8:
        for (auto& [k, v] : noise_and_rotation(want7, want8)) results[k] = v;
        break;
      case 9: results[n] = metric_oracles(); break;
      case 10: results[n] = replay(); break;
      default:
        std::fprintf(stderr, "unknown criterion %d\n", n);
        return 2;
    }
  }
  bool all = true;
  for (const auto& [n, r] : results) {
    std::printf("criterion %2d %-28s %s  %s\n", n, kNames.at(n), r.pass ? "PASS" : "FAIL", r.detail.c_str());
    all = all && r.pass;
  }
  return all ? 0 : 1;
}
