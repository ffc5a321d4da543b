// Acceptance run: one PASS/FAIL line per criterion.
//
//   acceptance [--only 1,2,...] [--expect-fail 8,...] [--work DIR]
//
// Criteria listed in --expect-fail are still evaluated and still print FAIL;
// they just do not turn the exit status nonzero.

#include "gradcheck.hpp"

#include "stpca/adaptive_graph.hpp"
#include "stpca/cli.hpp"
#include "stpca/config.hpp"
#include "stpca/io.hpp"
#include "stpca/metrics.hpp"
#include "stpca/pca.hpp"
#include "stpca/synth.hpp"
#include "stpca/training.hpp"
#include "stpca/transfer.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"

using namespace stpca;
namespace fs = std::filesystem;

namespace {

// Tolerances and experiment sizes.
constexpr double kEigTol = 1e-9;
constexpr double kCosineTol = 1e-8;
constexpr double kEigRelTol = 1e-8;
constexpr double kOrthoTol = 1e-8;
constexpr double kRowSumTol = 1e-9;
constexpr double kGraphOracleTol = 1e-12;
constexpr double kGradTol = 1e-4;
constexpr double kGradStep = 1e-5;
constexpr double kShiftDegradation = 1.5;
constexpr double kPcaStability = 1.15;
constexpr int kSeedsNeeded = 4;
const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};
constexpr std::uint64_t kCityBSeedOffset = 1000;
constexpr double kMaxTrainSeconds = 300.0;
constexpr double kMaxZeroShotSeconds = 300.0;
constexpr int kPcaDim = 2;
constexpr int kAdaptiveDim = 8;
const std::vector<int> kSweepK{2, 4, 8};

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int prec = 4) {
  std::ostringstream o;
  o << std::setprecision(prec) << v;
  return o.str();
}

Mat random_matrix(Eigen::Index r, Eigen::Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// ---------------------------------------------------------------- projections

struct InvariantLog {
  std::size_t checked = 0;
  std::vector<std::string> failures;
};
InvariantLog g_invariants;

void check_invariants(const DayTensor& z, const PcaProjection& proj, const std::string& label) {
  ++g_invariants.checked;
  const auto c = static_cast<Eigen::Index>(proj.dim());
  const double ortho = (proj.components.transpose() * proj.components - Mat::Identity(c, c)).cwiseAbs().maxCoeff();
  if (!(ortho <= kOrthoTol)) g_invariants.failures.push_back(label + ": P^T P off by " + fmt(ortho));
  const Vec evr = explained_variance_ratio(proj.eigenvalues);
  for (Eigen::Index i = 1; i < evr.size(); ++i) {
    if (evr(i) < evr(i - 1)) {
      g_invariants.failures.push_back(label + ": explained variance decreases at k=" + std::to_string(i + 1));
      break;
    }
  }
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= proj.dim(); ++k) {
    const double err = reconstruction_error(z, truncate(proj, k));
    if (err > prev * (1.0 + 1e-12) + 1e-12) {
      g_invariants.failures.push_back(label + ": reconstruction error rises at k=" + std::to_string(k));
      break;
    }
    prev = err;
  }
}

DayTensor random_tensor(std::size_t days, std::size_t nodes, std::size_t slots, std::uint64_t seed) {
  DayTensor z;
  z.data = random_matrix(static_cast<Eigen::Index>(days * nodes), static_cast<Eigen::Index>(slots), seed);
  z.days = days;
  z.nodes = nodes;
  z.slots = slots;
  z.origin = {0, days * slots};
  return z;
}

// ---------------------------------------------------------------- 1-7

Outcome criterion1() {
  const auto t0 = Clock::now();
  double worst_res = 0.0, worst_orth = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto n = static_cast<Eigen::Index>(1 + (s * 31) / 19);
    Mat a = random_matrix(n, n, 100 + s);
    a = (0.5 * (a + a.transpose())).eval();
    auto r = sym_eig(a);
    const Mat recon = r.vectors * r.values.asDiagonal() * r.vectors.transpose();
    worst_res = std::max(worst_res, (a - recon).norm());
    worst_orth = std::max(worst_orth, (r.vectors.transpose() * r.vectors - Mat::Identity(n, n)).norm());
  }
  const double secs = seconds_since(t0);
  return {worst_res < kEigTol && worst_orth < kEigTol && secs < 1.0,
          "max residual " + fmt(worst_res) + ", max orthogonality " + fmt(worst_orth) + ", " + fmt(secs) + " s"};
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  double worst_cos = 1.0, worst_rel = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto z = random_tensor(5, 10, 8, 200 + s);  // 50 samples of 8 slots
    auto proj = fit_projection(z, ComponentCount{8});
    check_invariants(z, proj, "oracle tensor " + std::to_string(s));

    // Independent path: explicit covariance, library eigensolver.
    const Eigen::RowVectorXd mean = z.data.colwise().mean();
    const Mat centered = z.data.rowwise() - mean;
    const Mat cov = (centered.transpose() * centered) / static_cast<double>(z.data.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    for (Eigen::Index k = 0; k < 8; ++k) {
      const Eigen::Index ok = 7 - k;  // library order is ascending
      const double lam = es.eigenvalues()(ok);
      worst_rel = std::max(worst_rel, std::abs(proj.eigenvalues(k) - lam) / std::abs(lam));
      const double cosine = std::abs(proj.components.col(k).dot(es.eigenvectors().col(ok)));
      worst_cos = std::min(worst_cos, cosine);
    }
  }
  const double secs = seconds_since(t0);
  return {worst_cos >= 1.0 - kCosineTol && worst_rel <= kEigRelTol && secs < 1.0,
          "min |cosine| 1-" + fmt(1.0 - worst_cos) + ", max eigenvalue rel error " + fmt(worst_rel) + ", " +
              fmt(secs) + " s"};
}

void projection_battery() {
  std::uint64_t seed = 300;
  for (std::size_t slots : {4, 8, 12, 24}) {
    for (std::size_t days : {1, 3, 7}) {
      auto z = random_tensor(days, 6, slots, seed++);
      const std::size_t full = std::min(slots, days * 6 - 1);
      check_invariants(z, fit_projection(z, ComponentCount{full}), "battery");
      check_invariants(z, fit_projection(z, VarianceThreshold{0.9}), "battery theta");
      check_invariants(z, fit_projection(z, ComponentCount{full}, false), "battery uncentered");
    }
  }
}

Outcome criterion3() {
  std::string detail = std::to_string(g_invariants.checked) + " projections checked";
  if (!g_invariants.failures.empty()) detail += "; first failure: " + g_invariants.failures.front();
  return {g_invariants.checked > 0 && g_invariants.failures.empty(), detail};
}

Outcome criterion4() {
  bool ok = true;
  double worst_sum = 0.0, worst_oracle = 0.0, min_entry = 1.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Mat e = random_matrix(12, 5, 400 + s) * (s % 2 ? 3.0 : 0.5);
    auto g = build_adaptive_graph(e);
    worst_sum = std::max(worst_sum, (g.weights.rowwise().sum().array() - 1.0).abs().maxCoeff());
    min_entry = std::min(min_entry, g.weights.minCoeff());

    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(500 + s));
    Mat pe(12, 5);
    for (int i = 0; i < 12; ++i) pe.row(i) = e.row(perm[static_cast<std::size_t>(i)]);
    auto gp = build_adaptive_graph(pe);
    for (int i = 0; i < 12; ++i)
      for (int j = 0; j < 12; ++j)
        if (gp.weights(i, j) != g.weights(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)])) ok = false;
  }
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Mat e = random_matrix(4, 3, 600 + s);
    Mat oracle(4, 4);
    for (int i = 0; i < 4; ++i) {
      double total = 0.0;
      for (int j = 0; j < 4; ++j) {
        double dot = 0.0;
        for (int k = 0; k < 3; ++k) dot += e(i, k) * e(j, k);
        oracle(i, j) = std::exp(std::max(dot, 0.0));
        total += oracle(i, j);
      }
      oracle.row(i) /= total;
    }
    worst_oracle = std::max(worst_oracle, (build_adaptive_graph(e).weights - oracle).cwiseAbs().maxCoeff());
  }
  const bool pass = ok && worst_sum <= kRowSumTol && min_entry >= 0.0 && worst_oracle <= kGraphOracleTol;
  return {pass, "max |row sum - 1| " + fmt(worst_sum) + ", min entry " + fmt(min_entry) + ", permutation " +
                    (ok ? "exact" : "NOT exact") + ", oracle gap " + fmt(worst_oracle)};
}

Outcome criterion5() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  std::string where;
  for (bool graph : {false, true}) {
    ModelConfig c;
    c.l1 = 4;
    c.l2 = 4;
    c.embed_dim = 4;
    c.tod_dim = 4;
    c.dow_dim = 3;
    c.hidden_dim = 8;
    c.num_blocks = 1;
    c.steps_per_day = 6;
    c.use_graph = graph;
    Mat values = (random_matrix(30, 5, 700).array() + 1.5).matrix() * 10.0;
    TrafficSeries s;
    s.values = values;
    s.steps_per_day = 6;
    s.interval_minutes = 240;
    s.name = "toy";
    for (int i = 0; i < 5; ++i) s.node_ids.push_back("n" + std::to_string(i));
    const auto norm = fit_normalizer(s, s.all());
    auto windows = make_windows(s, s.all(), 4, 4);
    windows.resize(3);
    const Batch batch = assemble_batch(s, norm, windows, 4, 4);
    for (std::uint64_t seed : {1, 2, 3}) {
      auto p = init_params(c, 5, seed);
      std::mt19937_64 rng(seed + 50);
      std::normal_distribution<double> n(0.0, 0.3);
      for (auto& t : tensors(p))
        if (t.dims.size() == 1 || t.is_embedding)
          for (double& v : t.data) v = n(rng);
      const Mat dy = random_matrix(batch.x.rows(), 4, seed + 90);
      auto r = test::gradient_check(p, batch, dy, kGradStep);
      checked += r.checked;
      if (r.max_rel > worst) {
        worst = r.max_rel;
        where = r.worst + (graph ? " (graph)" : "");
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst < kGradTol && secs < 30.0,
          std::to_string(checked) + " scalars, max rel error " + fmt(worst) + " at " + where + ", " + fmt(secs) + " s"};
}

Outcome criterion6() {
  Mat pred(1, 3), target(1, 3);
  pred << 5, 8, 26;
  target << 0, 10, 20;
  auto m = masked_metrics(pred, target);
  const bool exact = m.mae == 4.0 && m.rmse == std::sqrt(20.0) && m.mape == 0.25;
  int violations = 0;
  std::mt19937_64 rng(800);
  std::uniform_int_distribution<int> size(1, 16);
  std::bernoulli_distribution zero(0.25);
  for (int trial = 0; trial < 1000; ++trial) {
    const int r = size(rng), c = size(rng);
    Mat t = random_matrix(r, c, 10000 + static_cast<std::uint64_t>(trial)) * 40.0;
    for (Eigen::Index i = 0; i < t.size(); ++i)
      if (zero(rng)) t.data()[i] = 0.0;
    t(0, 0) = 5.0;
    const Mat p = random_matrix(r, c, 20000 + static_cast<std::uint64_t>(trial)) * 40.0;
    auto mm = masked_metrics(p, t);
    if (mm.mae > mm.rmse) ++violations;
  }
  return {exact && violations == 0, "three-cell case MAE " + fmt(m.mae, 17) + ", RMSE " + fmt(m.rmse, 17) + ", MAPE " +
                                        fmt(m.mape * 100.0) + "%; MAE > RMSE in " + std::to_string(violations) +
                                        " of 1000"};
}

Outcome criterion7() {
  SynthSpec spec;
  spec.n_nodes = 8;
  spec.n_roles = 2;
  spec.days = 6;
  spec.steps_per_day = 12;
  spec.seed = 900;
  auto series = generate(spec).train;
  auto split = split_chronological(series, {0.6, 0.2, 0.2});
  FitData data;
  data.series = &series;
  data.normalizer = fit_normalizer(series, split.train);
  data.train = make_windows(series, split.train, 4, 4);
  data.val = make_windows(series, split.val, 4, 4);
  int runs = 0, identical = 0;
  for (auto strategy : {EmbeddingStrategy::pca, EmbeddingStrategy::zero}) {
    for (bool graph : {false, true}) {
      ModelConfig c;
      c.l1 = 4;
      c.l2 = 4;
      c.embed_dim = 3;
      c.hidden_dim = 8;
      c.tod_dim = 3;
      c.dow_dim = 2;
      c.num_blocks = 2;
      c.steps_per_day = 12;
      c.use_graph = graph;
      auto p = init_params(c, 8, 901);
      if (strategy == EmbeddingStrategy::zero) {
        set_embedding(p, zero_embedding(8, 3));
      } else {
        auto z = to_day_tensor(series, split.train, data.normalizer);
        auto proj = fit_projection(z, ComponentCount{3});
        check_invariants(z, proj, "criterion 7");
        set_embedding(p, refresh_embedding(z, proj));
      }
      TrainConfig tc;
      tc.max_epochs = 5;
      tc.patience = 5;
      tc.strategy = strategy;
      auto r = fit(p, data, tc, trainable_for(strategy));
      ++runs;
      const auto& a = p.embedding.values;
      const auto& b = r.best.embedding.values;
      if (a.size() == b.size() && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0 &&
          r.best.w_o != p.w_o)
        ++identical;
    }
  }
  return {identical == runs, std::to_string(identical) + " of " + std::to_string(runs) +
                                 " pca/zero fits left the embedding bitwise unchanged"};
}

// ---------------------------------------------------------------- 8-10

struct SeedRun {
  std::uint64_t seed = 0;
  SynthResult synth;
  TrainOutcome adaptive;
  TrainOutcome pca;
  double adaptive_secs = 0.0, pca_secs = 0.0;
  double adaptive_in = 0.0, adaptive_shifted = 0.0, adaptive_zero = 0.0;
  double pca_in = 0.0, pca_shifted = 0.0;
  std::map<int, double> sweep;  // k -> shifted MAE
};

RunConfig experiment_config(const fs::path& data, std::uint64_t seed) {
  RunConfig c;
  c.data_path = data.string();
  c.use_graph = true;
  c.seed = seed;
  return c;
}

TransferPlan plan_for(TransferStrategy s) {
  TransferPlan p;
  p.strategy = s;
  p.source = "synth_train";
  return p;
}

TrainOutcome train_timed(RunConfig cfg, double& secs) {
  const auto t0 = Clock::now();
  auto o = train_pipeline(cfg);
  secs = seconds_since(t0);
  return o;
}

double pca_shifted_mae(const TrainOutcome& o, const TrafficSeries& shifted) {
  return cross_year_eval(o.model, &*o.projection, shifted, plan_for(TransferStrategy::pca_emb)).average.mae;
}

SeedRun run_seed(std::uint64_t seed, const fs::path& work, bool sweep) {
  SeedRun r;
  r.seed = seed;
  SynthSpec spec;
  spec.n_nodes = 40;
  spec.n_roles = 4;
  spec.days = 28;
  spec.steps_per_day = 48;
  spec.shift_fraction = 0.5;
  spec.noise_std = 2.0;
  spec.seed = seed;
  r.synth = generate(spec);
  const fs::path dir = work / ("seed_" + std::to_string(seed));
  write_synth(r.synth, dir);
  const auto data = dir / "train.csv";
  const auto& shifted = r.synth.shifted;

  auto cfg = experiment_config(data, seed);
  cfg.strategy = EmbeddingStrategy::adaptive;
  cfg.embed_dim = kAdaptiveDim;
  r.adaptive = train_timed(cfg, r.adaptive_secs);
  {
    const auto& m = r.adaptive.model;
    const auto& mc = m.params.config;
    r.adaptive_in = evaluate(m.params, r.adaptive.series, m.normalizer,
                             make_windows(r.adaptive.series, r.adaptive.split.test, mc.l1, mc.l2))
                        .average.mae;
    r.adaptive_shifted = cross_year_eval(m, nullptr, shifted, plan_for(TransferStrategy::vanilla_adaptive)).average.mae;
    r.adaptive_zero = cross_year_eval(m, nullptr, shifted, plan_for(TransferStrategy::zero_emb)).average.mae;
  }

  cfg.strategy = EmbeddingStrategy::pca;
  cfg.embed_dim = kPcaDim;
  r.pca = train_timed(cfg, r.pca_secs);
  {
    const auto z = to_day_tensor(r.pca.series, r.pca.split.train, r.pca.model.normalizer);
    check_invariants(z, *r.pca.projection, "criterion 8 seed " + std::to_string(seed));
    r.pca_in = in_distribution_eval(r.pca.model, &*r.pca.projection, r.pca.series, r.pca.split.test,
                                    plan_for(TransferStrategy::pca_emb))
                   .average.mae;
    r.pca_shifted = pca_shifted_mae(r.pca, shifted);
  }
  std::cerr << "  seed " << seed << ": adaptive in " << fmt(r.adaptive_in) << " shifted " << fmt(r.adaptive_shifted)
            << " zero " << fmt(r.adaptive_zero) << " (" << fmt(r.adaptive_secs, 3) << " s); pca in " << fmt(r.pca_in)
            << " shifted " << fmt(r.pca_shifted) << " (" << fmt(r.pca_secs, 3) << " s)\n";

  if (sweep) {
    std::vector<int> ks = kSweepK;
    ks.push_back(spec.steps_per_day);
    for (int k : ks) {
      if (k == kPcaDim) {
        r.sweep[k] = r.pca_shifted;
        continue;
      }
      auto kc = cfg;
      kc.embed_dim = k;
      double secs = 0.0;
      auto o = train_timed(kc, secs);
      const auto z = to_day_tensor(o.series, o.split.train, o.model.normalizer);
      check_invariants(z, *o.projection, "criterion 10 seed " + std::to_string(seed) + " k=" + std::to_string(k));
      r.sweep[k] = pca_shifted_mae(o, shifted);
      std::cerr << "    k=" << k << " shifted " << fmt(r.sweep[k]) << " (" << fmt(secs, 3) << " s)\n";
    }
  }
  return r;
}

Outcome criterion8(const std::vector<SeedRun>& runs) {
  int a = 0, b = 0, c = 0;
  double max_secs = 0.0;
  std::ostringstream d;
  for (const auto& r : runs) {
    const double ra = r.adaptive_shifted / r.adaptive_in;
    const double rb = r.pca_shifted / r.pca_in;
    a += ra >= kShiftDegradation;
    b += rb <= kPcaStability;
    c += r.adaptive_zero < r.adaptive_shifted;
    max_secs = std::max({max_secs, r.adaptive_secs, r.pca_secs});
    d << " [seed " << r.seed << ": adaptive " << fmt(ra, 3) << ", pca " << fmt(rb, 3) << ", zero/vanilla "
      << fmt(r.adaptive_zero / r.adaptive_shifted, 3) << "]";
  }
  const bool pass = a >= kSeedsNeeded && b >= kSeedsNeeded && c >= kSeedsNeeded && max_secs < kMaxTrainSeconds;
  return {pass, "(a) " + std::to_string(a) + "/5, (b) " + std::to_string(b) + "/5, (c) " + std::to_string(c) +
                    "/5, slowest fit " + fmt(max_secs, 3) + " s;" + d.str()};
}

Outcome criterion9(const std::vector<SeedRun>& runs) {
  int wins = 0;
  bool rebuilt = true;
  double max_secs = 0.0;
  std::ostringstream d;
  for (const auto& r : runs) {
    const auto t0 = Clock::now();
    SynthSpec spec;
    spec.n_nodes = 25;
    spec.n_roles = 4;
    spec.days = 28;
    spec.steps_per_day = 48;
    spec.shift_fraction = 0.5;
    spec.noise_std = 2.0;
    spec.seed = r.seed + kCityBSeedOffset;
    const auto city_b = generate(spec).train;
    const auto& model = r.pca.model;
    const auto before = encode_model(model);
    const auto plan = plan_for(TransferStrategy::pca_emb);
    auto adapted = adapt_model(model, &*r.pca.projection, city_b, plan, {}, true);
    rebuilt = rebuilt && adapted.embedding.rows() == 25 && build_adaptive_graph(adapted.embedding.values).size() == 25;
    const auto zs = zero_shot_transfer(model, *r.pca.projection, city_b, plan);
    const auto split = adaptation_split(city_b, plan.adaptation_fraction);
    const auto& mc = model.params.config;
    const auto ha = historical_average_baseline(city_b, split.adaptation, split.evaluation, mc.l1, mc.l2);
    rebuilt = rebuilt && encode_model(model) == before;
    const double secs = seconds_since(t0) + r.pca_secs;
    max_secs = std::max(max_secs, secs);
    wins += zs.average.mae < ha.average.mae;
    d << " [seed " << r.seed << ": zero-shot " << fmt(zs.average.mae) << " vs HA " << fmt(ha.average.mae) << "]";
  }
  const bool pass = rebuilt && wins >= kSeedsNeeded && max_secs < kMaxZeroShotSeconds;
  return {pass, std::to_string(wins) + "/5 beat historical average, 25x25 graph " +
                    (rebuilt ? "rebuilt, source weights untouched" : "NOT rebuilt or weights changed") +
                    ", slowest train+transfer " + fmt(max_secs, 3) + " s;" + d.str()};
}

Outcome criterion10(const std::vector<SeedRun>& runs) {
  int wins = 0;
  std::ostringstream d;
  for (const auto& r : runs) {
    const double full = r.sweep.rbegin()->second;  // k = T
    int best_k = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int k : kSweepK) {
      if (r.sweep.at(k) < best) {
        best = r.sweep.at(k);
        best_k = k;
      }
    }
    const bool ok = best < full && best < r.adaptive_shifted;
    wins += ok;
    d << " [seed " << r.seed << ": k*=" << best_k << " " << fmt(best) << ", k=T " << fmt(full) << ", adaptive "
      << fmt(r.adaptive_shifted) << "]";
  }
  return {wins >= kSeedsNeeded, std::to_string(wins) + "/5 seeds have k* <= 8 below k=T and adaptive;" + d.str()};
}

// ---------------------------------------------------------------- 11-12

int cli(const std::vector<std::string>& args) { return run_cli(args); }

Outcome criterion11(const fs::path& work) {
  ::setenv("STPCA_THREADS", "1", 1);
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  if (cli({"synth", "--out", (dir / "data").string(), "--nodes", "8", "--roles", "2", "--days", "14",
           "--steps-per-day", "24", "--seed", "11"}) != 0)
    return {false, "synth failed"};
  write_file_atomic(dir / "run.cfg", "data.path=" + (dir / "data" / "train.csv").string() +
                                         "\nembedding.strategy=pca\nembedding.dim=3\nmodel.use_graph=true\n"
                                         "model.hidden_dim=16\ntrain.max_epochs=3\ntrain.patience=3\nseed=5\n");
  std::vector<std::string> artifacts{"model.stpf", "proj.stpj", "train_log.csv", "eval.json", "eval_pca.json",
                                     "transfer.json"};
  for (const std::string run : {"r1", "r2"}) {
    const auto out = (dir / run).string();
    const auto model = out + "/model.stpf";
    const auto proj = out + "/proj.stpj";
    const auto data = (dir / "data" / "train.csv").string();
    if (cli({"train", "--config", (dir / "run.cfg").string(), "--set", "output.dir=" + out}) != 0 ||
        cli({"eval", "--checkpoint", model, "--data", data, "--out", out + "/eval.json"}) != 0 ||
        cli({"eval", "--checkpoint", model, "--data", data, "--strategy", "pca", "--proj", proj,
             "--adaptation-fraction", "0.1", "--out", out + "/eval_pca.json"}) != 0 ||
        cli({"transfer", "--checkpoint", model, "--proj", proj, "--target", (dir / "data" / "shifted.csv").string(),
             "--strategies", "vanilla,zero,pca,finetune", "--adaptation-fraction", "0.2", "--baseline", "--out",
             out + "/transfer.json"}) != 0)
      return {false, "pipeline command failed in " + run};
  }
  std::vector<std::string> differing;
  for (const auto& a : artifacts)
    if (read_file(dir / "r1" / a) != read_file(dir / "r2" / a)) differing.push_back(a);
  std::string detail = std::to_string(artifacts.size() - differing.size()) + " of " + std::to_string(artifacts.size()) +
                       " artifacts byte-identical";
  for (const auto& a : differing) detail += "; differs: " + a;
  return {differing.empty(), detail};
}

// A user-style export: 5-minute readings, numeric sensor ids, a space in the
// timestamp, a start mid-morning, blanks and zeros.
void write_user_csv(const fs::path& path) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> noise(0.0, 15.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<std::string> ids{"400001", "400017", "400030", "400040", "400045", "400052", "400057"};
  std::ostringstream out;
  out << "timestamp";
  for (const auto& id : ids) out << ',' << id;
  out << '\n';
  const int steps = 288 * 9;
  std::vector<double> level(ids.size(), 0.0);
  for (int t = 0; t < steps; ++t) {
    const int minute = 10 * 60 + 5 * t;
    const int day = 4 + minute / 1440;
    const int hh = (minute % 1440) / 60, mm = minute % 60;
    out << "2018-01-" << std::setw(2) << std::setfill('0') << day << ' ' << std::setw(2) << hh << ':' << std::setw(2)
        << mm << ":00" << std::setfill(' ');
    for (std::size_t j = 0; j < ids.size(); ++j) {
      level[j] = 0.9 * level[j] + noise(rng);
      const double hour = (minute % 1440) / 60.0;
      const double flow = 200.0 + 40.0 * static_cast<double>(j) + 150.0 * std::sin((hour - 6.0 + j) / 24.0 * 6.283) + level[j];
      out << ',';
      const double p = u(rng);
      if (p < 0.01) continue;
      if (p < 0.02) {
        out << 0;
        continue;
      }
      out << std::max(0.0, std::round(flow));
    }
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

Outcome criterion12(const fs::path& work) {
  const fs::path dir = work / "smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_user_csv(dir / "export.csv");
  write_file_atomic(dir / "run.cfg", "data.path=" + (dir / "canonical.csv").string() +
                                         "\nembedding.strategy=pca\ntrain.max_epochs=2\ntrain.patience=2\nseed=1\n"
                                         "output.dir=" + (dir / "run").string() + "\n");
  const auto model = (dir / "run" / "model.stpf").string();
  const auto proj = (dir / "run" / "proj.stpj").string();
  const auto data = (dir / "canonical.csv").string();
  std::vector<std::pair<std::string, std::vector<std::string>>> steps{
      {"ingest", {"ingest", "--data", (dir / "export.csv").string(), "--out", data}},
      {"train", {"train", "--config", (dir / "run.cfg").string()}},
      {"eval", {"eval", "--checkpoint", model, "--data", data, "--out", (dir / "eval.json").string()}},
      {"transfer", {"transfer", "--checkpoint", model, "--proj", proj, "--target", data, "--strategies", "pca,zero",
                    "--adaptation-fraction", "0.2", "--out", (dir / "transfer.json").string()}},
  };
  for (const auto& [name, args] : steps) {
    const int code = cli(args);
    if (code != 0) return {false, name + " exited " + std::to_string(code)};
  }
  auto j = nlohmann::ordered_json::parse(read_file(dir / "transfer.json"));
  return {j.size() == 2, "ingest, train (2 epochs), eval and transfer pca/zero completed on a 7-sensor 5-minute export"};
}

std::set<int> parse_set(const std::string& text) {
  std::set<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string only, expect_fail, work = (fs::temp_directory_path() / "stpca_acceptance").string();
  app.add_option("--only", only, "Comma list of criteria to run");
  app.add_option("--expect-fail", expect_fail, "Comma list of criteria allowed to fail");
  app.add_option("--work", work, "Scratch directory");
  CLI11_PARSE(app, argc, argv);

  const auto selected = parse_set(only);
  const auto allowed = parse_set(expect_fail);
  auto wanted = [&](int c) { return selected.empty() || selected.count(c); };
  fs::create_directories(work);

  std::map<int, Outcome> results;
  auto run = [&](int id, auto&& fn) {
    if (!wanted(id)) return;
    std::cerr << "criterion " << id << "...\n";
    try {
      results[id] = fn();
    } catch (const std::exception& e) {
      results[id] = {false, std::string("threw: ") + e.what()};
    }
  };

  run(1, criterion1);
  run(2, criterion2);
  run(4, criterion4);
  run(5, criterion5);
  run(6, criterion6);
  run(7, criterion7);

  std::vector<SeedRun> runs;
  if (wanted(8) || wanted(9) || wanted(10)) {
    try {
      for (auto seed : kSeeds) runs.push_back(run_seed(seed, work, wanted(10)));
    } catch (const std::exception& e) {
      for (int id : {8, 9, 10})
        if (wanted(id)) results[id] = {false, std::string("experiment threw: ") + e.what()};
    }
  }
  if (runs.size() == kSeeds.size()) {
    run(8, [&] { return criterion8(runs); });
    run(9, [&] { return criterion9(runs); });
    run(10, [&] { return criterion10(runs); });
  }
  run(11, [&] { return criterion11(work); });
  run(12, [&] { return criterion12(work); });
  run(3, [] {
    projection_battery();
    return criterion3();
  });

  int unexpected = 0;
  std::ostringstream summary;
  for (const auto& [id, r] : results) {
    summary << "criterion " << std::setw(2) << id << ": " << (r.pass ? "PASS" : "FAIL");
    if (!r.pass && allowed.count(id)) summary << " (expected)";
    summary << "  " << r.detail << "\n";
    if (!r.pass && !allowed.count(id)) ++unexpected;
  }
  std::cout << summary.str();
  write_file_atomic(fs::path(work) / "summary.txt", summary.str());
  return unexpected == 0 ? 0 : 1;
}
