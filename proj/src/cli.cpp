#include "stpca/cli.hpp"

#include "stpca/adaptive_graph.hpp"
#include "stpca/io.hpp"
#include "stpca/metrics.hpp"
#include "stpca/synth.hpp"
#include "stpca/transfer.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>

namespace stpca {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_json(const json& j, const std::string& out) {
  const auto text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_file_atomic(out, text);
  }
}

StepRange split_range(const SplitRanges& s, const std::string& name, std::size_t total) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  if (name == "all") return {0, total};
  throw UsageError("unknown split '" + name + "' (train|val|test|all)");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::string> default_ids(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("n" + std::to_string(i));
  return ids;
}

void apply_threads_env() {
  const char* env = std::getenv("STPCA_THREADS");
  if (!env || !*env) return;
  int n = 0;
  std::string_view v(env);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{} || ptr != v.data() + v.size() || n < 1) {
    throw UsageError("STPCA_THREADS must be a positive integer, got '" + std::string(v) + "'");
  }
  Eigen::setNbThreads(n);
}

// ---------------------------------------------------------------- commands

struct IngestArgs {
  std::string data, adjacency, out;
};

void cmd_ingest(const IngestArgs& a) {
  auto s = load_series(a.data, a.adjacency);
  const auto zeros = (s.values.array() == 0.0).count();
  json j;
  j["dataset"] = s.name;
  j["nodes"] = s.num_nodes();
  j["steps"] = s.total_steps();
  j["interval_minutes"] = s.interval_minutes;
  j["steps_per_day"] = s.steps_per_day;
  j["start_slot"] = s.start_slot;
  j["start_dow"] = s.start_dow;
  j["full_days"] = day_aligned_prefix(s, s.all()).size() / static_cast<std::size_t>(s.steps_per_day);
  j["zero_fraction"] = static_cast<double>(zeros) / static_cast<double>(s.values.size());
  j["adjacency"] = s.adjacency.has_value();
  if (!a.out.empty()) write_series_csv(s, a.out);
  write_json(j, "-");
}

void cmd_synth(const SynthSpec& spec, const std::string& out) {
  spec.validate();
  write_synth(generate(spec), out);
}

void cmd_train(const RunConfig& cfg) {
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  write_file_atomic(dir / "resolved_config.cfg", cfg.resolved());
  auto outcome = train_pipeline(cfg);
  save_model(outcome.model, dir / "model.stpf");
  if (outcome.projection) save_projection(*outcome.projection, dir / "proj.stpj");
  write_file_atomic(dir / "train_log.csv", outcome.report.to_csv());
  std::cerr << "best epoch " << outcome.report.best_epoch << ", val MAE " << outcome.report.best_val_mae << " ("
            << outcome.report.stop_reason << ")\n";
}

struct EvalArgs {
  std::string checkpoint, data, proj, strategy = "vanilla", split = "test", ratios = "0.6,0.2,0.2", out;
  double fraction = 0.05;
  std::uint64_t seed = 0;
};

void cmd_eval(const EvalArgs& a) {
  const auto bytes = read_file(a.checkpoint);
  const auto model = decode_model(bytes);
  const auto series = load_series(a.data);
  const auto& cfg = model.params.config;
  const auto split = split_chronological(series, parse_ratios(a.ratios));
  const auto range = split_range(split, a.split, series.total_steps());
  const auto strategy = parse_transfer_strategy(a.strategy);

  HorizonReport report;
  if (strategy == TransferStrategy::pca_emb) {
    if (a.proj.empty()) throw UsageError("--strategy pca needs --proj");
    const auto proj = load_projection(a.proj);
    TransferPlan plan;
    plan.adaptation_fraction = a.fraction;
    plan.strategy = strategy;
    plan.source = series.name;
    TrainConfig tc;
    tc.seed = a.seed;
    report = in_distribution_eval(model, &proj, series, range, plan, tc);
  } else if (strategy == TransferStrategy::finetune_emb) {
    throw UsageError("eval supports vanilla, zero and pca; use transfer for finetune");
  } else {
    if (series.num_nodes() != model.params.num_nodes()) {
      throw Error("checkpoint covers " + std::to_string(model.params.num_nodes()) + " nodes, data has " +
                  std::to_string(series.num_nodes()));
    }
    if (series.steps_per_day != cfg.steps_per_day) {
      throw Error("data has T=" + std::to_string(series.steps_per_day) + " slots per day, model expects T=" +
                  std::to_string(cfg.steps_per_day));
    }
    auto params = model.params;
    if (strategy == TransferStrategy::zero_emb) {
      set_embedding(params, zero_embedding(series.num_nodes(), static_cast<std::size_t>(cfg.embed_dim)));
    }
    report = evaluate(params, series, model.normalizer, make_windows(series, range, cfg.l1, cfg.l2));
    report.strategy = std::string(to_string(strategy));
  }
  report.dataset = series.name;
  report.seed = a.seed;
  report.model_id = content_id(bytes);
  report.metadata["split"] = a.split;
  report.metadata["split_steps"] = std::to_string(range.begin) + ":" + std::to_string(range.end);
  write_json(report.to_json(), a.out);
}

struct TransferArgs {
  std::string checkpoint, pca_checkpoint, proj, target, strategies = "vanilla,zero,pca,finetune", mode = "auto", out;
  double fraction = 0.05;
  bool refit = false;
  bool baseline = false;
  std::uint64_t seed = 0;
};

void cmd_transfer(const TransferArgs& a) {
  const auto bytes = read_file(a.checkpoint);
  const auto model = decode_model(bytes);
  std::optional<TrainedModel> pca_model;
  std::string pca_bytes;
  if (!a.pca_checkpoint.empty()) {
    pca_bytes = read_file(a.pca_checkpoint);
    pca_model = decode_model(pca_bytes);
  }
  std::optional<PcaProjection> proj;
  if (!a.proj.empty()) proj = load_projection(a.proj);
  const auto target = load_series(a.target);

  std::string mode = a.mode;
  if (mode == "auto") mode = target.num_nodes() == model.params.num_nodes() ? "cross-year" : "zero-shot";
  if (mode != "cross-year" && mode != "zero-shot") throw UsageError("--mode must be auto, cross-year or zero-shot");
  const bool cross_city = mode == "zero-shot";

  const auto names = split_list(a.strategies);
  if (names.empty()) throw UsageError("--strategies is empty");
  std::vector<TransferStrategy> strategies;
  for (const auto& n : names) strategies.push_back(parse_transfer_strategy(n));

  TrainConfig tc;
  tc.seed = a.seed;
  json out = json::array();
  for (auto s : strategies) {
    TransferPlan plan;
    plan.source = model.params.embedding.source.dataset;
    plan.target = target.name;
    plan.adaptation_fraction = a.fraction;
    plan.strategy = s;
    plan.refit_projection = a.refit;
    const bool use_pca_model = s == TransferStrategy::pca_emb && pca_model;
    const TrainedModel& m = use_pca_model ? *pca_model : model;
    if (s == TransferStrategy::pca_emb && !proj) throw UsageError("pca strategy needs --proj");
    HorizonReport r;
    if (cross_city) {
      if (s != TransferStrategy::pca_emb && s != TransferStrategy::zero_emb) {
        throw Error("zero-shot transfer to " + std::to_string(target.num_nodes()) + " nodes supports pca and zero only, not " +
                    std::string(to_string(s)));
      }
      PcaProjection none;
      r = zero_shot_transfer(m, proj ? *proj : none, target, plan);
    } else {
      r = cross_year_eval(m, proj ? &*proj : nullptr, target, plan, tc);
    }
    r.model_id = content_id(use_pca_model ? pca_bytes : bytes);
    out.push_back(r.to_json());
  }
  if (a.baseline) {
    const auto split = adaptation_split(target, a.fraction);
    const auto& cfg = model.params.config;
    auto r = historical_average_baseline(target, split.adaptation, split.evaluation, cfg.l1, cfg.l2);
    r.seed = a.seed;
    out.push_back(r.to_json());
  }
  write_json(out, a.out);
}

struct SweepArgs {
  std::string config;
  std::vector<std::string> overrides;
  int k_min = 1;
  int k_max = 8;
  std::string k_list;
};

void cmd_sweep(const SweepArgs& a) {
  RunConfig base = RunConfig::load(a.config);
  for (const auto& o : a.overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
    base.set(o.substr(0, eq), o.substr(eq + 1));
  }
  std::vector<int> ks;
  if (!a.k_list.empty()) {
    for (const auto& k : split_list(a.k_list)) ks.push_back(std::stoi(k));
  } else {
    if (a.k_min < 1 || a.k_max < a.k_min) throw UsageError("k range must satisfy 1 <= k-min <= k-max");
    for (int k = a.k_min; k <= a.k_max; ++k) ks.push_back(k);
  }
  const fs::path dir = base.output_dir;
  fs::create_directories(dir);
  write_file_atomic(dir / "resolved_config.cfg", base.resolved());

  std::optional<TrafficSeries> shifted;
  if (!base.shifted_path.empty()) shifted = load_series(base.shifted_path);

  std::string csv = "k,val_mae,test_mae,shifted_mae\n";
  auto row = [&](const std::string& k, const TrainOutcome& o, const PcaProjection* proj, TransferStrategy s) {
    const auto& cfg = o.model.params.config;
    auto test = evaluate(o.model.params, o.series, o.model.normalizer,
                         make_windows(o.series, o.split.test, cfg.l1, cfg.l2));
    std::string shifted_mae;
    if (shifted) {
      TransferPlan plan;
      plan.strategy = s;
      auto r = cross_year_eval(o.model, proj, *shifted, plan, base.train_config());
      shifted_mae = num(r.average.mae);
    }
    csv += k + "," + num(o.report.best_val_mae) + "," + num(test.average.mae) + "," + shifted_mae + "\n";
    std::cerr << "k=" << k << " done\n";
  };

  for (int k : ks) {
    RunConfig cfg = base;
    cfg.strategy = EmbeddingStrategy::pca;
    cfg.embed_dim = k;
    auto o = train_pipeline(cfg);
    const Vec ratio = explained_variance_ratio(o.projection->eigenvalues);
    for (Eigen::Index i = 1; i < ratio.size(); ++i) {
      if (ratio(i) < ratio(i - 1)) throw Error("explained-variance ratio decreased at k=" + std::to_string(i + 1));
    }
    row(std::to_string(k), o, &*o.projection, TransferStrategy::pca_emb);
  }
  RunConfig cfg = base;
  cfg.strategy = EmbeddingStrategy::adaptive;
  if (cfg.embed_dim == 0) cfg.embed_dim = 8;
  auto o = train_pipeline(cfg);
  row("adaptive", o, nullptr, TransferStrategy::vanilla_adaptive);
  write_file_atomic(dir / "sweep.csv", csv);
}

struct ExportArgs {
  std::string checkpoint, data, proj, out, graph;
  double fraction = 0.05;
  double min_weight = 0.0;
};

void cmd_export(const ExportArgs& a) {
  const auto model = load_model(a.checkpoint);
  EmbeddingTable table = model.params.embedding;
  std::vector<std::string> ids = default_ids(table.rows());
  if (!a.data.empty()) {
    const auto series = load_series(a.data);
    if (!a.proj.empty()) {
      const auto proj = load_projection(a.proj);
      const auto split = adaptation_split(series, a.fraction);
      const Normalizer norm = series.num_nodes() == model.params.num_nodes() ? model.normalizer
                                                                               : fit_normalizer(series, split.adaptation);
      table = refresh_embedding(to_day_tensor(series, split.adaptation, norm), proj);
      ids = series.node_ids;
    } else if (series.num_nodes() == table.rows()) {
      ids = series.node_ids;
    } else {
      throw Error("data has " + std::to_string(series.num_nodes()) + " nodes, checkpoint embedding has " +
                  std::to_string(table.rows()));
    }
  } else if (!a.proj.empty()) {
    throw UsageError("--proj needs --data to project");
  }
  write_embedding_csv(table, ids, a.out);
  if (!a.graph.empty()) write_graph_csv(build_adaptive_graph(table), ids, a.min_weight, a.graph);
}

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "table", out;
};

void cmd_report(const ReportArgs& a) {
  std::vector<HorizonReport> reports;
  for (const auto& path : a.inputs) {
    json j;
    try {
      j = json::parse(read_file(path));
    } catch (const json::exception& e) {
      throw Error(path + ": " + e.what());
    }
    if (j.is_array()) {
      for (const auto& item : j) reports.push_back(HorizonReport::from_json(item));
    } else {
      reports.push_back(HorizonReport::from_json(j));
    }
  }
  std::string text;
  if (a.format == "table") {
    text = render_table(reports);
  } else if (a.format == "csv") {
    text = "dataset,strategy,horizon,mae,rmse,mape\n";
    for (const auto& r : reports) {
      for (const auto& [h, m] : r.horizons) {
        text += r.dataset + "," + r.strategy + "," + std::to_string(h) + "," + num(m.mae) + "," + num(m.rmse) + "," +
                num(m.mape) + "\n";
      }
      text += r.dataset + "," + r.strategy + ",average," + num(r.average.mae) + "," + num(r.average.rmse) + "," +
              num(r.average.mape) + "\n";
    }
  } else {
    throw UsageError("--format must be table or csv");
  }
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(a.out, text);
  }
}

}  // namespace

TrafficSeries load_series(const std::string& path, const std::string& adjacency) {
  if (path.empty()) throw UsageError("no data path given");
  auto s = ingest_csv(path);
  if (!adjacency.empty()) ingest_adjacency(s, adjacency);
  return s;
}

std::string content_id(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

TrainOutcome train_pipeline(const RunConfig& cfg) {
  TrainOutcome o;
  o.series = load_series(cfg.data_path, cfg.adjacency_path);
  auto& s = o.series;
  if (cfg.steps_per_day != 0 && cfg.steps_per_day != s.steps_per_day) {
    throw Error("config says steps_per_day=" + std::to_string(cfg.steps_per_day) + " but the data has " +
                std::to_string(s.steps_per_day));
  }
  o.split = split_chronological(s, cfg.split);
  const auto norm = fit_normalizer(s, o.split.train, cfg.norm_include_zeros);
  const auto train_cfg = cfg.train_config();

  int dim = cfg.embed_dim;
  std::optional<EmbeddingTable> table;
  if (cfg.strategy == EmbeddingStrategy::pca) {
    const auto z = to_day_tensor(s, o.split.train, norm);
    ComponentSpec spec = cfg.embed_dim > 0 ? ComponentSpec{ComponentCount{static_cast<std::size_t>(cfg.embed_dim)}}
                                           : ComponentSpec{VarianceThreshold{cfg.theta}};
    o.projection = fit_projection(z, spec, cfg.centered);
    dim = static_cast<int>(o.projection->dim());
    table = refresh_embedding(z, *o.projection);
    table->source.dataset = s.name;
    table->source.projection = "train";
  } else if (dim == 0) {
    dim = 8;
  }
  if (dim < 1) throw UsageError("embedding.dim must be positive");

  auto params = init_params(cfg.model_config(dim, s.steps_per_day), s.num_nodes(), cfg.seed);
  if (table) {
    set_embedding(params, std::move(*table));
  } else if (cfg.strategy == EmbeddingStrategy::zero) {
    set_embedding(params, zero_embedding(s.num_nodes(), static_cast<std::size_t>(dim)));
  }
  params.embedding.source.dataset = s.name;

  FitData data;
  data.series = &s;
  data.normalizer = norm;
  data.train = make_windows(s, o.split.train, cfg.l1, cfg.l2);
  data.val = make_windows(s, o.split.val, cfg.l1, cfg.l2);
  auto fitted = fit(params, data, train_cfg, trainable_for(cfg.strategy));
  o.model = {std::move(fitted.best), norm};
  o.report = std::move(fitted.report);
  return o;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"PCA node embeddings for spatiotemporal traffic forecasting"};
  app.require_subcommand(1);

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "Validate a CSV series and print a summary");
  c_ingest->add_option("--data", ingest.data, "Series CSV")->required();
  c_ingest->add_option("--adjacency", ingest.adjacency, "Edge list src,dst,weight");
  c_ingest->add_option("--out", ingest.out, "Write the canonical CSV here");

  SynthSpec synth;
  std::string synth_out;
  auto* c_synth = app.add_subcommand("synth", "Generate synthetic role-structured traffic");
  c_synth->add_option("--out", synth_out, "Output directory")->required();
  c_synth->add_option("--nodes", synth.n_nodes);
  c_synth->add_option("--roles", synth.n_roles);
  c_synth->add_option("--days", synth.days);
  c_synth->add_option("--steps-per-day", synth.steps_per_day);
  c_synth->add_option("--shift", synth.shift_fraction, "Fraction of nodes whose role changes");
  c_synth->add_option("--noise", synth.noise_std, "AR(1) innovation std");
  c_synth->add_option("--seed", synth.seed);

  std::string train_config;
  std::vector<std::string> train_sets;
  auto* c_train = app.add_subcommand("train", "Train a forecaster from a config file");
  c_train->add_option("--config", train_config, "key=value config")->required();
  c_train->add_option("--set", train_sets, "Override a config key (key=value)");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score a checkpoint on a series");
  c_eval->add_option("--checkpoint", eval.checkpoint)->required();
  c_eval->add_option("--data", eval.data)->required();
  c_eval->add_option("--proj", eval.proj, "Projection checkpoint (pca strategy)");
  c_eval->add_option("--strategy", eval.strategy, "vanilla|zero|pca");
  c_eval->add_option("--split", eval.split, "train|val|test|all");
  c_eval->add_option("--split-ratios", eval.ratios);
  c_eval->add_option("--adaptation-fraction", eval.fraction);
  c_eval->add_option("--seed", eval.seed);
  c_eval->add_option("--out", eval.out, "Report JSON path (stdout if omitted)");

  TransferArgs transfer;
  auto* c_transfer = app.add_subcommand("transfer", "Cross-year or zero-shot evaluation");
  c_transfer->add_option("--checkpoint", transfer.checkpoint)->required();
  c_transfer->add_option("--pca-checkpoint", transfer.pca_checkpoint, "Model used for the pca strategy");
  c_transfer->add_option("--proj", transfer.proj);
  c_transfer->add_option("--target", transfer.target)->required();
  c_transfer->add_option("--strategies", transfer.strategies, "Comma list of vanilla,zero,pca,finetune");
  c_transfer->add_option("--mode", transfer.mode, "auto|cross-year|zero-shot");
  c_transfer->add_option("--adaptation-fraction", transfer.fraction);
  c_transfer->add_flag("--refit-projection", transfer.refit);
  c_transfer->add_flag("--baseline", transfer.baseline, "Append the historical-average baseline");
  c_transfer->add_option("--seed", transfer.seed);
  c_transfer->add_option("--out", transfer.out);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep-components", "Train one pca model per component count");
  c_sweep->add_option("--config", sweep.config)->required();
  c_sweep->add_option("--set", sweep.overrides);
  c_sweep->add_option("--k-min", sweep.k_min);
  c_sweep->add_option("--k-max", sweep.k_max);
  c_sweep->add_option("--k-list", sweep.k_list, "Comma list of k, overrides the range");

  ExportArgs exp;
  auto* c_export = app.add_subcommand("export-embeddings", "Write node embeddings (and the adaptive graph)");
  c_export->add_option("--checkpoint", exp.checkpoint)->required();
  c_export->add_option("--data", exp.data, "Series supplying node ids (and days for --proj)");
  c_export->add_option("--proj", exp.proj, "Recompute pca embeddings from --data");
  c_export->add_option("--adaptation-fraction", exp.fraction);
  c_export->add_option("--out", exp.out)->required();
  c_export->add_option("--graph", exp.graph, "Also write the adaptive graph as src,dst,weight");
  c_export->add_option("--min-weight", exp.min_weight);

  ReportArgs rep;
  auto* c_report = app.add_subcommand("report", "Render report JSON as a table or CSV");
  c_report->add_option("--in", rep.inputs)->required();
  c_report->add_option("--format", rep.format, "table|csv");
  c_report->add_option("--out", rep.out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    apply_threads_env();
    if (c_ingest->parsed()) cmd_ingest(ingest);
    if (c_synth->parsed()) cmd_synth(synth, synth_out);
    if (c_train->parsed()) {
      auto cfg = RunConfig::load(train_config);
      for (const auto& o : train_sets) {
        auto eq = o.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + o + "'");
        cfg.set(o.substr(0, eq), o.substr(eq + 1));
      }
      cmd_train(cfg);
    }
    if (c_eval->parsed()) cmd_eval(eval);
    if (c_transfer->parsed()) cmd_transfer(transfer);
    if (c_sweep->parsed()) cmd_sweep(sweep);
    if (c_export->parsed()) cmd_export(exp);
    if (c_report->parsed()) cmd_report(rep);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("stpca");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace stpca
