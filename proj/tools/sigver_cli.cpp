// sigver: generate | extract | train | evaluate | report

#include "sigver/sigver.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace sigver;

namespace {

struct DataOptions {
  std::string data;
  std::string manifest;
  bool drop_pen_up = false;
  int dev_users = -1;  // default: 3/4 of the users
  ProtocolCounts counts;
};

void add_data_options(CLI::App* cmd, DataOptions& o) {
  cmd->add_option("--data", o.data, "Dataset root (<root>/<user>/<kind>_<session>_<index>.svc)")->required();
  cmd->add_option("--manifest", o.manifest, "Tab-separated manifest overriding the directory layout");
  cmd->add_flag("--drop-pen-up", o.drop_pen_up, "Discard pen-up samples");
  cmd->add_option("--dev-users", o.dev_users, "Users in the development partition (default: 3/4)");
  cmd->add_option("--enrollment", o.counts.enrollment, "Enrollment signatures per user")->capture_default_str();
  cmd->add_option("--test-genuine", o.counts.test_genuine, "Test genuine signatures per user")->capture_default_str();
  cmd->add_option("--forgeries", o.counts.forgeries, "Skilled forgeries per user")->capture_default_str();
}

struct LoadedData {
  DatasetSplit split;
  std::vector<FeatureSequence> features;  // parallel to split.records
};

LoadedData load(const DataOptions& o, unsigned workers, bool quiet = false) {
  LoadOptions lo;
  lo.drop_pen_up = o.drop_pen_up;
  if (!o.manifest.empty()) lo.manifest = o.manifest;
  const auto records = load_dataset(o.data, lo);
  std::set<std::string> users;
  for (const auto& r : records) users.insert(r.user_id);
  const std::size_t n_dev = o.dev_users >= 0 ? static_cast<std::size_t>(o.dev_users) : users.size() * 3 / 4;
  LoadedData d;
  d.split = build_split(records, n_dev, o.counts);
  d.features.resize(d.split.records.size());
  parallel_for(d.features.size(), workers, [&](std::size_t i) { d.features[i] = extract_features(d.split.records[i]); });
  if (!quiet) {
    std::cout << "dataset: " << users.size() << " users (" << d.split.development.size() << " development, "
              << d.split.evaluation.size() << " evaluation), " << d.split.records.size() << " signatures in protocol\n";
  }
  return d;
}

std::vector<PairScore> to_pair_scores(const PairList& pairs, const std::vector<double>& scores) {
  std::vector<PairScore> out(pairs.pairs.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto& p = pairs.pairs[k];
    out[k] = {p.user, p.enrollment_slot, p.probe_slot, p.label, scores[k]};
  }
  return out;
}

DevMetrics lstm_metrics(const SiameseModel& model, const PairList& pairs, const std::vector<FeatureSequence>& features,
                        int enrollments, unsigned workers) {
  const auto labeled = labeled_pairs(pairs, features);
  const auto ps = to_pair_scores(pairs, score_pairs(model, labeled, workers));
  return {compute_eer(one_vs_one(ps)).eer_percent, compute_eer(aggregate_4vs1(ps, enrollments)).eer_percent};
}

std::vector<int> parse_columns(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error("bad column list '" + s + "'");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_generate(const std::string& out_dir, const std::string& config_path, std::optional<int> users,
                 std::optional<std::uint64_t> seed, std::optional<double> forgery_noise, unsigned workers) {
  SynthConfig cfg;
  if (!config_path.empty()) cfg = load_synth_config(KeyValueConfig::load(config_path));
  if (users) cfg.n_users = *users;
  if (seed) cfg.seed = *seed;
  if (forgery_noise) cfg.forgery_noise = *forgery_noise;
  if (cfg.n_users <= 0) throw CLI::ValidationError("--users", "must be positive");
  const auto records = generate_corpus(cfg, workers);
  write_dataset(out_dir, records);
  std::cout << "generated " << cfg.n_users << " users, " << records.size() << " files in " << out_dir << " (seed "
            << cfg.seed << ")\n";
  return 0;
}

int cmd_extract(const DataOptions& d, const std::string& out_dir, bool no_normalize, unsigned workers) {
  LoadOptions lo;
  lo.drop_pen_up = d.drop_pen_up;
  if (!d.manifest.empty()) lo.manifest = d.manifest;
  const auto records = load_dataset(d.data, lo);
  ExtractOptions eo;
  eo.normalize = !no_normalize;
  std::vector<FeatureSequence> features(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) { features[i] = extract_features(records[i], eo); });
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto path = fs::path(out_dir) / (records[i].ref() + ".csv");
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    write_feature_csv(out, features[i]);
  }
  std::cout << "wrote " << records.size() << " feature files to " << out_dir << '\n';
  return 0;
}

struct TrainOptions {
  DataOptions data;
  std::string model = "model.bin";
  std::string log = "train_log.csv";
  std::string config;
  TrainConfig train;
  SiameseConfig net;
  std::string optimizer = "adam";
  std::string concatenation = "per-step";
  std::string readout = "last";
  bool no_symmetrize = false;
  int eval_every = 1;
  std::uint64_t init_seed = 1;
};

void apply_train_config(const std::string& path, TrainOptions& o, const CLI::App& cmd) {
  const auto kv = KeyValueConfig::load(path);
  auto take = [&](const char* key, const char* flag, auto& target) {
    auto value = target;
    kv.get(key, value);
    if (cmd.count(flag) == 0) target = value;  // flags win
  };
  take("learning_rate", "--lr", o.train.learning_rate);
  take("batch_size", "--batch", o.train.batch_size);
  take("max_iterations", "--iterations", o.train.max_iterations);
  take("patience", "--patience", o.train.patience);
  take("clip_norm", "--clip-norm", o.train.clip_norm);
  take("seed", "--seed", o.train.seed);
  take("init_seed", "--init-seed", o.init_seed);
  take("optimizer", "--optimizer", o.optimizer);
  take("eval_every", "--eval-every", o.eval_every);
  take("concatenation", "--concatenation", o.concatenation);
  take("readout", "--readout", o.readout);
  take("dev_users", "--dev-users", o.data.dev_users);
  take("enrollment", "--enrollment", o.data.counts.enrollment);
  take("test_genuine", "--test-genuine", o.data.counts.test_genuine);
  take("forgeries", "--forgeries", o.data.counts.forgeries);
  bool symmetrize = !o.no_symmetrize;
  take("symmetrize", "--no-symmetrize", symmetrize);
  o.no_symmetrize = !symmetrize;
  kv.reject_unknown();
}

int cmd_train(TrainOptions o, const CLI::App& cmd, unsigned workers) {
  if (!o.config.empty()) apply_train_config(o.config, o, cmd);
  o.train.workers = workers;
  if (o.optimizer == "adam") {
    o.train.optimizer = OptimizerKind::Adam;
  } else if (o.optimizer == "sgd") {
    o.train.optimizer = OptimizerKind::GradientDescent;
  } else {
    throw Error("optimizer must be adam or sgd");
  }
  if (o.concatenation == "per-step") {
    o.net.concatenation = Concatenation::PerStep;
  } else if (o.concatenation == "final-state") {
    o.net.concatenation = Concatenation::FinalState;
  } else {
    throw Error("concatenation must be per-step or final-state");
  }
  if (o.readout == "last") {
    o.net.readout = Readout::LastStep;
  } else if (o.readout == "mean") {
    o.net.readout = Readout::MeanOverTime;
  } else {
    throw Error("readout must be last or mean");
  }
  o.net.symmetrize = !o.no_symmetrize;
  validate(o.train);

  const auto data = load(o.data, workers);
  if (data.split.development.size() < 2) throw ProtocolError("training needs at least 2 development users");
  const auto pairs = build_pairs(data.split, Partition::Development);
  std::cout << "development pairs: " << pairs.count(1) << " genuine + " << pairs.count(0) << " impostor\n";

  const int enrollments = o.data.counts.enrollment;
  DevEvalHook hook = [&](const SiameseModel& m, int iteration) -> std::optional<DevMetrics> {
    if (o.eval_every <= 0 || iteration % o.eval_every != 0) return std::nullopt;
    return lstm_metrics(m, pairs, data.features, enrollments, workers);
  };
  auto model = initialize_model(o.net, o.init_seed);
  const auto print = [](const IterationRecord& r) {
    std::cout << "iteration " << r.iteration << " cost " << r.mean_cost;
    if (r.dev) std::cout << " dev EER 1vs1 " << r.dev->eer_1vs1 << "% 4vs1 " << r.dev->eer_4vs1 << '%';
    std::cout << " (" << r.seconds << " s)" << std::endl;
  };
  const auto result = train(model, pairs, data.features, o.train, hook, print);

  save_model(result.best, fs::path(o.model));
  {
    std::ofstream log(o.log);
    if (!log) throw Error("cannot write " + o.log);
    write_training_log(log, result.history);
  }
  if (result.history.empty()) {
    std::cout << "no training iterations; saved the initial model\n";
    return 0;
  }
  const auto best = lstm_metrics(result.best, pairs, data.features, enrollments, workers);
  std::cout << "best iteration " << result.best_iteration << ": dev EER 1vs1 " << best.eer_1vs1 << "%, 4vs1 "
            << best.eer_4vs1 << "%\n";
  std::cout << "model written to " << o.model << ", log to " << o.log << '\n';
  return 0;
}

struct EvalOptions {
  DataOptions data;
  std::string model;
  bool baseline = false;
  bool sffs = false;
  std::size_t sffs_k = 9;
  std::string dtw_columns;
  std::string out = "results";
  bool random_forgeries = false;
  std::size_t det_points = 0;
};

int cmd_evaluate(const EvalOptions& o, unsigned workers) {
  if (o.model.empty() && !o.baseline) throw Error("evaluate needs --model and/or --baseline");
  const auto data = load(o.data, workers);
  const auto pairs = o.random_forgeries ? build_random_forgery_pairs(data.split, Partition::Evaluation)
                                        : build_pairs(data.split, Partition::Evaluation);
  const int E = o.data.counts.enrollment;
  std::cout << "evaluation users: " << data.split.evaluation.size() << "; 1vs1 scores: " << pairs.count(1)
            << " genuine (" << E << "x" << o.data.counts.test_genuine << "x" << data.split.evaluation.size()
            << "), " << pairs.count(0) << " impostor\n";
  fs::create_directories(o.out);

  std::vector<ScoreSet> sets;
  if (!o.model.empty()) {
    const auto model = load_model(fs::path(o.model));
    const auto ps = to_pair_scores(pairs, score_pairs(model, labeled_pairs(pairs, data.features), workers));
    sets.push_back(one_vs_one(ps, "lstm"));
    sets.push_back(aggregate_4vs1(ps, E, "lstm"));
  }
  if (o.baseline) {
    DtwConfig dtw = all_columns();
    if (!o.dtw_columns.empty()) dtw.columns = parse_columns(o.dtw_columns);
    if (o.sffs) {
      SffsOptions so;
      so.k_max = o.sffs_k;
      so.enrollments = E;
      so.workers = workers;
      const auto dev_pairs = build_pairs(data.split, Partition::Development);
      const auto sel = sffs_select(dev_pairs, data.features, so);
      std::ofstream rep(fs::path(o.out) / "sffs_report.txt");
      write_sffs_report(rep, sel);
      dtw.columns = sel.selected;
      std::cout << "SFFS selected";
      for (int c : sel.selected) std::cout << ' ' << c;
      std::cout << " (dev 4vs1 EER " << sel.eer_percent << "%)\n";
    }
    const auto ps = dtw_scores(pairs, data.features, dtw, workers);
    sets.push_back(one_vs_one(ps, "dtw"));
    sets.push_back(aggregate_4vs1(ps, E, "dtw"));
  }

  std::vector<ResultRow> rows;
  std::ofstream det(fs::path(o.out) / "det.csv");
  bool header = true;
  for (const auto& s : sets) {
    rows.push_back(summarize(s));
    write_det_csv(det, s, det_curve(s, o.det_points), header);
    header = false;
    std::cout << std::left << std::setw(5) << s.system << ' ' << protocol_name(s.protocol) << "  EER "
              << std::fixed << std::setprecision(2) << rows.back().eer.eer_percent << std::defaultfloat << "%  ("
              << s.genuine.size() << " genuine / " << s.impostor.size() << " impostor scores)\n";
  }
  std::ofstream res(fs::path(o.out) / "results.csv");
  write_results_csv(res, rows);
  if (!o.model.empty() && o.baseline) {
    for (std::size_t p = 0; p < 2; ++p) {
      const bool better = rows[p].eer.eer_percent < rows[p + 2].eer.eer_percent;
      std::cout << "ordering " << protocol_name(rows[p].protocol) << ": lstm " << (better ? "<" : ">=") << " dtw\n";
    }
  }
  std::cout << "results written to " << (fs::path(o.out) / "results.csv").string() << '\n';
  return 0;
}

int cmd_report(const std::string& results_path) {
  std::ifstream in(results_path);
  if (!in) throw Error("cannot open " + results_path);
  std::string line;
  std::getline(in, line);
  std::cout << std::left << std::setw(8) << "system" << std::setw(10) << "protocol" << std::setw(12) << "EER (%)"
            << "published EER (%)\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string system, protocol, eer;
    std::getline(ss, system, ',');
    std::getline(ss, protocol, ',');
    std::getline(ss, eer, ',');
    std::string reference = "-";
    for (const auto& r : kReferenceEers) {
      if (r.system == system && protocol_name(r.protocol) == protocol) {
        std::ostringstream rs;
        rs << r.eer_percent;
        reference = rs.str();
      }
    }
    std::cout << std::setw(8) << system << std::setw(10) << protocol << std::setw(12) << eer << reference << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online signature verification: Siamese LSTM and DTW baseline"};
  app.require_subcommand(1);
  unsigned threads = default_workers();
  app.add_option("--threads", threads, "Worker threads (default: $SIGVER_THREADS or hardware concurrency)");

  auto* gen = app.add_subcommand("generate", "Write a synthetic SVC corpus");
  std::string gen_out, gen_config;
  std::optional<int> gen_users;
  std::optional<std::uint64_t> gen_seed;
  std::optional<double> gen_noise;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--config", gen_config, "key = value synthetic-corpus config");
  gen->add_option("--users", gen_users, "Number of users");
  gen->add_option("--seed", gen_seed, "Corpus seed");
  gen->add_option("--forgery-noise", gen_noise, "Forgery distortion scale");

  auto* ext = app.add_subcommand("extract", "Dump the 23 time functions of every signature as CSV");
  DataOptions ext_data;
  std::string ext_out;
  bool ext_raw = false;
  ext->add_option("--data", ext_data.data, "Dataset root")->required();
  ext->add_option("--manifest", ext_data.manifest, "Manifest file");
  ext->add_flag("--drop-pen-up", ext_data.drop_pen_up, "Discard pen-up samples");
  ext->add_option("--out", ext_out, "Output directory")->required();
  ext->add_flag("--no-normalize", ext_raw, "Skip per-signature z-scoring");

  auto* tr = app.add_subcommand("train", "Train the Siamese LSTM on the development partition");
  TrainOptions topt;
  add_data_options(tr, topt.data);
  tr->add_option("--model", topt.model, "Output model file")->capture_default_str();
  tr->add_option("--log", topt.log, "Training log CSV")->capture_default_str();
  tr->add_option("--config", topt.config, "key = value training config (flags win)");
  tr->add_option("--iterations", topt.train.max_iterations, "Training iterations (passes)")->capture_default_str();
  tr->add_option("--lr", topt.train.learning_rate, "Learning rate")->capture_default_str();
  tr->add_option("--batch", topt.train.batch_size, "Pairs per mini-batch")->capture_default_str();
  tr->add_option("--patience", topt.train.patience, "Early-stop patience (0 = off)")->capture_default_str();
  tr->add_option("--clip-norm", topt.train.clip_norm, "Gradient clipping norm (0 = off)")->capture_default_str();
  tr->add_option("--seed", topt.train.seed, "Shuffle seed")->capture_default_str();
  tr->add_option("--init-seed", topt.init_seed, "Initialisation seed")->capture_default_str();
  tr->add_option("--optimizer", topt.optimizer, "adam | sgd")->capture_default_str();
  tr->add_option("--eval-every", topt.eval_every, "Development EER every N iterations (0 = never)")
      ->capture_default_str();
  tr->add_option("--concatenation", topt.concatenation, "per-step | final-state")->capture_default_str();
  tr->add_option("--readout", topt.readout, "last | mean")->capture_default_str();
  tr->add_flag("--no-symmetrize", topt.no_symmetrize, "Score only the (enrollment, probe) order");

  auto* ev = app.add_subcommand("evaluate", "Score the evaluation partition and write EER/DET files");
  EvalOptions eopt;
  add_data_options(ev, eopt.data);
  ev->add_option("--model", eopt.model, "Trained model file");
  ev->add_flag("--baseline", eopt.baseline, "Run the DTW baseline");
  ev->add_flag("--sffs", eopt.sffs, "Select DTW columns by SFFS on the development partition");
  ev->add_option("--sffs-k", eopt.sffs_k, "Maximum SFFS subset size")->capture_default_str();
  ev->add_option("--dtw-columns", eopt.dtw_columns, "Comma-separated 1-based columns for DTW (default: all)");
  ev->add_option("--out", eopt.out, "Output directory")->capture_default_str();
  ev->add_flag("--random-forgeries", eopt.random_forgeries, "Use other users' genuine signatures as impostors");
  ev->add_option("--det-points", eopt.det_points, "Subsample DET curves (0 = all points)");

  auto* rep = app.add_subcommand("report", "Print a results CSV next to the published EERs");
  std::string rep_in;
  rep->add_option("--results", rep_in, "results.csv from evaluate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads == 0) threads = 1;
    if (*gen) return cmd_generate(gen_out, gen_config, gen_users, gen_seed, gen_noise, threads);
    if (*ext) return cmd_extract(ext_data, ext_out, ext_raw, threads);
    if (*tr) return cmd_train(topt, *tr, threads);
    if (*ev) return cmd_evaluate(eopt, threads);
    if (*rep) return cmd_report(rep_in);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
