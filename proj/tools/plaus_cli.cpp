// plaus: recast ordinal premise/hypothesis corpora into ranking triplets,
// train a small scoring model under a log or margin objective, and report
// score distributions.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "plaus/autodiff.hpp"
#include "plaus/common.hpp"
#include "plaus/corpus.hpp"
#include "plaus/encoder.hpp"
#include "plaus/evaluation.hpp"
#include "plaus/objectives.hpp"
#include "plaus/recast.hpp"
#include "plaus/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

struct ManifestWriter {
  std::string subcommand;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void write(const fs::path& path) const {
    json j{{"subcommand", subcommand},
           {"config", config},
           {"inputs", inputs},
           {"outputs", outputs},
           {"seed", seed},
           {"version", kVersion},
           {"duration_seconds",
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()}};
    plaus::write_file_atomic(path, j.dump(2) + "\n");
  }
};

plaus::TripletDataset load_triplets(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw plaus::Error("cannot open " + path.string());
  return plaus::parse_triplets(in);
}

std::vector<plaus::LabeledPair> load_pairs(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw plaus::Error("cannot open " + path.string());
  return plaus::parse_nli_records(in);
}

std::pair<plaus::EncoderParams, plaus::Vocab> load_checkpoint(const fs::path& path) {
  return plaus::parse_checkpoint(plaus::read_file(path));
}

// Texts of a triplet dataset, for vocabulary building.
std::vector<std::string> dataset_texts(const plaus::TripletDataset& ds) {
  std::vector<std::string> texts;
  texts.reserve(ds.triplets.size() * 3);
  for (const auto& t : ds.triplets) {
    texts.push_back(t.shared);
    texts.push_back(t.preferred);
    texts.push_back(t.dispreferred);
  }
  return texts;
}

struct TrainFlags {
  std::string triplets, dev, objective = "margin", out_dir, config_path;
  double xi = 0.2, lr = 1e-3;
  std::uint64_t seed = 0;
  std::size_t d = 64, d_h = 128, min_freq = 2;
  std::size_t epochs = 50, batch_size = 32, patience = 5, eval_every = 50;
};

void add_train_hyper_flags(CLI::App* cmd, TrainFlags& f) {
  cmd->add_option("--xi", f.xi, "margin hyperparameter");
  cmd->add_option("--lr", f.lr, "learning rate");
  cmd->add_option("--epochs", f.epochs, "max epochs");
  cmd->add_option("--batch-size", f.batch_size, "batch size");
  cmd->add_option("--patience", f.patience, "early-stopping patience");
  cmd->add_option("--eval-every", f.eval_every, "steps between dev evaluations");
  cmd->add_option("--d", f.d, "embedding dimension");
  cmd->add_option("--dh", f.d_h, "hidden dimension");
  cmd->add_option("--min-freq", f.min_freq, "vocabulary frequency cutoff");
}

// Config-file values apply only where the flag was not given on the
// command line, so flags override the file.
void merge_config_file(const CLI::App* cmd, const std::string& path, TrainFlags& f) {
  json cfg = json::parse(plaus::read_file(path));
  auto absent = [&](const char* flag) { return cmd->count(flag) == 0; };
  if (cfg.contains("objective") && absent("--objective")) f.objective = cfg["objective"];
  if (cfg.contains("xi") && absent("--xi")) f.xi = cfg["xi"];
  if (cfg.contains("learning_rate") && absent("--lr")) f.lr = cfg["learning_rate"];
  if (cfg.contains("max_epochs") && absent("--epochs")) f.epochs = cfg["max_epochs"];
  if (cfg.contains("batch_size") && absent("--batch-size")) f.batch_size = cfg["batch_size"];
  if (cfg.contains("patience") && absent("--patience")) f.patience = cfg["patience"];
  if (cfg.contains("eval_every") && absent("--eval-every")) f.eval_every = cfg["eval_every"];
  if (cfg.contains("seed") && absent("--seed")) f.seed = cfg["seed"];
  if (cfg.contains("d") && absent("--d")) f.d = cfg["d"];
  if (cfg.contains("d_h") && absent("--dh")) f.d_h = cfg["d_h"];
  if (cfg.contains("min_freq") && absent("--min-freq")) f.min_freq = cfg["min_freq"];
}

json effective_train_config(const TrainFlags& f) {
  return json{{"objective", f.objective}, {"xi", f.xi},
              {"learning_rate", f.lr},    {"max_epochs", f.epochs},
              {"batch_size", f.batch_size}, {"patience", f.patience},
              {"eval_every", f.eval_every}, {"seed", f.seed},
              {"d", f.d},                 {"d_h", f.d_h},
              {"min_freq", f.min_freq}};
}

plaus::TrainConfig to_train_config(const TrainFlags& f) {
  plaus::TrainConfig cfg;
  cfg.objective.kind =
      f.objective == "log" ? plaus::ObjectiveKind::LOG : plaus::ObjectiveKind::MARGIN;
  cfg.objective.xi = f.xi;
  cfg.learning_rate = f.lr;
  cfg.max_epochs = f.epochs;
  cfg.batch_size = f.batch_size;
  cfg.patience = f.patience;
  cfg.eval_every = f.eval_every;
  cfg.seed = f.seed;
  return cfg;
}

int run_recast(const std::string& input, const std::string& variant, std::uint64_t seed,
               const std::string& out, const std::string& out_dev, ManifestWriter& manifest) {
  manifest.inputs = {input};
  if (variant == "mnli2") {
    if (out_dev.empty()) {
      std::cerr << "recast: --variant mnli2 requires --out-dev\n";
      return 1;
    }
    auto split = plaus::recast_mnli2_split(load_pairs(input), seed);
    plaus::write_file_atomic(out, plaus::serialize_triplets(split.train));
    plaus::write_file_atomic(out_dev, plaus::serialize_triplets(split.dev));
    manifest.outputs = {out, out_dev};
    manifest.write(fs::path(out).string() + ".manifest.json");
    std::cout << "train triplets: " << split.train.triplets.size()
              << "\ndev triplets: " << split.dev.triplets.size()
              << "\nskipped premises: " << split.skipped_premises << "\n";
    return 0;
  }
  plaus::TripletDataset ds;
  if (variant == "copa") {
    std::ifstream in(input);
    if (!in) throw plaus::Error("cannot open " + input);
    ds = plaus::recast_copa(plaus::parse_copa_records(in));
  } else {
    auto pairs = load_pairs(input);
    if (variant == "mnli1")
      ds = plaus::recast_mnli1(pairs);
    else if (variant == "joci1")
      ds = plaus::recast_joci(pairs, plaus::JociVariant::JOCI1);
    else if (variant == "joci2")
      ds = plaus::recast_joci(pairs, plaus::JociVariant::JOCI2);
    else {
      std::cerr << "recast: unknown variant '" << variant << "'\n";
      return 1;
    }
  }
  plaus::write_file_atomic(out, plaus::serialize_triplets(ds));
  manifest.outputs = {out};
  manifest.write(fs::path(out).string() + ".manifest.json");
  std::cout << "triplets: " << ds.triplets.size() << "\n";
  return 0;
}

int run_train(const CLI::App* cmd, TrainFlags& f, ManifestWriter& manifest) {
  if (!f.config_path.empty()) merge_config_file(cmd, f.config_path, f);
  manifest.config = effective_train_config(f);
  manifest.seed = f.seed;
  manifest.inputs = {f.triplets, f.dev};
  if (!f.config_path.empty()) manifest.inputs.push_back(f.config_path);

  auto train_set = load_triplets(f.triplets);
  auto dev_set = load_triplets(f.dev);
  auto vocab = plaus::build_vocab(dataset_texts(train_set), f.min_freq);
  auto cfg = to_train_config(f);
  auto result = plaus::train(train_set, dev_set, vocab, cfg, f.d, f.d_h);

  fs::create_directories(f.out_dir);
  fs::path ckpt = fs::path(f.out_dir) / "model.ckpt";
  fs::path history = fs::path(f.out_dir) / "history.csv";
  plaus::write_file_atomic(ckpt, plaus::serialize_checkpoint(result.params, vocab));
  json sidecar{{"format_version", plaus::kCheckpointVersion},
               {"d", f.d},
               {"d_h", f.d_h},
               {"vocab_size", vocab.size()},
               {"seed", f.seed},
               {"config_digest", plaus::fnv1a(manifest.config.dump())}};
  plaus::write_file_atomic(ckpt.string() + ".json", sidecar.dump(2) + "\n");
  plaus::write_file_atomic(history, plaus::history_csv(result.history));
  manifest.outputs = {ckpt.string(), ckpt.string() + ".json", history.string()};
  manifest.write(fs::path(f.out_dir) / "manifest.json");
  std::cout << "best dev accuracy: " << result.history.best_accuracy << " at step "
            << result.history.best_step << "\nstop reason: "
            << (result.history.stop_reason == plaus::StopReason::EARLY_STOP ? "EARLY_STOP"
                                                                            : "MAX_EPOCHS")
            << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& triplets_path,
             const std::string& out, ManifestWriter& manifest) {
  auto [params, vocab] = load_checkpoint(ckpt_path);
  auto ds = load_triplets(triplets_path);
  auto acc = plaus::pairwise_accuracy(params, vocab, ds);
  std::ostringstream csv;
  csv << "metric,value\n";
  csv << "pairwise_accuracy," << acc.accuracy << "\n";
  csv << "n_triplets," << acc.n_triplets << "\n";
  csv << "tie_count," << acc.tie_count << "\n";
  manifest.inputs = {ckpt_path, triplets_path};
  if (out.empty()) {
    std::cout << csv.str();
    manifest.write("eval.manifest.json");
  } else {
    plaus::write_file_atomic(out, csv.str());
    manifest.outputs = {out};
    manifest.write(out + ".manifest.json");
  }
  return 0;
}

int run_analyze(const std::string& ckpt_path, const std::string& sets_path, std::size_t bins,
                const std::string& out_dir, bool svg, ManifestWriter& manifest) {
  auto [params, vocab] = load_checkpoint(ckpt_path);
  auto groups = plaus::group_pairs(load_pairs(sets_path));
  auto report = plaus::distribution_report(params, vocab, groups, bins);
  fs::create_directories(out_dir);
  fs::path hist = fs::path(out_dir) / "histogram.csv";
  fs::path summary = fs::path(out_dir) / "summary.csv";
  plaus::write_file_atomic(hist, plaus::histogram_csv(report));
  plaus::write_file_atomic(summary, plaus::summary_csv(report));
  manifest.inputs = {ckpt_path, sets_path};
  manifest.outputs = {hist.string(), summary.string()};
  if (svg) {
    fs::path svg_path = fs::path(out_dir) / "histogram.svg";
    plaus::write_file_atomic(svg_path, plaus::histogram_svg(report));
    manifest.outputs.push_back(svg_path.string());
  }
  manifest.write(fs::path(out_dir) / "manifest.json");
  std::cout << plaus::summary_csv(report);
  return 0;
}

int run_gradcheck(std::uint64_t seed, double eps, double threshold) {
  plaus::Rng rng(seed);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t d = 2 + rng.below(4), d_h = 2 + rng.below(4), vocab_size = 12;
    auto params = plaus::gradcheck_params(vocab_size, d, d_h, rng.next_u64());
    auto rand_tokens = [&] {
      plaus::PairTokens t;
      t.ids.push_back(plaus::kCls);
      t.premise_begin = t.ids.size();
      for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i)
        t.ids.push_back(static_cast<int>(plaus::kNumReserved + rng.below(vocab_size - 4)));
      t.premise_end = t.ids.size();
      t.ids.push_back(plaus::kSep);
      t.hypothesis_begin = t.ids.size();
      for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i)
        t.ids.push_back(static_cast<int>(plaus::kNumReserved + rng.below(vocab_size - 4)));
      t.hypothesis_end = t.ids.size();
      t.ids.push_back(plaus::kSep);
      return t;
    };
    plaus::ObjectiveSpec spec;
    spec.kind = trial % 2 == 0 ? plaus::ObjectiveKind::MARGIN : plaus::ObjectiveKind::LOG;
    spec.xi = 0.2;
    plaus::Batch batch;
    for (int u = 0; u < 4; ++u) {
      if (spec.kind == plaus::ObjectiveKind::MARGIN)
        batch.margin_units.push_back({rand_tokens(), rand_tokens(), "u"});
      else
        batch.log_units.push_back({{rand_tokens(), rand_tokens(), rand_tokens()}, 0, "u"});
    }
    auto lg = plaus::loss_and_gradients(batch, params, spec);
    auto loss_fn = [&](const plaus::EncoderParams& p) {
      return plaus::loss_and_gradients(batch, p, spec).loss;
    };
    worst = std::max(worst, plaus::finite_difference_check(loss_fn, params, lg.grads, eps));
  }
  bool pass = worst < threshold;
  std::cout << "max relative error: " << worst << "\n"
            << (pass ? "PASS" : "FAIL") << " (threshold " << threshold << ")\n";
  return pass ? 0 : 2;
}

int run_crossval(const std::string& triplets_path, std::size_t k, const std::string& grid_str,
                 const CLI::App* cmd, TrainFlags& f, ManifestWriter& manifest) {
  std::vector<double> grid;
  std::stringstream ss(grid_str);
  std::string item;
  while (std::getline(ss, item, ',')) grid.push_back(std::stod(item));
  if (grid.empty()) {
    std::cerr << "crossval: empty grid\n";
    return 1;
  }
  if (!f.config_path.empty()) merge_config_file(cmd, f.config_path, f);
  auto ds = load_triplets(triplets_path);
  auto vocab = plaus::build_vocab(dataset_texts(ds), f.min_freq);
  auto cfg = to_train_config(f);
  auto result = plaus::crossval_margin(ds, k, grid, cfg, vocab, f.d, f.d_h);
  std::cout << "xi\tfold\taccuracy\n";
  for (const auto& cell : result.table)
    std::cout << cell.xi << '\t' << cell.fold << '\t' << cell.accuracy << '\n';
  std::cout << "best xi: " << result.best_xi << "\n";
  manifest.inputs = {triplets_path};
  manifest.config = effective_train_config(f);
  manifest.config["k"] = k;
  manifest.config["grid"] = grid;
  manifest.seed = f.seed;
  manifest.write("crossval.manifest.json");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"plausibility ranking toolkit"};
  app.require_subcommand(1);

  // recast
  std::string rc_input, rc_variant, rc_out, rc_out_dev;
  std::uint64_t rc_seed = 0;
  auto* recast = app.add_subcommand("recast", "convert a labeled corpus into triplets");
  recast->add_option("--input", rc_input, "input JSONL")->required();
  recast->add_option("--variant", rc_variant, "mnli1|mnli2|joci1|joci2|copa")->required();
  recast->add_option("--seed", rc_seed, "split seed (mnli2)");
  recast->add_option("--out", rc_out, "output triplet JSONL")->required();
  recast->add_option("--out-dev", rc_out_dev, "dev output (mnli2)");

  // synth
  std::string sy_mode = "separable", sy_out;
  std::size_t sy_premises = 100, sy_vocab = 120, sy_tokens = 6;
  std::uint64_t sy_seed = 0;
  auto* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  synth->add_option("--mode", sy_mode, "separable|adversarial");
  synth->add_option("--premises", sy_premises, "number of premises")->required();
  synth->add_option("--seed", sy_seed, "generator seed")->required();
  synth->add_option("--vocab-size", sy_vocab, "synthetic token universe size");
  synth->add_option("--tokens-per-text", sy_tokens, "tokens per generated text");
  synth->add_option("--out", sy_out, "output JSONL")->required();

  // train
  TrainFlags tf;
  auto* train = app.add_subcommand("train", "train a scoring model on triplets");
  train->add_option("--triplets", tf.triplets, "training triplet JSONL")->required();
  train->add_option("--dev", tf.dev, "dev triplet JSONL")->required();
  train->add_option("--objective", tf.objective, "log|margin");
  train->add_option("--seed", tf.seed, "training seed");
  train->add_option("--out-dir", tf.out_dir, "output directory")->required();
  train->add_option("--config", tf.config_path, "JSON config file");
  add_train_hyper_flags(train, tf);

  // eval
  std::string ev_ckpt, ev_triplets, ev_out;
  auto* eval = app.add_subcommand("eval", "pairwise accuracy of a checkpoint");
  eval->add_option("--checkpoint", ev_ckpt, "model checkpoint")->required();
  eval->add_option("--triplets", ev_triplets, "triplet JSONL")->required();
  eval->add_option("--out", ev_out, "summary CSV path (default: stdout)");

  // analyze
  std::string an_ckpt, an_sets, an_out_dir;
  std::size_t an_bins = 20;
  bool an_svg = false;
  auto* analyze = app.add_subcommand("analyze", "per-premise normalized score report");
  analyze->add_option("--checkpoint", an_ckpt, "model checkpoint")->required();
  analyze->add_option("--sets", an_sets, "labeled pair JSONL, grouped by premise_id")->required();
  analyze->add_option("--bins", an_bins, "histogram bins");
  analyze->add_option("--out-dir", an_out_dir, "output directory")->required();
  analyze->add_flag("--svg", an_svg, "also write an SVG rendering");

  // crossval
  TrainFlags cvf;
  std::string cv_triplets, cv_grid;
  std::size_t cv_k = 10;
  auto* crossval = app.add_subcommand("crossval", "k-fold grid search for the margin xi");
  crossval->add_option("--triplets", cv_triplets, "triplet JSONL")->required();
  crossval->add_option("--k", cv_k, "number of folds");
  crossval->add_option("--grid", cv_grid, "comma-separated xi values")->required();
  crossval->add_option("--seed", cvf.seed, "fold/training seed");
  crossval->add_option("--config", cvf.config_path, "JSON config file");
  add_train_hyper_flags(crossval, cvf);

  // gradcheck
  std::uint64_t gc_seed = 0;
  double gc_eps = 1e-5, gc_threshold = 1e-4;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--seed", gc_seed, "random draw seed");
  gradcheck->add_option("--eps", gc_eps, "finite-difference step");
  gradcheck->add_option("--threshold", gc_threshold, "max relative error allowed");

  CLI11_PARSE(app, argc, argv);

  ManifestWriter manifest;
  try {
    if (recast->parsed()) {
      manifest.subcommand = "recast";
      manifest.seed = rc_seed;
      manifest.config = {{"variant", rc_variant}, {"seed", rc_seed}};
      return run_recast(rc_input, rc_variant, rc_seed, rc_out, rc_out_dev, manifest);
    }
    if (synth->parsed()) {
      manifest.subcommand = "synth";
      manifest.seed = sy_seed;
      plaus::SynthSpec spec;
      spec.n_premises = sy_premises;
      spec.levels_per_premise = {{2, plaus::Scale::MNLI3},
                                 {1, plaus::Scale::MNLI3},
                                 {0, plaus::Scale::MNLI3}};
      spec.vocab_size = sy_vocab;
      spec.tokens_per_text = sy_tokens;
      if (sy_mode == "adversarial")
        spec.mode = plaus::SynthMode::ADVERSARIAL_NEUTRAL;
      else if (sy_mode != "separable") {
        std::cerr << "synth: unknown mode '" << sy_mode << "'\n";
        return 1;
      }
      auto pairs = plaus::generate_synthetic_corpus(spec, sy_seed);
      plaus::write_file_atomic(sy_out, plaus::serialize_nli_records(pairs));
      manifest.config = {{"mode", sy_mode},
                         {"premises", sy_premises},
                         {"vocab_size", sy_vocab},
                         {"tokens_per_text", sy_tokens},
                         {"seed", sy_seed}};
      manifest.outputs = {sy_out};
      manifest.write(sy_out + ".manifest.json");
      std::cout << "pairs: " << pairs.size() << "\n";
      return 0;
    }
    if (train->parsed()) {
      manifest.subcommand = "train";
      return run_train(train, tf, manifest);
    }
    if (eval->parsed()) {
      manifest.subcommand = "eval";
      return run_eval(ev_ckpt, ev_triplets, ev_out, manifest);
    }
    if (analyze->parsed()) {
      manifest.subcommand = "analyze";
      manifest.config = {{"bins", an_bins}, {"svg", an_svg}};
      return run_analyze(an_ckpt, an_sets, an_bins, an_out_dir, an_svg, manifest);
    }
    if (crossval->parsed()) {
      manifest.subcommand = "crossval";
      return run_crossval(cv_triplets, cv_k, cv_grid, crossval, cvf, manifest);
    }
    if (gradcheck->parsed()) return run_gradcheck(gc_seed, gc_eps, gc_threshold);
  } catch (const plaus::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
