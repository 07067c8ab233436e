// seqcls: synthesize, ingest, split, train and evaluate EEG segment classifiers.
//
// Exit codes: 0 success, 2 usage/config/format error, 3 numerical abort.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "seqcls/config.hpp"
#include "seqcls/data.hpp"
#include "seqcls/errors.hpp"
#include "seqcls/metrics.hpp"
#include "seqcls/training.hpp"

namespace fs = std::filesystem;
using namespace seqcls;

namespace {

constexpr int kUsageError = 2;
constexpr int kNumericalAbort = 3;

void print_counts(const Dataset& ds) {
  std::vector<std::size_t> all(ds.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto counts = ds.class_counts(all);
  for (std::size_t c = 0; c < counts.size(); ++c) std::printf("%-14s %zu\n", ds.class_names[c].c_str(), counts[c]);
  std::printf("%-14s %zu\n", "total", ds.size());
}

SplitFractions parse_fractions(const std::vector<double>& v) {
  if (v.size() != 3) throw ConfigError("--fractions takes three values: train,val,test");
  return {v[0], v[1], v[2]};
}

void check_fractions(const SplitFractions& f) {
  for (double v : {f.train, f.val, f.test})
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("split fractions must lie in [0, 1]");
  if (std::abs(f.train + f.val + f.test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

void print_split_counts(const Dataset& ds) {
  for (Split s : {Split::train, Split::val, Split::test})
    std::printf("%-6s %zu\n", to_string(s).c_str(), ds.indices_of(s).size());
}

// --- synth -------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  std::size_t per_class = 500, length = 1500;
  double rate = 5000.0;
  std::uint64_t seed = 7;
};

int run_synth(const SynthArgs& a) {
  const Dataset ds = synth_generate(a.per_class, a.length, a.rate, a.seed);
  container_write(ds, fs::path(a.out));
  print_counts(ds);
  return 0;
}

// --- ingest ------------------------------------------------------------------

struct IngestArgs {
  std::string in, out;
  std::vector<std::string> classes = default_class_names();
};

int run_ingest(const IngestArgs& a) {
  std::ifstream in(a.in);
  if (!in) throw InputError("cannot open " + a.in);
  const Dataset ds = read_text_dataset(in, a.classes);
  container_write(ds, fs::path(a.out));
  print_counts(ds);
  return 0;
}

// --- split -------------------------------------------------------------------

struct SplitArgs {
  std::string data, out;
  std::uint64_t seed = 1;
  std::vector<double> fractions{0.7, 0.2, 0.1};
};

int run_split(const SplitArgs& a) {
  const SplitFractions f = parse_fractions(a.fractions);
  check_fractions(f);
  Dataset ds = container_read(fs::path(a.data));
  ds.split = split_dataset(ds.size(), f, a.seed);
  container_write(ds, fs::path(a.out.empty() ? a.data : a.out));
  print_split_counts(ds);
  return 0;
}

// --- train -------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out, model;
  std::size_t epochs = 0, micro_batch = 0, accumulation = 0;
  double learning_rate = 0;
  std::uint64_t seed_data = 0, seed_init = 0, seed_dropout = 0;
};

RunConfig resolve_run_config(const TrainArgs& a, const CLI::App& cmd) {
  std::string text = "{}";
  if (!a.config.empty()) {
    std::ifstream in(a.config);
    if (!in) throw ConfigError("config: cannot open " + a.config);
    std::stringstream buf;
    buf << in.rdbuf();
    text = buf.str();
  }
  RunConfig rc = parse_run_config(text);
  if (cmd.count("--model") && architecture_from_string(a.model) != architecture_of(rc.model)) {
    // Switching architecture switches the training presets too.
    auto j = nlohmann::json::parse(text);
    j["model"] = a.model;
    rc = parse_run_config(j.dump());
  }
  if (cmd.count("--epochs")) rc.train.max_epochs = a.epochs;
  if (cmd.count("--micro-batch")) rc.train.micro_batch = a.micro_batch;
  if (cmd.count("--accumulation")) rc.train.accumulation = a.accumulation;
  if (cmd.count("--lr")) rc.train.learning_rate = a.learning_rate;
  if (cmd.count("--seed-data")) rc.train.seeds.data = a.seed_data;
  if (cmd.count("--seed-init")) rc.train.seeds.init = a.seed_init;
  if (cmd.count("--seed-dropout")) rc.train.seeds.dropout = a.seed_dropout;
  if (cmd.count("--data")) rc.data_path = a.data;
  if (cmd.count("--out")) rc.output_dir = a.out;
  rc.train.validate();
  if (!rc.data_path) throw ConfigError("no dataset: pass --data or set data.path in the config");
  if (!rc.output_dir) throw ConfigError("no output directory: pass --out or set output_dir in the config");
  return rc;
}

std::string audit_text(const BatchAuditReport& r) {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof line, "batches %zu\nthreshold %.2f\nover_threshold_fraction %.6f\n", r.dominance.size(),
                r.threshold, r.fraction_over_threshold);
  os << line;
  std::snprintf(line, sizeof line, "first_%zu_dominance_min %.6f\nfirst_%zu_dominance_max %.6f\n", r.first_k,
                r.first_k_min, r.first_k, r.first_k_max);
  os << line;
  for (std::size_t b = 0; b < r.dominance.size(); ++b) {
    std::snprintf(line, sizeof line, "batch %zu dominance %.6f\n", b + 1, r.dominance[b]);
    os << line;
  }
  return os.str();
}

int run_train(const TrainArgs& a, const CLI::App& cmd) {
  RunConfig rc = resolve_run_config(a, cmd);
  Dataset ds = container_read(*rc.data_path);
  if (!ds.split) {
    check_fractions(rc.fractions);
    ds.split = split_dataset(ds.size(), rc.fractions, rc.train.seeds.data);
    std::printf("container has no split; using a %.2f/%.2f/%.2f split with the data seed\n", rc.fractions.train,
                rc.fractions.val, rc.fractions.test);
  }

  std::visit(
      [&](auto& m) {
        if (!rc.input_length_set) {
          m.input_length = ds.seq_len;
        } else if (m.input_length != ds.seq_len) {
          throw ConfigError("config: input_length " + std::to_string(m.input_length) +
                            " does not match the dataset's segment length " + std::to_string(ds.seq_len));
        }
        if (m.num_classes != ds.num_classes())
          throw ConfigError("config: num_classes " + std::to_string(m.num_classes) + " but the dataset has " +
                            std::to_string(ds.num_classes()));
      },
      rc.model);

  const fs::path out = *rc.output_dir;
  fs::create_directories(out);
  std::ofstream log(out / "train.log"), snaps(out / "snapshots.log");
  if (!log || !snaps) throw ConfigError("cannot write to " + out.string());

  Rng rng(rc.train.seeds.init);
  const auto model = build_model(rc.model, rng);
  std::printf("%s, %zu parameters, receptive field %zu\n", to_string(model.architecture).c_str(),
              model.parameter_count(), receptive_field(rc.model));

  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& r) {
    const std::string line = format_epoch_record(r);
    log << line << '\n' << std::flush;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
  };
  cb.on_snapshot = [&](const BatchSnapshot& s) { snaps << format_snapshot(s) << '\n'; };

  const TrainResult res = train(model, ds, rc.train, cb);
  std::ofstream(out / "audit.txt") << audit_text(res.first_epoch_audit);
  const EpochRecord& best = res.epochs.at(res.best_epoch - 1);
  save_checkpoint(res.best, out / "best.ckpt", {best.macro_f1, best.epoch, best.dropout_rate_after});
  if (res.early_stopped) std::printf("early stop after epoch %zu\n", res.epochs.back().epoch);
  std::printf("best epoch %zu, macro F1 %.4f -> %s\n", res.best_epoch, res.best_macro_f1,
              (out / "best.ckpt").string().c_str());
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint, data, split = "test", format = "table", model;
};

int run_eval(const EvalArgs& a, const CLI::App& cmd) {
  const ReportFormat format = report_format_from_string(a.format);
  const LoadedCheckpoint ck = load_checkpoint(fs::path(a.checkpoint));
  if (cmd.count("--model") && architecture_from_string(a.model) != ck.model.architecture)
    throw ConfigError("checkpoint holds a " + to_string(ck.model.architecture) + " model, not " + a.model);
  const Dataset ds = container_read(fs::path(a.data));
  if (num_classes_of(ck.model.config) != ds.num_classes())
    throw ConfigError("checkpoint predicts " + std::to_string(num_classes_of(ck.model.config)) +
                      " classes but the dataset has " + std::to_string(ds.num_classes()));

  std::vector<std::size_t> idx;
  if (a.split == "all") {
    idx.resize(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  } else {
    const Split which = split_from_string(a.split);
    if (!ds.split) throw ConfigError("--split " + a.split + " requested but the container has no split metadata");
    idx = ds.indices_of(which);
  }
  if (idx.empty()) throw InputError("the selected split is empty");

  std::vector<int> labels;
  labels.reserve(idx.size());
  for (auto i : idx) labels.push_back(ds.samples[i].label);
  const Tensor<double> probs = predict_probs(ck.model, ds, idx);
  ConfusionMatrix cm;
  const MetricsReport report = evaluate_predictions(probs, labels, ds.class_names, &cm);
  if (format == ReportFormat::structured) {
    std::printf("%s\n", emit_confusion_structured(cm).c_str());
  } else {
    std::printf("%s\n", render_confusion(cm, ds.class_names).c_str());
  }
  std::printf("%s", emit_report(report, format).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EEG segment classification with dilated causal convolutions"};
  app.require_subcommand(1);

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "write a synthetic 4-class dataset container");
  synth->add_option("--out", sa.out, "output container")->required();
  synth->add_option("--per-class", sa.per_class, "segments per class")->capture_default_str();
  synth->add_option("--length", sa.length, "samples per segment")->capture_default_str();
  synth->add_option("--rate", sa.rate, "sample rate in Hz")->capture_default_str();
  synth->add_option("--seed", sa.seed)->capture_default_str();

  IngestArgs ia;
  auto* ingest = app.add_subcommand("ingest", "convert labelled text records into a container");
  ingest->add_option("--in", ia.in, "text file, one `label,v1,v2,...` record per line")->required();
  ingest->add_option("--out", ia.out, "output container")->required();
  ingest->add_option("--classes", ia.classes, "class names in label order")->delimiter(',');

  SplitArgs spa;
  auto* split = app.add_subcommand("split", "assign train/val/test splits");
  split->add_option("--data", spa.data, "container to annotate")->required();
  split->add_option("--out", spa.out, "write here instead of rewriting --data");
  split->add_option("--seed", spa.seed)->capture_default_str();
  split->add_option("--fractions", spa.fractions, "train,val,test")->delimiter(',')->expected(3);

  TrainArgs ta;
  auto* trainc = app.add_subcommand("train", "train a model; writes best.ckpt, train.log and audit.txt");
  trainc->add_option("--config", ta.config, "JSON run configuration");
  trainc->add_option("--data", ta.data, "dataset container");
  trainc->add_option("--out", ta.out, "output directory");
  trainc->add_option("--model", ta.model, "wavenet or tcn");
  trainc->add_option("--epochs", ta.epochs);
  trainc->add_option("--micro-batch", ta.micro_batch);
  trainc->add_option("--accumulation", ta.accumulation);
  trainc->add_option("--lr", ta.learning_rate);
  trainc->add_option("--seed-data", ta.seed_data);
  trainc->add_option("--seed-init", ta.seed_init);
  trainc->add_option("--seed-dropout", ta.seed_dropout);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "confusion matrix and per-class metrics for a checkpoint");
  eval->add_option("--checkpoint", ea.checkpoint)->required();
  eval->add_option("--data", ea.data)->required();
  eval->add_option("--split", ea.split, "train, val, test or all")->capture_default_str();
  eval->add_option("--format", ea.format, "table or structured")->capture_default_str();
  eval->add_option("--model", ea.model, "expected architecture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  try {
    if (*synth) return run_synth(sa);
    if (*ingest) return run_ingest(ia);
    if (*split) return run_split(spa);
    if (*trainc) return run_train(ta, *trainc);
    if (*eval) return run_eval(ea, *eval);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return kNumericalAbort;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kUsageError;
}
