#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "seqcls/training.hpp"
#include "test_support.hpp"

using namespace seqcls;
using seqcls::testing::random_tensor;

namespace {

Dataset tiny_dataset(std::uint64_t seed = 3) {
  Dataset ds = synth_generate(12, 96, 5000.0, seed);
  ds.split = split_dataset(ds.size(), {}, seed + 1);
  return ds;
}

WaveNetConfig tiny_wavenet() {
  WaveNetConfig c;
  c.filters = 4;
  c.dilations = {1, 2, 4};
  c.input_length = 96;
  return c;
}

TCNConfig tiny_tcn() {
  TCNConfig c;
  c.filters = 4;
  c.dilations = {1, 2, 4};
  c.input_length = 96;
  return c;
}

TrainConfig quick(Architecture arch, std::size_t epochs) {
  TrainConfig c = TrainConfig::defaults_for(arch);
  c.micro_batch = 8;
  c.max_epochs = epochs;
  c.snapshot_every = 2;
  return c;
}

}  // namespace

TEST_CASE("composite score worked example") {
  const CompositeInputs in{0.90, 0.92, 0.95, 0.96, 0.30, 0.35, 0.93};
  const double score = composite_score(in);
  CHECK(std::abs(score - 1.1527527) < 1e-6);
  CHECK(std::abs(update_dropout(0.20, score) - 0.2576376) < 1e-6);
}

TEST_CASE("controller limit cases") {
  const CompositeInputs stalled{0.8, 0.8, 0.9, 0.9, 0.4, 0.4, 0.85};
  CHECK(composite_score(stalled) == std::numeric_limits<double>::infinity());
  CHECK(update_dropout(0.20, composite_score(stalled)) == doctest::Approx(0.30));
  CHECK(update_dropout(0.20, -5.0) == doctest::Approx(0.10));
  CHECK(update_dropout(0.48, 2.0) == 0.50);
  CHECK(update_dropout(0.06, -2.0) == 0.05);
  CHECK(update_dropout(0.3, std::nan("")) == 0.3);

  // Zero training accuracy is floored instead of dividing by zero.
  CHECK(std::isfinite(composite_score({0.5, 0.4, 0.5, 0.5, 1.0, 1.0, 0.0})));
}

TEST_CASE("composite score is increasing in accuracy drop and loss rise") {
  const double val = 0.7;
  double prev_score = -std::numeric_limits<double>::infinity();
  for (double prev_acc = 0.0; prev_acc <= 1.0; prev_acc += 0.02) {
    if (std::abs(prev_acc - val) < 0.01) continue;
    if (prev_acc > val && prev_score == -std::numeric_limits<double>::infinity()) prev_score = -1e9;
    const double s = composite_score({prev_acc, val, 0.9, 0.9, 0.5, 0.5, 0.8});
    if (prev_acc > val + 0.01) CHECK(s > prev_score);
    if (prev_acc > val) prev_score = s;
  }
  double last = -std::numeric_limits<double>::infinity();
  for (double loss = 0.0; loss < 3.0; loss += 0.05) {
    const double s = composite_score({0.5, 0.7, 0.9, 0.9, loss, 0.5, 0.8});
    CHECK(s > last);
    last = s;
  }
}

TEST_CASE("dropout rate stays clamped under fuzzed metric sequences") {
  Rng rng(1);
  for (int seq = 0; seq < 200; ++seq) {
    double rate = 0.2, prev_acc = uniform01(rng), prev_auc = uniform01(rng), prev_loss = uniform(rng, 0, 3);
    for (int epoch = 0; epoch < 50; ++epoch) {
      const double acc = uniform01(rng) < 0.2 ? prev_acc : uniform01(rng);
      const CompositeInputs in{prev_acc, acc, prev_auc, uniform01(rng), uniform(rng, 0, 3), prev_loss, uniform01(rng)};
      rate = update_dropout(rate, composite_score(in));
      REQUIRE(rate >= 0.05);
      REQUIRE(rate <= 0.50);
      prev_acc = acc;
      prev_auc = in.auc;
      prev_loss = in.val_loss;
    }
  }
}

TEST_CASE("train config presets and validation") {
  const auto w = TrainConfig::wavenet_defaults();
  CHECK(w.micro_batch * w.accumulation == 64);
  CHECK_FALSE(w.early_stop.enabled);
  CHECK(w.max_epochs == 10);
  const auto t = TrainConfig::tcn_defaults();
  CHECK(t.micro_batch == 16);
  CHECK(t.accumulation == 1);
  CHECK(t.early_stop.enabled);
  CHECK(t.early_stop.patience == 3);
  TrainConfig bad = w;
  bad.micro_batch = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("gradient accumulation equals one large batch on a linear probe") {
  Rng rng(2);
  const ConvSpec spec{1, 4, 1, 1, true, false};
  const auto w = random_tensor<double>(spec.weight_shape(), rng);
  const auto b = random_tensor<double>({4}, rng);
  const auto x = random_tensor<double>({64, 10, 1}, rng);
  std::vector<int> labels(64);
  for (std::size_t i = 0; i < 64; ++i) labels[i] = static_cast<int>(rng() % 4);
  FocalLossConfig focal;
  focal.alpha = {1.0, 1.5, 0.5, 2.0};

  auto grads = [&](std::size_t start, std::size_t n) {
    Tensor<double> part({n, 10, 1});
    std::copy_n(x.data().begin() + static_cast<std::ptrdiff_t>(start * 10), n * 10, part.data().begin());
    Tape<double> tape;
    Var wv = tape.parameter(w), bv = tape.parameter(b);
    Var logits = ops::global_average_pool(tape, ops::conv1d(tape, tape.constant(part), wv, bv, spec));
    const std::span<const int> ys(labels.data() + start, n);
    tape.backward(ops::focal_loss(tape, ops::softmax(tape, logits), ys, focal));
    return GradientMap<double>{{"w", tape.grad(wv)}, {"b", tape.grad(bv)}};
  };
  const std::vector<GradientMap<double>> micro{grads(0, 32), grads(32, 32)};
  const auto accumulated = accumulate_gradients<double>(micro);
  const auto whole = grads(0, 64);
  for (const auto& [name, g] : whole)
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(accumulated.at(name)[i] - g[i]) < 1e-12);
}

TEST_CASE("training is deterministic and records consistent epochs") {
  const Dataset ds = tiny_dataset();
  auto run = [&] {
    Rng rng(5);
    return train(build_wavenet(tiny_wavenet(), rng), ds, quick(Architecture::wavenet, 4));
  };
  const TrainResult a = run(), b = run();
  REQUIRE(a.epochs.size() == 4);
  CHECK(a.epochs == b.epochs);
  CHECK(a.snapshots == b.snapshots);
  CHECK(a.best.params == b.best.params);
  CHECK(a.last.params == b.last.params);

  double best = -1;
  for (const auto& r : a.epochs) {
    CHECK(r.dropout_rate_after >= 0.05);
    CHECK(r.dropout_rate_after <= 0.50);
    for (double v : {r.train_accuracy, r.val_accuracy, r.val_auc, r.macro_f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(r.val_loss >= 0.0);
    CHECK(r.checkpointed == (r.macro_f1 > best));
    best = std::max(best, r.macro_f1);
  }
  CHECK(a.best_macro_f1 == best);
  CHECK(a.epochs.front().dropout_rate_after == 0.20);
  CHECK(a.first_epoch_audit.dominance.size() == (ds.indices_of(Split::train).size() + 7) / 8);
  CHECK_FALSE(a.snapshots.empty());
  for (const auto& s : a.snapshots) CHECK(s.batch % 2 == 0);

  const std::string line = format_epoch_record(a.epochs.front());
  CHECK(line.rfind("epoch=1 ", 0) == 0);
  CHECK(format_snapshot(a.snapshots.front()).rfind("snapshot ", 0) == 0);
}

TEST_CASE("tcn early stopping respects patience") {
  const Dataset ds = tiny_dataset(8);
  Rng rng(6);
  auto cfg = quick(Architecture::tcn, 10);
  cfg.learning_rate = 1e-5;  // slow learning makes AUC stall early
  const TrainResult r = train(build_tcn(tiny_tcn(), rng), ds, cfg);
  std::size_t last_improvement = 0;
  double best = -1;
  for (const auto& e : r.epochs)
    if (e.val_auc > best) {
      best = e.val_auc;
      last_improvement = e.epoch;
    }
  const std::size_t stopped = r.epochs.back().epoch;
  CHECK(stopped <= last_improvement + 3);
  if (r.early_stopped) CHECK(stopped == last_improvement + 3);
  for (const auto& e : r.epochs) CHECK(e.dropout_rate_after == 0.005);
}

TEST_CASE("training rejects unusable inputs") {
  Rng rng(7);
  auto model = build_wavenet(tiny_wavenet(), rng);
  Dataset unsplit = synth_generate(4, 96, 5000.0, 1);
  CHECK_THROWS_AS(train(model, unsplit, quick(Architecture::wavenet, 1)), ConfigError);
  CHECK_THROWS_AS(train(model, tiny_dataset(), quick(Architecture::tcn, 1)), ConfigError);
  Dataset no_val = tiny_dataset();
  for (auto& s : no_val.split->of_sample)
    if (s == Split::val) s = Split::train;
  CHECK_THROWS_AS(train(model, no_val, quick(Architecture::wavenet, 1)), ConfigError);
}

TEST_CASE("checkpoint round trip") {
  Rng rng(9);
  for (const ModelConfig& cfg : {ModelConfig{WaveNetConfig{}}, ModelConfig{tiny_tcn()}}) {
    const auto model = build_model(cfg, rng);
    std::stringstream buf;
    save_checkpoint(model, buf, {0.875, 3, 0.25});
    const auto loaded = load_checkpoint(buf);
    CHECK(loaded.model.params == model.params);
    CHECK(loaded.model.config == model.config);
    CHECK(loaded.model.architecture == model.architecture);
    CHECK(loaded.parameter_count == expected_parameter_count(cfg));
    CHECK(loaded.info == CheckpointInfo{0.875, 3, 0.25});
    const auto x = random_tensor<float>({2, 300, 1}, rng);
    CHECK(forward(loaded.model, x) == forward(model, x));
  }
  std::stringstream buf;
  save_checkpoint(build_wavenet(WaveNetConfig{}, rng), buf);
  CHECK(buf.str().find("\"parameter_count\":22980") != std::string::npos);
}

TEST_CASE("checkpoint corruption is a format error") {
  Rng rng(10);
  const auto model = build_tcn(tiny_tcn(), rng);
  std::stringstream buf;
  save_checkpoint(model, buf);
  const std::string good = buf.str();
  auto load = [](const std::string& s) {
    std::stringstream in(s);
    return load_checkpoint(in);
  };
  std::string bad_magic = good;
  bad_magic[1] = 'X';
  CHECK_THROWS_AS(load(bad_magic), FormatError);
  std::string bad_version = good;
  bad_version[4] = 7;
  CHECK_THROWS_AS(load(bad_version), FormatError);
  CHECK_THROWS_AS(load(good.substr(0, good.size() - 5)), FormatError);
  CHECK_THROWS_AS(load(good.substr(0, 12)), FormatError);

  std::string bad_count = good;
  const auto pos = bad_count.find("\"parameter_count\":");
  REQUIRE(pos != std::string::npos);
  bad_count[pos + 18] = bad_count[pos + 18] == '9' ? '8' : '9';
  CHECK_THROWS_AS(load(bad_count), FormatError);
}
