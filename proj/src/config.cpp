#include "seqcls/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "seqcls/errors.hpp"

namespace seqcls {

using nlohmann::json;

namespace {

// Walks one JSON object, reading known fields and rejecting the rest.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + display() + "' must be an object");
  }

  ~Fields() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) throw ConfigError("config: unknown key '" + child(key) + "'");
  }

  template <typename V>
  bool read(const std::string& key, V& target) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return false;
    try {
      if constexpr (std::is_same_v<V, std::size_t> || std::is_same_v<V, std::uint64_t>) {
        if (!it->is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      } else if constexpr (std::is_same_v<V, double>) {
        if (!it->is_number()) throw ConfigError("expected a number");
      } else if constexpr (std::is_same_v<V, bool>) {
        if (!it->is_boolean()) throw ConfigError("expected true or false");
      } else if constexpr (std::is_same_v<V, std::string>) {
        if (!it->is_string()) throw ConfigError("expected a string");
      }
      target = it->get<V>();
    } catch (const std::exception& e) {
      throw ConfigError("config: field '" + child(key) + "': " + e.what());
    }
    return true;
  }

  const json* object(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() || it->is_null() ? nullptr : &*it;
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_dilations(Fields& f, std::vector<std::size_t>& out) {
  if (const json* d = f.object("dilations")) {
    if (!d->is_array()) throw ConfigError("config: field '" + f.child("dilations") + "': expected an array");
    std::vector<std::size_t> v;
    for (const auto& e : *d) {
      if (!e.is_number_unsigned())
        throw ConfigError("config: field '" + f.child("dilations") + "': expected non-negative integers");
      v.push_back(e.get<std::size_t>());
    }
    out = std::move(v);
  }
}

WaveNetConfig wavenet_from(const json& j, const std::string& path) {
  WaveNetConfig c;
  Fields f(j, path);
  read_dilations(f, c.dilations);
  f.read("filters", c.filters);
  f.read("kernel_size", c.kernel_size);
  f.read("num_classes", c.num_classes);
  f.read("input_length", c.input_length);
  f.read("dropout_rate", c.dropout_rate);
  f.read("l2_lambda", c.l2_lambda);
  f.read("skip_projection", c.skip_projection);
  return c;
}

TCNConfig tcn_from(const json& j, const std::string& path) {
  TCNConfig c;
  Fields f(j, path);
  read_dilations(f, c.dilations);
  f.read("filters", c.filters);
  f.read("kernel_size", c.kernel_size);
  f.read("convs_per_block", c.convs_per_block);
  f.read("block_dropout", c.block_dropout);
  f.read("num_classes", c.num_classes);
  f.read("input_length", c.input_length);
  f.read("l2_lambda", c.l2_lambda);
  return c;
}

void validated(const ModelConfig& c, const std::string& path) {
  try {
    std::visit([](const auto& cfg) { cfg.validate(); }, c);
  } catch (const ConfigError& e) {
    throw ConfigError("config: section '" + path + "': " + e.what());
  }
}

}  // namespace

json model_config_to_json(const ModelConfig& config) {
  if (const auto* w = std::get_if<WaveNetConfig>(&config)) {
    return {{"dilations", w->dilations},   {"filters", w->filters},         {"kernel_size", w->kernel_size},
            {"num_classes", w->num_classes}, {"input_length", w->input_length}, {"dropout_rate", w->dropout_rate},
            {"l2_lambda", w->l2_lambda},   {"skip_projection", w->skip_projection}};
  }
  const auto& t = std::get<TCNConfig>(config);
  return {{"dilations", t.dilations},         {"filters", t.filters},         {"kernel_size", t.kernel_size},
          {"convs_per_block", t.convs_per_block}, {"block_dropout", t.block_dropout}, {"num_classes", t.num_classes},
          {"input_length", t.input_length},   {"l2_lambda", t.l2_lambda}};
}

ModelConfig model_config_from_json(const json& j, Architecture arch) {
  const std::string path = to_string(arch);
  ModelConfig c = arch == Architecture::wavenet ? ModelConfig{wavenet_from(j, path)} : ModelConfig{tcn_from(j, path)};
  validated(c, path);
  return c;
}

RunConfig default_run_config(Architecture arch) {
  RunConfig rc;
  rc.model = arch == Architecture::wavenet ? ModelConfig{WaveNetConfig{}} : ModelConfig{TCNConfig{}};
  rc.train = TrainConfig::defaults_for(arch);
  return rc;
}

RunConfig parse_run_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  Fields top(root, "");
  std::string model_name = "wavenet";
  top.read("model", model_name);
  const Architecture arch = architecture_from_string(model_name);
  RunConfig rc = default_run_config(arch);

  const json* wn = top.object("wavenet");
  const json* tc = top.object("tcn");
  const json* own = arch == Architecture::wavenet ? wn : tc;
  if (wn) wavenet_from(*wn, "wavenet");  // type-check the inactive section as well
  if (tc) tcn_from(*tc, "tcn");
  if (own) {
    rc.model = model_config_from_json(*own, arch);
    rc.input_length_set = own->contains("input_length");
  }

  if (const json* t = top.object("training")) {
    TrainConfig& tr = rc.train;
    Fields f(*t, "training");
    f.read("micro_batch", tr.micro_batch);
    f.read("accumulation", tr.accumulation);
    f.read("max_epochs", tr.max_epochs);
    f.read("learning_rate", tr.learning_rate);
    f.read("focal_gamma", tr.focal_gamma);
    f.read("class_weighted_alpha", tr.class_weighted_alpha);
    f.read("adaptive_dropout", tr.adaptive_dropout);
    f.read("snapshot_every", tr.snapshot_every);
    f.read("tape_chunk", tr.tape_chunk);
    if (const json* es = f.object("early_stopping")) {
      Fields g(*es, "training.early_stopping");
      g.read("enabled", tr.early_stop.enabled);
      g.read("patience", tr.early_stop.patience);
    }
    if (const json* ctl = f.object("controller")) {
      DropoutControllerConfig& c = tr.controller;
      Fields g(*ctl, "training.controller");
      g.read("baseline_gap", c.baseline_gap);
      g.read("acc_weight", c.acc_weight);
      g.read("auc_weight", c.auc_weight);
      g.read("loss_weight", c.loss_weight);
      g.read("gap_weight", c.gap_weight);
      g.read("no_learn_threshold", c.no_learn_threshold);
      g.read("no_learn_else", c.no_learn_else);
      g.read("stagnation_numerator", c.stagnation_numerator);
      g.read("update_coefficient", c.update_coefficient);
      g.read("score_clamp", c.score_clamp);
      g.read("min_rate", c.min_rate);
      g.read("max_rate", c.max_rate);
    }
  }
  if (const json* s = top.object("seeds")) {
    Fields f(*s, "seeds");
    f.read("data", rc.train.seeds.data);
    f.read("init", rc.train.seeds.init);
    f.read("dropout", rc.train.seeds.dropout);
  }
  if (const json* d = top.object("data")) {
    Fields f(*d, "data");
    std::string path;
    if (f.read("path", path)) rc.data_path = path;
    if (const json* fr = f.object("fractions")) {
      if (!fr->is_array() || fr->size() != 3 || !std::all_of(fr->begin(), fr->end(), [](auto& e) { return e.is_number(); }))
        throw ConfigError("config: field 'data.fractions': expected three numbers");
      rc.fractions = {(*fr)[0].get<double>(), (*fr)[1].get<double>(), (*fr)[2].get<double>()};
    }
  }
  std::string out;
  if (top.read("output_dir", out)) rc.output_dir = out;

  try {
    rc.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: section 'training': ") + e.what());
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

}  // namespace seqcls
