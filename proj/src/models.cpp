#include "seqcls/models.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "seqcls/normalize.hpp"

namespace seqcls {

std::string to_string(Architecture arch) { return arch == Architecture::wavenet ? "wavenet" : "tcn"; }

Architecture architecture_from_string(const std::string& tag) {
  if (tag == "wavenet") return Architecture::wavenet;
  if (tag == "tcn") return Architecture::tcn;
  throw ConfigError("unknown architecture '" + tag + "' (expected wavenet or tcn)");
}

namespace {

void validate_common(const std::vector<std::size_t>& dilations, std::size_t filters, std::size_t kernel,
                     std::size_t classes, std::size_t length) {
  if (dilations.empty()) throw ConfigError("dilation list must not be empty");
  for (auto d : dilations)
    if (d < 1) throw ConfigError("dilations must be >= 1");
  if (filters == 0) throw ConfigError("filters must be positive");
  if (kernel == 0) throw ConfigError("kernel_size must be positive");
  if (classes < 2) throw ConfigError("num_classes must be >= 2");
  if (length == 0) throw ConfigError("input_length must be positive");
}

}  // namespace

void WaveNetConfig::validate() const {
  validate_common(dilations, filters, kernel_size, num_classes, input_length);
  if (!(dropout_rate >= 0 && dropout_rate < 1)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (!(l2_lambda >= 0)) throw ConfigError("l2_lambda must be >= 0");
}

void TCNConfig::validate() const {
  validate_common(dilations, filters, kernel_size, num_classes, input_length);
  if (convs_per_block != 2) throw ConfigError("TCN blocks hold exactly two convolutions");
  if (!(block_dropout >= 0 && block_dropout < 1)) throw ConfigError("block_dropout must lie in [0, 1)");
  if (!(l2_lambda >= 0)) throw ConfigError("l2_lambda must be >= 0");
}

Architecture architecture_of(const ModelConfig& config) {
  return std::holds_alternative<WaveNetConfig>(config) ? Architecture::wavenet : Architecture::tcn;
}

std::size_t num_classes_of(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.num_classes; }, config);
}

std::size_t compute_receptive_field(std::size_t kernel_size, std::span<const std::size_t> dilations,
                                    std::size_t convs_per_level) {
  for (auto d : dilations)
    if (d < 1) throw ConfigError("dilations must be >= 1");
  const std::size_t total = std::accumulate(dilations.begin(), dilations.end(), std::size_t{0});
  return 1 + convs_per_level * (kernel_size - 1) * total;
}

std::size_t receptive_field(const ModelConfig& config) {
  if (const auto* w = std::get_if<WaveNetConfig>(&config))
    return compute_receptive_field(w->kernel_size, w->dilations, 1);
  const auto& t = std::get<TCNConfig>(config);
  return compute_receptive_field(t.kernel_size, t.dilations, t.convs_per_block);
}

std::size_t expected_parameter_count(const ModelConfig& config) {
  if (const auto* w = std::get_if<WaveNetConfig>(&config)) {
    const std::size_t f = w->filters, k = w->kernel_size, c = w->num_classes, n = w->dilations.size();
    std::size_t count = f + f;               // entry 1x1
    count += n * (f * f * k + f);            // dilated convs
    if (w->skip_projection) count += n * (f * f + f);
    count += f * f + f + c * f + c;          // head
    return count;
  }
  const auto& t = std::get<TCNConfig>(config);
  const std::size_t f = t.filters, k = t.kernel_size, c = t.num_classes;
  std::size_t count = 0;
  std::size_t in = 1;
  for (std::size_t b = 0; b < t.dilations.size(); ++b) {
    count += f * in * k + 2 * f;  // conv1: direction, gain, bias
    count += f * f * k + 2 * f;   // conv2
    if (in != f) count += f * in + f;
    count += 2 * f;               // layer norm
    in = f;
  }
  count += f * f + f + c * f + c;
  return count;
}

namespace {

Tensor<float> he_uniform(const Shape& shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape[1] * shape[2]);
  const double limit = std::sqrt(6.0 / fan_in);
  Tensor<float> w(shape);
  for (auto& v : w.data()) v = static_cast<float>(uniform(rng, -limit, limit));
  return w;
}

void add_conv(ParameterStore<float>& params, const std::string& prefix, std::size_t cin, std::size_t cout,
              std::size_t k, Rng& rng) {
  params.emplace(prefix + ".weight", he_uniform({cout, cin, k}, rng));
  params.emplace(prefix + ".bias", Tensor<float>({cout}));
}

// Direction drawn He-uniform; gain set to each filter's direction norm so
// the initial effective weight equals the direction.
void add_wn_conv(ParameterStore<float>& params, const std::string& prefix, std::size_t cin,
                 std::size_t cout, std::size_t k, Rng& rng) {
  Tensor<float> dir = he_uniform({cout, cin, k}, rng);
  Tensor<float> gain({cout});
  const std::size_t slice = cin * k;
  for (std::size_t o = 0; o < cout; ++o) {
    double sq = 0;
    for (std::size_t i = 0; i < slice; ++i) sq += double(dir[o * slice + i]) * dir[o * slice + i];
    gain[o] = static_cast<float>(std::sqrt(sq));
  }
  params.emplace(prefix + ".direction", std::move(dir));
  params.emplace(prefix + ".gain", std::move(gain));
  params.emplace(prefix + ".bias", Tensor<float>({cout}));
}

std::string block_name(std::size_t i) { return "blocks." + std::to_string(i); }

}  // namespace

ModelState<float> build_wavenet(const WaveNetConfig& config, Rng& rng) {
  config.validate();
  ModelState<float> m{Architecture::wavenet, config, {}};
  const std::size_t f = config.filters;
  add_conv(m.params, "entry", 1, f, 1, rng);
  for (std::size_t i = 0; i < config.dilations.size(); ++i) {
    add_conv(m.params, block_name(i) + ".conv", f, f, config.kernel_size, rng);
    if (config.skip_projection) add_conv(m.params, block_name(i) + ".skip", f, f, 1, rng);
  }
  add_conv(m.params, "head.conv1", f, f, 1, rng);
  add_conv(m.params, "head.conv2", f, config.num_classes, 1, rng);
  return m;
}

ModelState<float> build_tcn(const TCNConfig& config, Rng& rng) {
  config.validate();
  ModelState<float> m{Architecture::tcn, config, {}};
  const std::size_t f = config.filters;
  std::size_t in = 1;
  for (std::size_t i = 0; i < config.dilations.size(); ++i) {
    const std::string b = block_name(i);
    add_wn_conv(m.params, b + ".conv1", in, f, config.kernel_size, rng);
    add_wn_conv(m.params, b + ".conv2", f, f, config.kernel_size, rng);
    if (in != f) add_conv(m.params, b + ".proj", in, f, 1, rng);
    m.params.emplace(b + ".norm.gamma", Tensor<float>({f}, 1.0f));
    m.params.emplace(b + ".norm.beta", Tensor<float>({f}));
    in = f;
  }
  add_conv(m.params, "head.conv1", f, f, 1, rng);
  add_conv(m.params, "head.conv2", f, config.num_classes, 1, rng);
  return m;
}

ModelState<float> build_model(const ModelConfig& config, Rng& rng) {
  if (const auto* w = std::get_if<WaveNetConfig>(&config)) return build_wavenet(*w, rng);
  return build_tcn(std::get<TCNConfig>(config), rng);
}

template <typename T>
ParameterVars register_parameters(Tape<T>& tape, const ModelState<T>& model) {
  ParameterVars vars;
  for (const auto& [name, p] : model.params) vars.emplace(name, tape.parameter(p));
  return vars;
}

namespace {

Var param(const ParameterVars& params, const std::string& name) {
  auto it = params.find(name);
  if (it == params.end()) throw ConfigError("model is missing parameter '" + name + "'");
  return it->second;
}

template <typename T>
Var conv(Tape<T>& tape, const ParameterVars& params, const std::string& prefix, Var x, std::size_t cin,
         std::size_t cout, std::size_t k, std::size_t dilation) {
  ConvSpec spec{cin, cout, k, dilation, true, false};
  return ops::conv1d(tape, x, param(params, prefix + ".weight"), param(params, prefix + ".bias"), spec);
}

template <typename T>
Var wn_conv(Tape<T>& tape, const ParameterVars& params, const std::string& prefix, Var x, std::size_t cin,
            std::size_t cout, std::size_t k, std::size_t dilation) {
  ConvSpec spec{cin, cout, k, dilation, true, true};
  Var w = ops::weight_norm(tape, param(params, prefix + ".direction"), param(params, prefix + ".gain"));
  return ops::conv1d(tape, x, w, param(params, prefix + ".bias"), spec);
}

Rng& require_rng(const ForwardOptions& options, double rate) {
  static thread_local Rng unused;
  if (!options.training || rate == 0.0) return unused;
  if (!options.rng) throw ConfigError("training forward with dropout needs an rng");
  return *options.rng;
}

template <typename T>
Var wavenet_logits(Tape<T>& tape, const ParameterVars& params, const WaveNetConfig& cfg, Var x,
                   const ForwardOptions& options) {
  const std::size_t f = cfg.filters;
  Var h = conv(tape, params, "entry", x, 1, f, 1, 1);
  Var skip_sum{};
  for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
    const std::string b = block_name(i);
    Var z = ops::swish(tape, conv(tape, params, b + ".conv", h, f, f, cfg.kernel_size, cfg.dilations[i]));
    Var skip = cfg.skip_projection ? conv(tape, params, b + ".skip", z, f, f, 1, 1) : z;
    if (options.skip_outputs) options.skip_outputs->push_back(skip);
    skip_sum = i == 0 ? skip : ops::add(tape, skip_sum, skip);
    h = ops::add(tape, h, z);
  }
  Var y = ops::swish(tape, conv(tape, params, "head.conv1", skip_sum, f, f, 1, 1));
  y = ops::dropout(tape, y, options.dropout_rate, options.training, require_rng(options, options.dropout_rate));
  return conv(tape, params, "head.conv2", y, f, cfg.num_classes, 1, 1);
}

template <typename T>
Var tcn_logits(Tape<T>& tape, const ParameterVars& params, const TCNConfig& cfg, Var x,
               const ForwardOptions& options) {
  const std::size_t f = cfg.filters, k = cfg.kernel_size;
  const double rate = cfg.block_dropout;
  Rng& rng = require_rng(options, rate);
  Var h = x;
  std::size_t in = 1;
  for (std::size_t i = 0; i < cfg.dilations.size(); ++i) {
    const std::string b = block_name(i);
    const std::size_t d = cfg.dilations[i];
    Var a = ops::relu(tape, wn_conv(tape, params, b + ".conv1", h, in, f, k, d));
    a = ops::dropout(tape, a, rate, options.training, rng);
    a = ops::relu(tape, wn_conv(tape, params, b + ".conv2", a, f, f, k, d));
    a = ops::dropout(tape, a, rate, options.training, rng);
    Var res = in != f ? conv(tape, params, b + ".proj", h, in, f, 1, 1) : h;
    h = ops::layer_norm(tape, ops::add(tape, a, res), param(params, b + ".norm.gamma"),
                        param(params, b + ".norm.beta"));
    in = f;
  }
  Var y = ops::relu(tape, conv(tape, params, "head.conv1", h, f, f, 1, 1));
  return conv(tape, params, "head.conv2", y, f, cfg.num_classes, 1, 1);
}

}  // namespace

template <typename T>
Var pre_pool_logits(Tape<T>& tape, const ParameterVars& params, const ModelState<T>& model, Var normalized,
                    const ForwardOptions& options) {
  const Tensor<T>& x = tape.value(normalized);
  require_rank(x, 3, "model input");
  if (x.dim(2) != 1)
    throw ShapeError("model input must have exactly one channel, got " + std::to_string(x.dim(2)));
  if (const auto* w = std::get_if<WaveNetConfig>(&model.config))
    return wavenet_logits(tape, params, *w, normalized, options);
  return tcn_logits(tape, params, std::get<TCNConfig>(model.config), normalized, options);
}

template <typename T>
Tensor<T> normalize_batch(const Tensor<T>& batch) {
  require_rank(batch, 3, "model input");
  if (batch.dim(2) != 1)
    throw ShapeError("model input must have exactly one channel, got " + std::to_string(batch.dim(2)));
  Tensor<T> out(batch.shape());
  const std::size_t steps = batch.dim(1);
  for (std::size_t b = 0; b < batch.dim(0); ++b)
    zscore_normalize_into<T>(batch.data().subspan(b * steps, steps), out.data().subspan(b * steps, steps));
  return out;
}

template <typename T>
Var forward(Tape<T>& tape, const ParameterVars& params, const ModelState<T>& model, Var batch,
            const ForwardOptions& options) {
  Var x = tape.constant(normalize_batch(tape.value(batch)));
  Var logits = pre_pool_logits(tape, params, model, x, options);
  return ops::softmax(tape, ops::global_average_pool(tape, logits));
}

template <typename T>
Tensor<T> forward(const ModelState<T>& model, const Tensor<T>& batch, const ForwardOptions& options) {
  Tape<T> tape;
  ParameterVars params;
  for (const auto& [name, p] : model.params) params.emplace(name, tape.constant(p));
  Var out = forward(tape, params, model, tape.constant(batch), options);
  return tape.value(out);
}

#define SEQCLS_INSTANTIATE_MODELS(T)                                                                 \
  template ParameterVars register_parameters(Tape<T>&, const ModelState<T>&);                        \
  template Var pre_pool_logits(Tape<T>&, const ParameterVars&, const ModelState<T>&, Var,            \
                               const ForwardOptions&);                                               \
  template Var forward(Tape<T>&, const ParameterVars&, const ModelState<T>&, Var, const ForwardOptions&); \
  template Tensor<T> forward(const ModelState<T>&, const Tensor<T>&, const ForwardOptions&);         \
  template Tensor<T> normalize_batch(const Tensor<T>&);

SEQCLS_INSTANTIATE_MODELS(float)
SEQCLS_INSTANTIATE_MODELS(double)

#undef SEQCLS_INSTANTIATE_MODELS

}  // namespace seqcls
