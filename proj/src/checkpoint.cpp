#include <fstream>

#include "binary_io.hpp"
#include "json.hpp"
#include "seqcls/config.hpp"
#include "seqcls/training.hpp"

namespace seqcls {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'S', 'E', 'Q', 'C'};

}  // namespace

void save_checkpoint(const ModelState<float>& model, std::ostream& out, const CheckpointInfo& info) {
  json meta = {{"architecture", to_string(model.architecture)},
               {"config", model_config_to_json(model.config)},
               {"parameter_count", model.parameter_count()}};
  json training = json::object();
  if (info.macro_f1) training["macro_f1"] = *info.macro_f1;
  if (info.epoch) training["epoch"] = *info.epoch;
  if (info.dropout_rate) training["dropout_rate"] = *info.dropout_rate;
  meta["training"] = std::move(training);
  const std::string text = meta.dump();

  out.write(kMagic, 4);
  binio::put_le(out, kCheckpointVersion);
  binio::put_le(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, p] : model.params) {
    binio::put_str16(out, name);
    if (p.rank() > 0xFF) throw FormatError("checkpoint: tensor rank too large");
    binio::put_le(out, static_cast<std::uint8_t>(p.rank()));
    for (auto d : p.shape()) binio::put_le(out, static_cast<std::uint32_t>(d));
    binio::put_floats(out, p.vec());
  }
  if (!out) throw FormatError("checkpoint: write failed");
}

void save_checkpoint(const ModelState<float>& model, const std::filesystem::path& path, const CheckpointInfo& info) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("checkpoint: cannot open '" + path.string() + "' for writing");
  save_checkpoint(model, out, info);
}

LoadedCheckpoint load_checkpoint(std::istream& in) {
  binio::Reader r(in, "checkpoint");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kMagic)) throw FormatError("checkpoint: bad magic bytes");
  const auto version = r.le<std::uint16_t>();
  if (version != kCheckpointVersion) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  const auto meta_len = r.le<std::uint32_t>();
  const std::string text = r.str(meta_len);

  LoadedCheckpoint loaded;
  try {
    const json meta = json::parse(text);
    const Architecture arch = architecture_from_string(meta.at("architecture").get<std::string>());
    loaded.model.architecture = arch;
    loaded.model.config = model_config_from_json(meta.at("config"), arch);
    loaded.parameter_count = meta.at("parameter_count").get<std::size_t>();
    const json& tr = meta.at("training");
    if (tr.contains("macro_f1")) loaded.info.macro_f1 = tr.at("macro_f1").get<double>();
    if (tr.contains("epoch")) loaded.info.epoch = tr.at("epoch").get<std::size_t>();
    if (tr.contains("dropout_rate")) loaded.info.dropout_rate = tr.at("dropout_rate").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: bad metadata: ") + e.what());
  }

  while (!r.at_eof()) {
    std::string name = r.str16();
    const auto rank = r.le<std::uint8_t>();
    Shape shape(rank);
    for (auto& d : shape) {
      d = r.le<std::uint32_t>();
      if (d == 0) throw FormatError("checkpoint: zero dimension in '" + name + "'");
    }
    std::vector<float> values;
    r.floats(values, shape_size(shape));
    if (!loaded.model.params.emplace(name, Tensor<float>(std::move(shape), std::move(values))).second)
      throw FormatError("checkpoint: duplicate parameter '" + name + "'");
  }

  const std::size_t expected = expected_parameter_count(loaded.model.config);
  if (loaded.parameter_count != expected || loaded.model.parameter_count() != expected)
    throw FormatError("checkpoint: parameter count mismatch (metadata " + std::to_string(loaded.parameter_count) +
                      ", tensors " + std::to_string(loaded.model.parameter_count()) + ", config implies " +
                      std::to_string(expected) + ")");
  Rng rng(0);
  const ModelState<float> reference = build_model(loaded.model.config, rng);
  for (const auto& [name, p] : reference.params) {
    auto it = loaded.model.params.find(name);
    if (it == loaded.model.params.end() || it->second.shape() != p.shape())
      throw FormatError("checkpoint: parameter '" + name + "' missing or misshapen");
  }
  return loaded;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("checkpoint: cannot open '" + path.string() + "'");
  return load_checkpoint(in);
}

}  // namespace seqcls
