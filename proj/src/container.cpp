#include <fstream>

#include "binary_io.hpp"
#include "seqcls/data.hpp"

namespace seqcls {

namespace {

// Optional trailing section written by `split`: tag, u64 seed, u8 per sample.
constexpr char kSplitTag[4] = {'S', 'P', 'L', 'T'};

}  // namespace

void container_write(const Dataset& ds, std::ostream& out) {
  ds.validate();
  if (ds.seq_len > 0xFFFFFFFFu) throw FormatError("sequence length exceeds u32");
  if (ds.class_names.size() > 0xFFFF) throw FormatError("too many classes");
  out.write(kContainerMagic.data(), 4);
  binio::put_le(out, kContainerVersion);
  binio::put_le(out, static_cast<std::uint64_t>(ds.samples.size()));
  binio::put_le(out, static_cast<std::uint32_t>(ds.seq_len));
  binio::put_le(out, static_cast<std::uint16_t>(ds.class_names.size()));
  for (const auto& name : ds.class_names) binio::put_str16(out, name);
  for (const auto& s : ds.samples) binio::put_str16(out, s.key);
  for (const auto& s : ds.samples) out.put(static_cast<char>(static_cast<std::uint8_t>(s.label)));
  for (const auto& s : ds.samples) binio::put_floats(out, s.signal);
  if (ds.split) {
    out.write(kSplitTag, 4);
    binio::put_le(out, ds.split->seed);
    for (Split sp : ds.split->of_sample) out.put(static_cast<char>(sp));
  }
  if (!out) throw FormatError("container: write failed");
}

void container_write(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("container: cannot open '" + path.string() + "' for writing");
  container_write(ds, out);
}

Dataset container_read(std::istream& in) {
  binio::Reader r(in, "container");
  char magic[4];
  r.bytes(magic, 4);
  if (!std::equal(magic, magic + 4, kContainerMagic.begin())) throw FormatError("container: bad magic bytes");
  const auto version = r.le<std::uint16_t>();
  if (version != kContainerVersion)
    throw FormatError("container: unsupported version " + std::to_string(version));
  const auto n = r.le<std::uint64_t>();
  const auto seq_len = r.le<std::uint32_t>();
  const auto classes = r.le<std::uint16_t>();

  Dataset ds;
  ds.seq_len = seq_len;
  for (std::uint16_t c = 0; c < classes; ++c) ds.class_names.push_back(r.str16());
  // Grow incrementally so a corrupt count cannot trigger a huge allocation.
  for (std::uint64_t i = 0; i < n; ++i) {
    Sample s;
    s.key = r.str16();
    ds.samples.push_back(std::move(s));
  }
  for (auto& s : ds.samples) {
    s.label = static_cast<std::uint8_t>(r.le<std::uint8_t>());
    if (static_cast<std::size_t>(s.label) >= classes)
      throw FormatError("container: label " + std::to_string(s.label) + " out of range");
  }
  for (auto& s : ds.samples) r.floats(s.signal, seq_len);

  if (!r.at_eof()) {
    char tag[4];
    r.bytes(tag, 4);
    if (!std::equal(tag, tag + 4, kSplitTag)) throw FormatError("container: unknown trailing section");
    SplitAssignment a;
    a.seed = r.le<std::uint64_t>();
    a.of_sample.reserve(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
      const auto v = r.le<std::uint8_t>();
      if (v > 2) throw FormatError("container: bad split code " + std::to_string(v));
      a.of_sample.push_back(static_cast<Split>(v));
    }
    if (!r.at_eof()) throw FormatError("container: trailing bytes after split section");
    ds.split = std::move(a);
  }
  try {
    ds.validate();
  } catch (const InputError& e) {
    throw FormatError(std::string("container: ") + e.what());
  }
  return ds;
}

Dataset container_read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("container: cannot open '" + path.string() + "'");
  return container_read(in);
}

}  // namespace seqcls
