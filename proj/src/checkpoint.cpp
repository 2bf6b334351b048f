#include "fgfm/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include "fgfm/errors.hpp"

namespace fgfm {

namespace {

constexpr char kMagic[4] = {'F', 'G', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path)
      : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open checkpoint for writing: " + path);
  }
  void bytes(const void* p, std::size_t n) {
    out_.write(static_cast<const char*>(p),
               static_cast<std::streamsize>(n));
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f64(double v) { bytes(&v, 8); }
  void close() {
    out_.flush();
    if (!out_) throw IoError("failed writing checkpoint: " + path_);
  }

 private:
  std::string path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::string& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open checkpoint: " + path);
  }
  void bytes(void* p, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n)
      throw FormatError(path_ + ": truncated reading " + what +
                        " at byte offset " + std::to_string(offset_) +
                        ": expected " + std::to_string(n) + " bytes, found " +
                        std::to_string(got));
    offset_ += n;
  }
  std::uint8_t u8(const char* what) {
    std::uint8_t v;
    bytes(&v, 1, what);
    return v;
  }
  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    bytes(&v, 4, what);
    return v;
  }
  std::uint64_t u64(const char* what) {
    std::uint64_t v;
    bytes(&v, 8, what);
    return v;
  }
  double f64(const char* what) {
    double v;
    bytes(&v, 8, what);
    return v;
  }
  std::size_t offset() const { return offset_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t offset_ = 0;
};

void write_config(Writer& w, const ModelConfig& c) {
  w.u32(static_cast<std::uint32_t>(c.encoder.embed_dim));
  w.u32(static_cast<std::uint32_t>(c.encoder.num_heads));
  w.u32(static_cast<std::uint32_t>(c.encoder.num_blocks));
  w.u8(c.encoder.block_kind == BlockKind::transformer ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(c.encoder.ffn_expansion));
  w.u32(static_cast<std::uint32_t>(c.encoder.conv_module_kernel));
  w.f64(c.encoder.dropout_rate);
  w.u32(static_cast<std::uint32_t>(c.votes));
  w.u8(c.frontend == FrontendKind::toy_conv ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(c.feature_dim));
  w.u8(c.use_fgfm ? 1 : 0);
  w.u8(c.no_daff ? 1 : 0);
  w.u8(c.no_enhancement ? 1 : 0);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(c.conv1_channels));
  w.u32(static_cast<std::uint32_t>(c.conv2_channels));
  w.u32(static_cast<std::uint32_t>(c.conv1_stride));
  w.u32(static_cast<std::uint32_t>(c.conv2_stride));
}

ModelConfig read_config(Reader& r) {
  ModelConfig c;
  c.encoder.embed_dim = r.u32("embed_dim");
  c.encoder.num_heads = r.u32("num_heads");
  c.encoder.num_blocks = r.u32("num_blocks");
  c.encoder.block_kind =
      r.u8("block_kind") == 0 ? BlockKind::transformer : BlockKind::conformer_lite;
  c.encoder.ffn_expansion = r.u32("ffn_expansion");
  c.encoder.conv_module_kernel = r.u32("conv_module_kernel");
  c.encoder.dropout_rate = r.f64("dropout_rate");
  c.votes = r.u32("votes");
  c.frontend =
      r.u8("frontend") == 0 ? FrontendKind::toy_conv : FrontendKind::feature_file;
  c.feature_dim = r.u32("feature_dim");
  c.use_fgfm = r.u8("use_fgfm") != 0;
  c.no_daff = r.u8("no_daff") != 0;
  c.no_enhancement = r.u8("no_enhancement") != 0;
  c.seed = r.u64("seed");
  c.conv1_channels = r.u32("conv1_channels");
  c.conv2_channels = r.u32("conv2_channels");
  c.conv1_stride = r.u32("conv1_stride");
  c.conv2_stride = r.u32("conv2_stride");
  return c;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParameters& params) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  write_config(w, cfg);
  for (const Tensor& t : params.all(cfg)) {
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t a = 0; a < t.rank(); ++a)
      w.u32(static_cast<std::uint32_t>(t.dim(a)));
    std::vector<float> payload(t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
      payload[i] = static_cast<float>(t.at(i));
    w.bytes(payload.data(), payload.size() * sizeof(float));
  }
  w.close();
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError(path + ": bad magic at byte offset 0");
  const std::uint32_t version = r.u32("format version");
  if (version != kVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version) + " at byte offset 4");

  Checkpoint ckpt;
  ckpt.config = read_config(r);
  try {
    validate(ckpt.config);
  } catch (const ConfigError& e) {
    throw FormatError(path + ": invalid stored config: " + e.what());
  }

  ckpt.params = init_model(ckpt.config);
  for (Tensor t : ckpt.params.all(ckpt.config)) {
    const std::size_t header_offset = r.offset();
    const std::uint32_t rank = r.u32("tensor rank");
    if (rank != t.rank())
      throw FormatError(path + ": tensor rank " + std::to_string(rank) +
                        " at byte offset " + std::to_string(header_offset) +
                        " does not match expected shape " +
                        shape_str(t.shape()));
    for (std::size_t a = 0; a < rank; ++a) {
      const std::uint32_t extent = r.u32("tensor extent");
      if (extent != t.dim(a))
        throw FormatError(path + ": tensor extent " + std::to_string(extent) +
                          " at byte offset " + std::to_string(header_offset) +
                          " does not match expected shape " +
                          shape_str(t.shape()));
    }
    std::vector<float> payload(t.size());
    r.bytes(payload.data(), payload.size() * sizeof(float), "tensor payload");
    for (std::size_t i = 0; i < payload.size(); ++i)
      t.at(i) = static_cast<double>(payload[i]);
  }
  return ckpt;
}

}  // namespace fgfm
