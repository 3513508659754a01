#include <bit>
#include <cstring>
#include <fstream>

#include "gazeauth/embedder.hpp"
#include "gazeauth/error.hpp"

namespace gazeauth {

namespace {

constexpr char kMagic[5] = {'E', 'K', 'Y', 'B', '1'};
constexpr std::uint32_t kMaxCount = 1u << 28;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out_.write(reinterpret_cast<const char*>(b), 4);
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const char* p, std::size_t n) { out_.write(p, static_cast<std::streamsize>(n)); }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, const std::filesystem::path& path) : in_(in), path_(path) {}

  std::uint32_t u32() {
    unsigned char b[4];
    read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint32_t count(const char* what) {
    const std::uint32_t n = u32();
    if (n > kMaxCount) fail(std::string("implausible ") + what);
    return n;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  void read(char* p, std::size_t n) {
    in_.read(p, static_cast<std::streamsize>(n));
    if (!in_) fail("truncated file");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("checkpoint '" + path_.string() + "': " + what);
  }

 private:
  std::istream& in_;
  std::filesystem::path path_;
};

}  // namespace

void save_checkpoint(const EmbedderParams<float>& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  Writer w(out);
  const auto& cfg = params.config;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(static_cast<std::uint32_t>(cfg.input_channels));
  w.u32(static_cast<std::uint32_t>(cfg.conv_layers));
  w.u32(static_cast<std::uint32_t>(cfg.growth));
  w.u32(static_cast<std::uint32_t>(cfg.kernel_size));
  w.u32(static_cast<std::uint32_t>(cfg.embedding_dim));
  w.u32(static_cast<std::uint32_t>(cfg.dilations.size()));
  for (int d : cfg.dilations) w.u32(static_cast<std::uint32_t>(d));
  w.u32(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data) w.f32(v);
  }
  if (!out) throw IoError("write failed for checkpoint '" + path.string() + "'");
}

EmbedderParams<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  Reader r(in, path);
  char magic[5];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("bad magic");

  EmbedderParams<float> p;
  auto& cfg = p.config;
  cfg.input_channels = static_cast<int>(r.u32());
  cfg.conv_layers = static_cast<int>(r.u32());
  cfg.growth = static_cast<int>(r.u32());
  cfg.kernel_size = static_cast<int>(r.u32());
  cfg.embedding_dim = static_cast<int>(r.u32());
  cfg.dilations.resize(r.count("dilation count"));
  for (auto& d : cfg.dilations) d = static_cast<int>(r.u32());
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    r.fail(e.what());
  }

  // The expected layout is fully determined by the config.
  const EmbedderParams<float> expected = init_params<float>(cfg, 0).zeros_like();
  const std::uint32_t n = r.count("tensor count");
  if (n != expected.tensors.size()) r.fail("unexpected tensor count");
  for (std::uint32_t i = 0; i < n; ++i) {
    Tensor<float> t;
    t.name.resize(r.count("name length"));
    r.read(t.name.data(), t.name.size());
    t.shape.resize(r.count("rank"));
    std::size_t size = 1;
    for (auto& d : t.shape) {
      d = static_cast<int>(r.u32());
      size *= static_cast<std::size_t>(d);
    }
    const auto& want = expected.tensors[i];
    if (t.name != want.name || t.shape != want.shape) {
      r.fail("tensor '" + t.name + "' does not match the config layout");
    }
    t.data.resize(size);
    for (auto& v : t.data) v = r.f32();
    p.tensors.push_back(std::move(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) r.fail("trailing bytes");
  return p;
}

}  // namespace gazeauth
