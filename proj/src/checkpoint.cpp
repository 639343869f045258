#include "mtqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace mtqa {
namespace {

constexpr char kMagic[8] = {'M', 'T', 'Q', 'A', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void i32(std::int32_t v) { le(static_cast<std::uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void str(const std::string& s) {
    u64(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out_.write(buf, bytes);
  }
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, std::string path) : in_(in), path_(std::move(path)) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(le(4))); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string str() {
    const auto n = u64();
    if (n > (1u << 30)) fail("string length out of range");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_) fail("truncated file");
    return s;
  }
  [[noreturn]] void fail(const std::string& what) { throw ParseError(path_ + ": corrupt checkpoint: " + what); }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), bytes);
    if (!in_) fail("truncated file");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::ifstream& in_;
  std::string path_;
};

}  // namespace

const ModelParams& Checkpoint::group(const std::string& name) const {
  auto it = groups.find(name);
  if (it == groups.end()) throw DataError("checkpoint has no parameter group '" + name + "'");
  return it->second;
}

ArchSpec Checkpoint::arch() const {
  if (!metadata.contains("arch") || !metadata["arch"].is_string()) throw DataError("checkpoint metadata lacks 'arch'");
  return ArchSpec::from_id(metadata["arch"].get<std::string>());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(ckpt.metadata.dump());
  w.u32(static_cast<std::uint32_t>(ckpt.groups.size()));
  for (const auto& [name, params] : ckpt.groups) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(params.arrays().size()));
    for (const auto& a : params.arrays()) {
      w.str(a.name);
      w.u32(static_cast<std::uint32_t>(a.shape.size()));
      for (int d : a.shape) w.i32(d);
      w.u64(a.values.size());
      for (double v : a.values) w.f64(v);
    }
  }
  if (!out) throw IoError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  Reader r(in, path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) r.fail("bad magic");
  const auto version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported format version " + std::to_string(version));
  Checkpoint ckpt;
  try {
    ckpt.metadata = nlohmann::json::parse(r.str());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("metadata is not JSON: ") + e.what());
  }
  const auto n_groups = r.u32();
  for (std::uint32_t g = 0; g < n_groups; ++g) {
    const std::string name = r.str();
    const auto n_arrays = r.u32();
    std::vector<ParamArray> arrays;
    for (std::uint32_t i = 0; i < n_arrays; ++i) {
      ParamArray a;
      a.name = r.str();
      const auto rank = r.u32();
      if (rank > 8) r.fail("rank out of range");
      std::uint64_t expect = 1;
      for (std::uint32_t d = 0; d < rank; ++d) {
        a.shape.push_back(r.i32());
        if (a.shape.back() < 0) r.fail("negative dimension");
        expect *= static_cast<std::uint64_t>(a.shape.back());
      }
      const auto count = r.u64();
      if (count != expect) r.fail("element count does not match shape of " + a.name);
      a.values.resize(count);
      for (auto& v : a.values) v = r.f64();
      arrays.push_back(std::move(a));
    }
    ckpt.groups.emplace(name, ModelParams(std::move(arrays)));
  }
  return ckpt;
}

}  // namespace mtqa
