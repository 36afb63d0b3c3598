#include <cstring>
#include <fstream>
#include <map>

#include "blvt/errors.hpp"
#include "blvt/nn/model.hpp"

namespace blvt::nn {

namespace {

constexpr char kMagic[8] = {'B', 'L', 'V', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_tensor(std::ofstream& out, const std::string& name, const Matrix& m) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u64(out, m.rows);
  write_u64(out, m.cols);
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

std::uint32_t read_u32(std::ifstream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, std::uint64_t seed) {
  params.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("checkpoint: cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  write_u32(out, kVersion);
  write_u64(out, seed);
  write_u32(out, 5);
  write_tensor(out, "lstm.W", params.W);
  write_tensor(out, "lstm.U", params.U);
  write_tensor(out, "lstm.b", params.b);
  write_tensor(out, "head.W", params.Wh);
  write_tensor(out, "head.b", params.bh);
  if (!out) throw ParseError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError("checkpoint: bad magic in " + path);
  const auto version = read_u32(in);
  if (version != kVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));

  Checkpoint ck;
  ck.seed = read_u64(in);
  const auto count = read_u32(in);
  std::map<std::string, Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_u32(in);
    if (!in || name_len > 256) throw ParseError("checkpoint: corrupt tensor name");
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    Matrix m;
    m.rows = read_u64(in);
    m.cols = read_u64(in);
    if (!in || m.rows > (1u << 20) || m.cols > (1u << 20))
      throw ParseError("checkpoint: corrupt tensor shape");
    m.data.resize(m.rows * m.cols);
    in.read(reinterpret_cast<char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
    if (!in) throw ParseError("checkpoint: truncated tensor data");
    tensors[name] = std::move(m);
  }

  const auto take = [&](const char* name) -> Matrix {
    const auto it = tensors.find(name);
    if (it == tensors.end())
      throw ParseError(std::string("checkpoint: missing tensor ") + name);
    return std::move(it->second);
  };
  ck.params.W = take("lstm.W");
  ck.params.U = take("lstm.U");
  ck.params.b = take("lstm.b");
  ck.params.Wh = take("head.W");
  ck.params.bh = take("head.b");
  ck.params.input = static_cast<int>(ck.params.W.rows);
  ck.params.hidden = static_cast<int>(ck.params.Wh.rows);
  ck.params.validate();
  return ck;
}

}  // namespace blvt::nn
