#include "classmark/checkpoint.hpp"

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "classmark/errors.hpp"

namespace classmark::nn {

namespace {

constexpr char kMagic[4] = {'C', 'M', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& buf, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(std::uint8_t(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(buf, bits);
}

struct Reader {
  const std::uint8_t* p;
  std::size_t left;

  void need(std::size_t n) const {
    if (left < n) raise(Errc::CorruptCheckpoint, "checkpoint truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    left -= n;
    return s;
  }
};

}  // namespace

std::string save_checkpoint(const ModelArtifact& model,
                            const std::string& path) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kVersion);
  put_u32(buf, std::uint32_t(model.arch.family));
  put_u32(buf, std::uint32_t(model.arch.input_h));
  put_u32(buf, std::uint32_t(model.arch.input_w));
  put_u32(buf, std::uint32_t(model.arch.input_c));
  put_u32(buf, std::uint32_t(model.arch.num_classes));
  put_u64(buf, model.seed);
  put_u32(buf, std::uint32_t(model.trained_epochs));

  auto params = const_cast<ModelArtifact&>(model).net.params();
  put_u32(buf, std::uint32_t(params.size()));
  for (const auto& p : params) {
    put_u32(buf, std::uint32_t(p.name.size()));
    buf.insert(buf.end(), p.name.begin(), p.name.end());
    put_u32(buf, std::uint32_t(p.shape.size()));
    for (int d : p.shape) put_u32(buf, std::uint32_t(d));
    put_u64(buf, p.value->size());
    for (double v : *p.value) put_f64(buf, v);
  }

  const auto crc = std::uint32_t(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), uInt(buf.size())));
  put_u32(buf, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::IoError, "cannot open " + path + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()),
            std::streamsize(buf.size()));
  if (!out) raise(Errc::IoError, "short write to " + path);
  return path;
}

ModelArtifact load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::IoError, "cannot open " + path);
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());

  if (buf.size() < 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
    raise(Errc::CorruptCheckpoint, "bad checkpoint magic");

  Reader r{buf.data() + 4, buf.size() - 4};
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    raise(Errc::VersionMismatch,
          "checkpoint version " + std::to_string(version) + ", expected " +
              std::to_string(kVersion));

  // Payload CRC sits in the last 4 bytes and covers everything before it.
  if (buf.size() < 12) raise(Errc::CorruptCheckpoint, "checkpoint truncated");
  const std::size_t body = buf.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i)
    stored |= std::uint32_t(buf[body + i]) << (8 * i);
  const auto actual = std::uint32_t(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), uInt(body)));
  if (stored != actual)
    raise(Errc::CorruptCheckpoint, "checkpoint checksum mismatch");
  r.left -= 4;  // exclude the trailer from field reads

  ArchSpec arch;
  const std::uint32_t family = r.u32();
  if (family > 2) raise(Errc::CorruptCheckpoint, "unknown model family tag");
  arch.family = ArchFamily(family);
  arch.input_h = int(r.u32());
  arch.input_w = int(r.u32());
  arch.input_c = int(r.u32());
  arch.num_classes = int(r.u32());
  const std::uint64_t seed = r.u64();
  const int trained_epochs = int(r.u32());

  ModelArtifact model = build_model(arch, seed);
  model.trained_epochs = trained_epochs;
  auto params = model.net.params();

  const std::uint32_t count = r.u32();
  if (count != params.size())
    raise(Errc::CorruptCheckpoint, "parameter tensor count mismatch");
  for (auto& p : params) {
    const std::uint32_t name_len = r.u32();
    if (r.str(name_len) != p.name)
      raise(Errc::CorruptCheckpoint, "parameter name mismatch");
    const std::uint32_t ndims = r.u32();
    if (ndims != p.shape.size())
      raise(Errc::CorruptCheckpoint, "parameter rank mismatch");
    for (int d : p.shape)
      if (r.u32() != std::uint32_t(d))
        raise(Errc::CorruptCheckpoint, "parameter shape mismatch");
    const std::uint64_t n = r.u64();
    if (n != p.value->size())
      raise(Errc::CorruptCheckpoint, "parameter size mismatch");
    for (std::uint64_t i = 0; i < n; ++i) (*p.value)[i] = r.f64();
  }
  return model;
}

}  // namespace classmark::nn
