#include "viref/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace viref {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    fail(ErrorKind::format, "checkpoint: truncated while reading " + what);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 |
         uint32_t(b[3]) << 24;
}

void put_f32(std::ostream& os, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(os, bits);
}

float get_f32(std::istream& is, const std::string& what) {
  uint32_t bits = get_u32(is, what);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

}  // namespace

void save_checkpoint(const ParameterStore<float>& params,
                     const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::missing_file, "cannot write checkpoint: " + path);
  os.write("VRFC", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (const auto& [name, entry] : params) {
    put_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    const Tensor<float>& t = entry.value;
    put_u32(os, static_cast<uint32_t>(t.rank()));
    for (int d : t.shape) put_u32(os, static_cast<uint32_t>(d));
    // column-major element order, matching the in-memory layout
    const float* p = t.data.data();
    for (long i = 0; i < t.data.size(); ++i) put_f32(os, p[i]);
  }
  if (!os) fail(ErrorKind::format, "checkpoint: write failed: " + path);
}

ParameterStore<float> load_checkpoint(const std::string& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorKind::missing_file, "checkpoint not found: " + path);
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::missing_file, "cannot open checkpoint: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "VRFC", 4) != 0)
    fail(ErrorKind::format, "checkpoint: bad magic in " + path);
  const uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion)
    fail(ErrorKind::format,
         "checkpoint: unsupported version " + std::to_string(version));
  const uint32_t count = get_u32(is, "parameter count");
  ParameterStore<float> store;
  for (uint32_t i = 0; i < count; ++i) {
    const uint32_t name_len = get_u32(is, "name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len))
      fail(ErrorKind::format, "checkpoint: truncated name");
    const uint32_t rank = get_u32(is, "rank");
    if (rank < 1 || rank > 2)
      fail(ErrorKind::format, "checkpoint: unsupported rank for " + name);
    std::vector<int> shape;
    long total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      const uint32_t dim = get_u32(is, "dimension");
      if (dim == 0) fail(ErrorKind::format, "checkpoint: zero dim in " + name);
      shape.push_back(static_cast<int>(dim));
      total *= dim;
    }
    Tensor<float> t;
    t.shape = shape;
    t.data.resize(shape[0], rank == 2 ? shape[1] : 1);
    float* p = t.data.data();
    for (long k = 0; k < total; ++k) p[k] = get_f32(is, "payload of " + name);
    store.add(name, std::move(t));
  }
  return store;
}

}  // namespace viref
