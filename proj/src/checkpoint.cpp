#include "d4am/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "d4am/errors.hpp"

namespace d4am {

namespace {
constexpr char kMagic[8] = {'D', '4', 'A', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeader = 24;
}  // namespace

void save_checkpoint(const ParamVector& theta, const std::filesystem::path& path) {
  std::vector<unsigned char> buf;
  buf.reserve(kHeader + 8 * theta.size() + 4);
  buf.insert(buf.end(), std::begin(kMagic), std::end(kMagic));
  binio::put_u32(buf, kVersion);
  binio::put_u32(buf, 0);
  binio::put_u64(buf, theta.size());
  for (double v : theta) binio::put_f64(buf, v);
  binio::put_u32(buf, binio::crc32_of(buf.data(), buf.size()));

  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("failed writing checkpoint: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place: " + path.string() + ": " + ec.message());
}

ParamVector load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kHeader + 4) throw IoError("checkpoint truncated: " + path.string());
  if (!std::equal(std::begin(kMagic), std::end(kMagic), buf.begin())) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const std::uint32_t version = binio::get_u32(buf.data() + 8);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + ": " + path.string());
  }
  const std::uint64_t n = binio::get_u64(buf.data() + 16);
  if (n > (buf.size() - kHeader - 4) / 8 || buf.size() != kHeader + 8 * n + 4) {
    throw IoError("checkpoint size does not match its header: " + path.string());
  }
  const std::size_t body = kHeader + 8 * n;
  if (binio::crc32_of(buf.data(), body) != binio::get_u32(buf.data() + body)) {
    throw IoError("checkpoint checksum mismatch: " + path.string());
  }
  ParamVector theta(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < n; ++i) theta[i] = binio::get_f64(buf.data() + kHeader + 8 * i);
  return theta;
}

}  // namespace d4am
