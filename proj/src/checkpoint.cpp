#include "icvae/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "icvae/error.hpp"

namespace icvae {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'V', 'A', 'E', '1', '\0', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename T>
void put_raw(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(crc32(crc, bytes.data(), static_cast<uInt>(bytes.size())));
}

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, std::size_t limit) : bytes_(bytes), limit_(limit) {}

  std::size_t offset() const { return pos_; }

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > limit_) throw TruncatedError(std::string("checkpoint ends inside ") + what, pos_);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint8_t u8(const char* what) {
    need(1, what);
    return bytes_[pos_++];
  }

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t limit_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.width != 4 && e.width != 8) throw ValueError("checkpoint entry '" + e.name + "': width must be 4 or 8");
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    const auto& shape = e.tensor.shape();
    put_u32(out, static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.push_back(e.width);
    for (double v : e.tensor.data()) {
      if (e.width == 8) {
        put_raw(out, v);
      } else {
        put_raw(out, static_cast<float>(v));
      }
    }
  }
  put_u32(out, crc_of(out));
  return out;
}

std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic)) throw TruncatedError("checkpoint shorter than its magic", bytes.size());
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("not a checkpoint (bad magic)", 0);
  if (bytes.size() < sizeof(kMagic) + 4 + 4 + 4) throw TruncatedError("checkpoint header incomplete", bytes.size());

  // The last four bytes hold the CRC; everything else is body.
  const std::size_t body = bytes.size() - 4;
  Reader in(bytes, body);
  in.take(sizeof(kMagic), "magic");
  const auto version = in.u32("version");
  if (version != kCheckpointVersion) {
    throw VersionError("unsupported checkpoint version " + std::to_string(version), sizeof(kMagic));
  }
  const auto count = in.u32("entry count");

  std::vector<NamedTensor> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor e;
    const auto name_len = in.u32("entry name length");
    auto name = in.take(name_len, "entry name");
    e.name.assign(name.begin(), name.end());
    const auto rank = in.u32("entry rank");
    if (rank == 0) throw FormatError("checkpoint entry '" + e.name + "' has rank 0", in.offset());
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) {
      shape.push_back(in.u32("entry dims"));
      if (shape.back() == 0) throw FormatError("checkpoint entry '" + e.name + "' has a zero dimension", in.offset());
    }
    const auto width_at = in.offset();
    e.width = in.u8("entry width");
    if (e.width != 4 && e.width != 8) {
      throw FormatError("checkpoint entry '" + e.name + "' has invalid width " + std::to_string(e.width), width_at);
    }
    const std::size_t n = shape_numel(shape);
    auto payload = in.take(n * e.width, "entry payload");
    std::vector<double> values(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (e.width == 8) {
        std::memcpy(&values[k], payload.data() + k * 8, 8);
      } else {
        float f;
        std::memcpy(&f, payload.data() + k * 4, 4);
        values[k] = f;
      }
    }
    e.tensor = Tensor(std::move(shape), std::move(values));
    entries.push_back(std::move(e));
  }
  if (in.offset() != body) throw FormatError("unexpected bytes after the last checkpoint entry", in.offset());

  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[body + i]} << (8 * i);
  if (stored != crc_of(bytes.first(body))) throw ChecksumError("checkpoint CRC32 mismatch", body);
  return entries;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  write_file(path, encode_checkpoint(entries));
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  try {
    return decode_checkpoint(bytes);
  } catch (const ChecksumError& e) {
    throw ChecksumError(path.string() + ": " + e.detail(), e.offset());
  } catch (const VersionError& e) {
    throw VersionError(path.string() + ": " + e.detail(), e.offset());
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.detail(), e.offset());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

}  // namespace icvae
