#include "icvae/data.hpp"

#include <zlib.h>

#include <memory>

#include "icvae/error.hpp"

namespace icvae {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

}  // namespace

IdxArray parse_idx(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) throw TruncatedError("IDX header shorter than 4 bytes", bytes.size());
  if (bytes[0] != 0 || bytes[1] != 0) throw FormatError("IDX magic must start with two zero bytes", 0);
  if (bytes[2] != kUnsignedByte) {
    throw FormatError("unsupported IDX type code " + std::to_string(bytes[2]) + " (only 0x08 unsigned byte)", 2);
  }
  const std::size_t rank = bytes[3];
  if (rank == 0) throw FormatError("IDX rank must be at least 1", 3);

  IdxArray out;
  std::size_t offset = 4;
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (offset + 4 > bytes.size()) throw TruncatedError("IDX header ends inside dimension " + std::to_string(i), offset);
    const auto d = read_be32(bytes, offset);
    out.dims.push_back(d);
    count *= d;
    offset += 4;
  }
  if (bytes.size() - offset < count) {
    throw TruncatedError("IDX payload holds " + std::to_string(bytes.size() - offset) + " bytes, header declares " +
                             std::to_string(count),
                         bytes.size());
  }
  if (bytes.size() - offset > count) {
    throw FormatError("IDX file has " + std::to_string(bytes.size() - offset - count) + " trailing bytes",
                      offset + count);
  }
  out.values.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
  return out;
}

IdxArray load_idx(const std::filesystem::path& path) {
  // gzread passes uncompressed files through unchanged, so plain and .gz
  // inputs share one code path.
  std::unique_ptr<gzFile_s, int (*)(gzFile)> file(gzopen(path.c_str(), "rb"), gzclose);
  if (!file) throw IoError("cannot open IDX file " + path.string());
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint8_t> chunk(1 << 16);
  for (;;) {
    const int n = gzread(file.get(), chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int err = 0;
      throw IoError("error reading " + path.string() + ": " + gzerror(file.get(), &err));
    }
    if (n == 0) break;
    bytes.insert(bytes.end(), chunk.begin(), chunk.begin() + n);
  }
  try {
    return parse_idx(bytes);
  } catch (const TruncatedError& e) {
    throw TruncatedError(path.string() + ": " + e.detail(), e.offset());
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.detail(), e.offset());
  }
}

IdxDataset make_dataset(const IdxArray& images, const IdxArray* labels) {
  if (images.dims.size() < 2) throw ValueError("image IDX array must have rank >= 2");
  const std::size_t n = images.dims[0];
  const std::size_t pixels = images.values.size() / std::max<std::size_t>(n, 1);
  if (n == 0 || pixels == 0) throw ValueError("image IDX array is empty");
  std::vector<double> values(images.values.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(images.values[i]) / 255.0;

  IdxDataset ds{Tensor({n, pixels}, std::move(values)), std::nullopt};
  if (labels) {
    if (labels->dims.size() != 1 || labels->dims[0] != n) {
      throw ValueError("label count does not match image count " + std::to_string(n));
    }
    ds.labels = labels->values;
  }
  return ds;
}

IdxDataset load_dataset(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                        std::size_t limit) {
  IdxArray img = load_idx(images);
  std::optional<IdxArray> lbl;
  if (labels) lbl = load_idx(*labels);
  IdxDataset ds = make_dataset(img, lbl ? &*lbl : nullptr);
  return limit > 0 && limit < ds.size() ? head(ds, limit) : ds;
}

DatasetFiles find_training_files(const std::filesystem::path& dir) {
  auto pick = [&](const char* stem) -> std::optional<std::filesystem::path> {
    for (const std::string suffix : {"", ".gz"}) {
      auto p = dir / (std::string(stem) + suffix);
      if (std::filesystem::exists(p)) return p;
    }
    return std::nullopt;
  };
  auto images = pick("train-images-idx3-ubyte");
  if (!images) throw IoError("no train-images-idx3-ubyte[.gz] in " + dir.string());
  return {*images, pick("train-labels-idx1-ubyte")};
}

IdxDataset head(const IdxDataset& ds, std::size_t n) {
  if (n == 0 || n > ds.size()) throw ValueError("head: invalid row count " + std::to_string(n));
  auto v = ds.images.data();
  IdxDataset out{Tensor({n, ds.pixels()}, std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n * ds.pixels()))),
                 std::nullopt};
  if (ds.labels) out.labels = std::vector<std::uint8_t>(ds.labels->begin(), ds.labels->begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

BatchSequence::BatchSequence(const IdxDataset& ds, std::size_t batch_size, Rng& rng, bool shuffle)
    : ds_(&ds), batch_size_(batch_size) {
  if (batch_size == 0) throw ValueError("batch size must be at least 1");
  if (shuffle) {
    order_ = rng.permutation(ds.size());
  } else {
    order_.resize(ds.size());
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  }
}

Batch BatchSequence::operator[](std::size_t i) const {
  if (i >= size()) throw ValueError("batch index out of range");
  const std::size_t begin = i * batch_size_;
  const std::size_t end = std::min(order_.size(), begin + batch_size_);
  const std::size_t width = ds_->pixels();
  auto src = ds_->images.data();
  std::vector<double> x;
  x.reserve((end - begin) * width);
  Batch b;
  for (std::size_t r = begin; r < end; ++r) {
    const auto row = order_[r];
    b.indices.push_back(row);
    x.insert(x.end(), src.begin() + static_cast<std::ptrdiff_t>(row * width),
             src.begin() + static_cast<std::ptrdiff_t>((row + 1) * width));
  }
  b.x = Tensor({end - begin, width}, std::move(x));
  return b;
}

}  // namespace icvae
