#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "icvae/rng.hpp"
#include "icvae/tensor.hpp"

namespace icvae {

/// Raw contents of an IDX file of unsigned bytes.
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> values;
};

/// Parses an in-memory IDX buffer: 0x00 0x00, type code 0x08 (unsigned byte),
/// rank, rank big-endian u32 dims, payload. Throws FormatError / TruncatedError
/// carrying the byte offset of the problem.
IdxArray parse_idx(std::span<const std::uint8_t> bytes);

/// Reads an IDX file; gzip-compressed files are detected from their magic
/// bytes and decompressed transparently.
IdxArray load_idx(const std::filesystem::path& path);

/// Images flattened row-major with pixel = byte / 255.
struct IdxDataset {
  Tensor images;                                    // n x pixels
  std::optional<std::vector<std::uint8_t>> labels;  // n entries when present

  std::size_t size() const { return images.rows(); }
  std::size_t pixels() const { return images.cols(); }
};

/// Builds a dataset from an image IDX array (rank >= 2; dims after the first
/// are flattened) and an optional label array of matching length.
IdxDataset make_dataset(const IdxArray& images, const IdxArray* labels = nullptr);

/// Loads images (and labels when a path is given). `limit` > 0 keeps the first
/// `limit` rows.
IdxDataset load_dataset(const std::filesystem::path& images, const std::optional<std::filesystem::path>& labels,
                        std::size_t limit = 0);

/// Locates MNIST-style training files in `dir`, accepting the plain and the
/// ".gz" name variants.
struct DatasetFiles {
  std::filesystem::path images;
  std::optional<std::filesystem::path> labels;
};
DatasetFiles find_training_files(const std::filesystem::path& dir);

/// First n rows of a dataset.
IdxDataset head(const IdxDataset& ds, std::size_t n);

struct Batch {
  Tensor x;
  std::vector<std::size_t> indices;
};

/// One epoch of mini-batches. The row order is fixed at construction: identity
/// when shuffle is off, otherwise a permutation drawn from rng. Every row
/// appears exactly once; the final batch may be smaller.
class BatchSequence {
 public:
  BatchSequence(const IdxDataset& ds, std::size_t batch_size, Rng& rng, bool shuffle);

  std::size_t size() const noexcept { return (order_.size() + batch_size_ - 1) / batch_size_; }
  Batch operator[](std::size_t i) const;
  const std::vector<std::size_t>& order() const noexcept { return order_; }

 private:
  const IdxDataset* ds_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
};

}  // namespace icvae
