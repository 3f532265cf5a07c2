#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "icvae/checkpoint.hpp"
#include "icvae/data.hpp"
#include "icvae/error.hpp"
#include "support.hpp"

using namespace icvae;

namespace {

std::vector<std::uint8_t> idx_bytes(std::vector<std::uint32_t> dims, std::size_t payload) {
  std::vector<std::uint8_t> b{0, 0, 0x08, static_cast<std::uint8_t>(dims.size())};
  for (auto d : dims) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(d >> s));
  }
  for (std::size_t i = 0; i < payload; ++i) b.push_back(static_cast<std::uint8_t>(i * 7));
  return b;
}

IdxDataset tiny_dataset(std::size_t n) {
  IdxArray img{{static_cast<std::uint32_t>(n), 2, 2}, {}};
  for (std::size_t i = 0; i < n * 4; ++i) img.values.push_back(static_cast<std::uint8_t>(i));
  return make_dataset(img);
}

}  // namespace

TEST_CASE("parse a well-formed IDX array") {
  const IdxArray a = parse_idx(idx_bytes({3, 2}, 6));
  CHECK(a.dims == std::vector<std::uint32_t>{3, 2});
  CHECK(a.values.size() == 6);
  CHECK(a.values[1] == 7);
}

TEST_CASE("malformed IDX input reports the byte offset") {
  SUBCASE("header claims ten images, payload empty") {
    const auto b = idx_bytes({10, 28, 28}, 0);
    CHECK(b.size() == 16);
    try {
      parse_idx(b);
      FAIL("expected TruncatedError");
    } catch (const TruncatedError& e) {
      CHECK(e.offset() == 16);
    }
  }
  SUBCASE("bad magic") {
    auto b = idx_bytes({2}, 2);
    b[1] = 1;
    CHECK_THROWS_AS(parse_idx(b), FormatError);
  }
  SUBCASE("unsupported type code") {
    auto b = idx_bytes({2}, 2);
    b[2] = 0x0D;
    try {
      parse_idx(b);
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 2);
    }
  }
  SUBCASE("header cut inside the dimensions") {
    auto b = idx_bytes({2, 3}, 0);
    b.resize(6);
    CHECK_THROWS_AS(parse_idx(b), TruncatedError);
  }
  SUBCASE("trailing bytes") {
    auto b = idx_bytes({2}, 3);
    CHECK_THROWS_AS(parse_idx(b), FormatError);
  }
  SUBCASE("rank zero") {
    std::vector<std::uint8_t> b{0, 0, 8, 0};
    CHECK_THROWS_AS(parse_idx(b), FormatError);
  }
}

TEST_CASE("uncompressed IDX files load") {
  const auto dir = testsupport::scratch_dir("idx");
  const auto bytes = idx_bytes({4, 2, 2}, 16);
  write_file(dir / "plain-idx", bytes);
  const IdxArray plain = load_idx(dir / "plain-idx");
  CHECK(plain.dims == std::vector<std::uint32_t>{4, 2, 2});
  CHECK_THROWS_AS(load_idx(dir / "missing"), IoError);

  const IdxDataset ds = make_dataset(plain);
  CHECK(ds.images.shape() == Shape{4, 4});
  CHECK(ds.images.at(0, 1) == doctest::Approx(7.0 / 255.0));
  CHECK_FALSE(ds.labels.has_value());
}

TEST_CASE("bundled MNIST subset") {
  const DatasetFiles files = find_training_files(testsupport::mnist_dir());
  REQUIRE(files.labels.has_value());
  const IdxArray images = load_idx(files.images);
  const IdxArray labels = load_idx(*files.labels);
  CHECK(images.dims == std::vector<std::uint32_t>{5000, 28, 28});
  CHECK(labels.dims == std::vector<std::uint32_t>{5000});

  const IdxDataset ds = load_dataset(files.images, files.labels, 0);
  CHECK(ds.size() == 5000);
  CHECK(ds.pixels() == 784);
  const auto [lo, hi] = std::minmax_element(ds.images.data().begin(), ds.images.data().end());
  CHECK(*lo == 0.0);
  CHECK(*hi == 1.0);
  for (auto l : *ds.labels) CHECK(l <= 9);

  const IdxDataset sub = load_dataset(files.images, files.labels, 1000);
  CHECK(sub.size() == 1000);
  std::vector<int> per_class(10, 0);
  for (auto l : *sub.labels) ++per_class[l];
  for (int c : per_class) CHECK(c == 100);

  CHECK_THROWS_AS(find_training_files(testsupport::source_dir() / "no-such-dir"), IoError);
}

TEST_CASE("label count must match") {
  IdxArray img{{3, 2}, {1, 2, 3, 4, 5, 6}};
  IdxArray lbl{{2}, {0, 1}};
  CHECK_THROWS_AS(make_dataset(img, &lbl), ValueError);
}

TEST_CASE("batching") {
  const IdxDataset ds = tiny_dataset(10);
  Rng rng(0);
  SUBCASE("sizes") {
    BatchSequence seq(ds, 4, rng, false);
    REQUIRE(seq.size() == 3);
    CHECK(seq[0].x.rows() == 4);
    CHECK(seq[1].x.rows() == 4);
    CHECK(seq[2].x.rows() == 2);
    CHECK_THROWS_AS(seq[3], ValueError);
  }
  SUBCASE("no shuffle keeps identity order") {
    BatchSequence seq(ds, 3, rng, false);
    for (std::size_t i = 0; i < 10; ++i) CHECK(seq.order()[i] == i);
    CHECK(seq[1].x.at(0, 0) == ds.images.at(3, 0));
  }
  SUBCASE("shuffle is reproducible and covers every row once") {
    Rng a(5);
    Rng b(5);
    BatchSequence sa(ds, 3, a, true);
    BatchSequence sb(ds, 3, b, true);
    CHECK(sa.order() == sb.order());
    std::multiset<std::size_t> seen;
    for (std::size_t i = 0; i < sa.size(); ++i) {
      const Batch batch = sa[i];
      for (std::size_t r = 0; r < batch.indices.size(); ++r) {
        seen.insert(batch.indices[r]);
        CHECK(batch.x.at(r, 2) == ds.images.at(batch.indices[r], 2));
      }
    }
    CHECK(seen.size() == 10);
    CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == 10);
  }
  CHECK_THROWS_AS(BatchSequence(ds, 0, rng, false), ValueError);
}
