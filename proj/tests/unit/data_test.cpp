// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "memdef/data/augment.hpp"
#include "memdef/data/batch.hpp"
#include "memdef/data/dataset.hpp"

namespace memdef::data {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("memdef_data_" + std::to_string(::getpid()) + "_" +
                                                 std::to_string(counter_++))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

// Pixels are multiples of 1/255 so the byte round trip is exact.
Dataset synthetic(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  std::vector<float> px(static_cast<std::size_t>(n * c * h * w));
  for (auto& v : px) v = static_cast<float>(rng.below(256)) / 255.0f;
  ds.images = Tensor<float>({n, c, h, w}, px);
  for (std::int64_t i = 0; i < n; ++i) ds.labels.push_back(static_cast<int>(rng.below(10)));
  return ds;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Idx, RoundTripPlainAndGzip) {
  TempDir dir;
  auto ds = synthetic(7, 1, 28, 28, 1);
  for (const std::string suffix : {"", ".gz"}) {
    write_idx(dir.file("img" + suffix), dir.file("lab" + suffix), ds);
    auto back = load_idx(dir.file("img" + suffix), dir.file("lab" + suffix), Split::kTest);
    EXPECT_EQ(back.images.shape(), (Shape{7, 1, 28, 28}));
    EXPECT_EQ(back.labels, ds.labels);
    EXPECT_EQ(back.split, Split::kTest);
    EXPECT_TRUE(std::equal(ds.images.data().begin(), ds.images.data().end(), back.images.data().begin()));
  }
}

TEST(Idx, ByteScaling) {
  TempDir dir;
  std::vector<std::uint8_t> img{0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 255, 0};
  std::vector<std::uint8_t> lab{0, 0, 8, 1, 0, 0, 0, 1, 4};
  write_bytes(dir.file("i"), img);
  write_bytes(dir.file("l"), lab);
  auto ds = load_idx(dir.file("i"), dir.file("l"));
  EXPECT_EQ(ds.images.at(0), 1.0f);
  EXPECT_EQ(ds.images.at(1), 0.0f);
  EXPECT_EQ(ds.labels[0], 4);
}

TEST(Idx, ErrorsNameTheProblem) {
  TempDir dir;
  write_idx(dir.file("img"), dir.file("lab"), synthetic(3, 1, 4, 4, 2));
  auto img = read_bytes(dir.file("img"));
  img.resize(img.size() - 5);
  write_bytes(dir.file("short"), img);
  try {
    load_idx(dir.file("short"), dir.file("lab"));
    FAIL() << "expected a truncation error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 16"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_idx(dir.file("lab"), dir.file("lab")), DataError);  // label magic in image slot
  write_idx(dir.file("img2"), dir.file("lab2"), synthetic(2, 1, 4, 4, 3));
  EXPECT_THROW(load_idx(dir.file("img"), dir.file("lab2")), DataError);  // count mismatch
  EXPECT_THROW(load_idx(dir.file("missing"), dir.file("lab")), DataError);
}

TEST(Cifar, SingleRecordAndRoundTrip) {
  TempDir dir;
  std::vector<std::uint8_t> rec(3073, 128);
  rec[0] = 9;
  write_bytes(dir.file("one.bin"), rec);
  auto one = load_cifar_file(dir.file("one.bin"));
  EXPECT_EQ(one.size(), 1);
  EXPECT_EQ(one.labels[0], 9);
  EXPECT_EQ(one.images.shape(), (Shape{1, 3, 32, 32}));

  auto ds = synthetic(5, 3, 32, 32, 4);
  write_cifar_file(dir.file("x.bin"), ds);
  auto back = load_cifar_file(dir.file("x.bin"));
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_TRUE(std::equal(ds.images.data().begin(), ds.images.data().end(), back.images.data().begin()));
}

TEST(Cifar, DirectoryLayoutAndErrors) {
  TempDir dir;
  for (int i = 1; i <= 5; ++i) {
    write_cifar_file(dir.file("data_batch_" + std::to_string(i) + ".bin"), synthetic(2, 3, 32, 32, 10 + i));
  }
  write_cifar_file(dir.file("test_batch.bin"), synthetic(3, 3, 32, 32, 20));
  EXPECT_EQ(load_cifar_batches(dir.path().string(), Split::kTrain).size(), 10);
  EXPECT_EQ(load_cifar_batches(dir.path().string(), Split::kTest).size(), 3);

  write_bytes(dir.file("odd.bin"), std::vector<std::uint8_t>(3074, 0));
  EXPECT_THROW(load_cifar_file(dir.file("odd.bin")), DataError);
  std::vector<std::uint8_t> bad(3073, 0);
  bad[0] = 10;
  write_bytes(dir.file("bad.bin"), bad);
  EXPECT_THROW(load_cifar_file(dir.file("bad.bin")), DataError);
}

TEST(Augment, AllFlagsOffIsIdentity) {
  auto ds = synthetic(4, 3, 8, 8, 5);
  Rng rng(1);
  auto out = augment(ds.images, AugmentPolicy{}, rng);
  EXPECT_TRUE(std::equal(out.data().begin(), out.data().end(), ds.images.data().begin()));
}

TEST(Augment, FlipsAreInvolutions) {
  auto ds = synthetic(1, 3, 5, 7, 6);
  auto img = ds.images.detach();
  flip_horizontal(img.mutable_data(), 3, 5, 7);
  EXPECT_EQ(img.at(0), ds.images.at(6));
  flip_horizontal(img.mutable_data(), 3, 5, 7);
  flip_vertical(img.mutable_data(), 3, 5, 7);
  EXPECT_EQ(img.at(0), ds.images.at(4 * 7));
  flip_vertical(img.mutable_data(), 3, 5, 7);
  EXPECT_TRUE(std::equal(img.data().begin(), img.data().end(), ds.images.data().begin()));
}

TEST(Augment, ReflectCropCentreIsIdentityAndShiftReflects) {
  std::vector<float> row{0.1f, 0.2f, 0.3f, 0.4f};
  auto centre = row;
  reflect_crop(centre, 1, 1, 4, 2, 0, 2);
  EXPECT_EQ(centre, row);
  auto shifted = row;
  reflect_crop(shifted, 1, 1, 4, 2, 0, 0);  // padded row: 0.3 0.2 | 0.1 0.2 0.3 0.4 | 0.3 0.2
  EXPECT_EQ(shifted, (std::vector<float>{0.3f, 0.2f, 0.1f, 0.2f}));
}

TEST(Augment, RandomEraseWritesOneRectangleInAreaRange) {
  AugmentPolicy policy;
  policy.random_erase = true;
  policy.erase_p = 1.0;
  Tensor<float> ones({64, 1, 28, 28}, 1.0f);
  Rng rng(7);
  auto out = augment(ones, policy, rng);
  int erased_images = 0;
  for (int i = 0; i < 64; ++i) {
    std::int64_t top = 28, left = 28, bottom = -1, right = -1, count = 0;
    for (int y = 0; y < 28; ++y) {
      for (int x = 0; x < 28; ++x) {
        if (out.at(i * 784 + y * 28 + x) == 0.0f) {
          ++count;
          top = std::min<std::int64_t>(top, y);
          bottom = std::max<std::int64_t>(bottom, y);
          left = std::min<std::int64_t>(left, x);
          right = std::max<std::int64_t>(right, x);
        }
      }
    }
    if (count == 0) continue;
    ++erased_images;
    // Zeros fill their bounding box exactly: one axis-aligned rectangle.
    EXPECT_EQ(count, (bottom - top + 1) * (right - left + 1));
    EXPECT_GE(count / 784.0, policy.erase_area_min);
    EXPECT_LE(count / 784.0, policy.erase_area_max);
  }
  EXPECT_GT(erased_images, 56);
}

TEST(Augment, SeededAndInRange) {
  AugmentPolicy policy;
  policy.random_crop = policy.horizontal_flip = policy.vertical_flip = policy.random_erase = true;
  policy.noise_std = 0.01;
  auto ds = synthetic(8, 3, 32, 32, 8);
  Rng a(3), b(3);
  auto x = augment(ds.images, policy, a), y = augment(ds.images, policy, b);
  EXPECT_EQ(x.shape(), ds.images.shape());
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
  for (float v : x.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  policy.noise_std = -1;
  EXPECT_THROW(augment(ds.images, policy, a), std::invalid_argument);
}

TEST(BatchIterator, SizesOrderAndPartition) {
  auto ds = synthetic(10, 1, 2, 2, 9);
  BatchIterator it(ds, 4, 11);
  Batch batch;
  std::vector<std::int64_t> sizes, seen;
  while (it.next(batch)) {
    sizes.push_back(static_cast<std::int64_t>(batch.labels.size()));
    EXPECT_EQ(batch.images.dim(0), sizes.back());
    for (std::size_t k = 0; k < batch.indices.size(); ++k) EXPECT_EQ(batch.labels[k], ds.labels[batch.indices[k]]);
    seen.insert(seen.end(), batch.indices.begin(), batch.indices.end());
  }
  EXPECT_EQ(sizes, (std::vector<std::int64_t>{4, 4, 2}));
  EXPECT_EQ(std::set<std::int64_t>(seen.begin(), seen.end()).size(), 10u);

  BatchIterator again(ds, 4, 11);
  std::vector<std::int64_t> replay;
  while (again.next(batch)) replay.insert(replay.end(), batch.indices.begin(), batch.indices.end());
  EXPECT_EQ(replay, seen);

  again.new_epoch();
  std::vector<std::int64_t> second;
  while (again.next(batch)) second.insert(second.end(), batch.indices.begin(), batch.indices.end());
  EXPECT_EQ(std::set<std::int64_t>(second.begin(), second.end()).size(), 10u);
  EXPECT_THROW(BatchIterator(ds, 0, 1), std::invalid_argument);
}

TEST(Dataset, TakePerClassKeepsFileOrder) {
  auto ds = synthetic(200, 1, 2, 2, 12);
  auto small = take_per_class(ds, 3);
  std::vector<int> counts(10, 0);
  for (int l : small.labels) ++counts[l];
  for (int c : counts) EXPECT_EQ(c, 3);
}

}  // namespace
}  // namespace memdef::data
