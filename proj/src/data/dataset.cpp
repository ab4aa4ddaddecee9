// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/data/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace memdef::data {
namespace {

bool has_gz_suffix(const std::string& path) {
  return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

// gzread passes plain files through unchanged, so one reader covers both.
std::vector<std::uint8_t> read_all(const std::string& path) {
  if (!std::filesystem::exists(path)) throw DataError("cannot open '" + path + "': no such file");
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw DataError("cannot open '" + path + "'");
  std::vector<std::uint8_t> out;
  std::vector<std::uint8_t> chunk(1 << 20);
  for (;;) {
    const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      int code = 0;
      std::string msg = gzerror(f, &code);
      gzclose(f);
      throw DataError("read error in '" + path + "' after " + std::to_string(out.size()) + " bytes: " + msg);
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(f);
  return out;
}

void write_all(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  if (has_gz_suffix(path)) {
    gzFile f = gzopen(path.c_str(), "wb9");
    if (!f) throw DataError("cannot write '" + path + "'");
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    gzclose(f);
    if (n != static_cast<int>(bytes.size())) throw DataError("short write to '" + path + "'");
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("short write to '" + path + "'");
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes, const std::string& path) : bytes_(bytes), path_(path) {}

  void need(std::size_t count, const char* what) const {
    if (offset_ + count > bytes_.size()) {
      throw DataError("truncated file '" + path_ + "' at offset " + std::to_string(offset_) + ": expected " +
                      std::to_string(count) + " bytes of " + what + ", found " +
                      std::to_string(bytes_.size() - offset_));
    }
  }
  std::uint32_t u32_be(const char* what) {
    need(4, what);
    const auto* p = bytes_.data() + offset_;
    offset_ += 4;
    return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
  }
  const std::uint8_t* take(std::size_t count, const char* what) {
    need(count, what);
    const auto* p = bytes_.data() + offset_;
    offset_ += count;
    return p;
  }
  std::size_t offset() const { return offset_; }

 private:
  const std::vector<std::uint8_t>& bytes_;
  const std::string& path_;
  std::size_t offset_ = 0;
};

void push_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

const char* split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Dataset load_idx(const std::string& images_path, const std::string& labels_path, Split split) {
  const auto image_bytes = read_all(images_path);
  Reader images(image_bytes, images_path);
  const auto magic = images.u32_be("image magic");
  if (magic != kIdxImageMagic) {
    throw DataError("bad magic in '" + images_path + "' at offset 0: got " + std::to_string(magic) +
                    ", expected 2051");
  }
  const auto count = images.u32_be("image count");
  const auto rows = images.u32_be("row count");
  const auto cols = images.u32_be("column count");
  const std::size_t pixels = std::size_t{count} * rows * cols;
  const auto* px = images.take(pixels, "pixel data");

  const auto label_bytes = read_all(labels_path);
  Reader labels(label_bytes, labels_path);
  const auto label_magic = labels.u32_be("label magic");
  if (label_magic != kIdxLabelMagic) {
    throw DataError("bad magic in '" + labels_path + "' at offset 0: got " + std::to_string(label_magic) +
                    ", expected 2049");
  }
  const auto label_count = labels.u32_be("label count");
  if (label_count != count) {
    throw DataError("count mismatch: '" + images_path + "' holds " + std::to_string(count) + " images but '" +
                    labels_path + "' holds " + std::to_string(label_count) + " labels");
  }
  const auto* lb = labels.take(count, "label data");

  Dataset ds;
  ds.split = split;
  std::vector<float> values(pixels);
  for (std::size_t i = 0; i < pixels; ++i) values[i] = static_cast<float>(px[i]) / 255.0f;
  ds.images = Tensor<float>({static_cast<std::int64_t>(count), 1, rows, cols}, std::move(values));
  ds.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (lb[i] >= ds.class_count) {
      throw DataError("label " + std::to_string(lb[i]) + " out of range in '" + labels_path + "' at offset " +
                      std::to_string(8 + i));
    }
    ds.labels[i] = lb[i];
  }
  return ds;
}

void write_idx(const std::string& images_path, const std::string& labels_path, const Dataset& dataset) {
  validate(dataset);
  if (dataset.channels() != 1) throw DataError("IDX output needs single-channel images");
  std::vector<std::uint8_t> img;
  img.reserve(16 + dataset.images.numel());
  push_u32_be(img, kIdxImageMagic);
  push_u32_be(img, static_cast<std::uint32_t>(dataset.size()));
  push_u32_be(img, static_cast<std::uint32_t>(dataset.height()));
  push_u32_be(img, static_cast<std::uint32_t>(dataset.width()));
  for (float v : dataset.images.data()) img.push_back(to_byte(v));
  write_all(images_path, img);

  std::vector<std::uint8_t> lab;
  push_u32_be(lab, kIdxLabelMagic);
  push_u32_be(lab, static_cast<std::uint32_t>(dataset.size()));
  for (int l : dataset.labels) lab.push_back(static_cast<std::uint8_t>(l));
  write_all(labels_path, lab);
}

Dataset load_cifar_file(const std::string& path, Split split) {
  const auto bytes = read_all(path);
  if (bytes.empty() || bytes.size() % kCifarRecordBytes != 0) {
    throw DataError("'" + path + "' has " + std::to_string(bytes.size()) +
                    " bytes, not a positive multiple of the 3073-byte record size");
  }
  const auto n = static_cast<std::int64_t>(bytes.size() / kCifarRecordBytes);
  Dataset ds;
  ds.split = split;
  ds.labels.resize(n);
  std::vector<float> values(static_cast<std::size_t>(n) * 3072);
  for (std::int64_t r = 0; r < n; ++r) {
    const auto* rec = bytes.data() + r * kCifarRecordBytes;
    if (rec[0] > 9) {
      throw DataError("label byte " + std::to_string(rec[0]) + " > 9 in '" + path + "' at offset " +
                      std::to_string(r * kCifarRecordBytes));
    }
    ds.labels[r] = rec[0];
    for (int i = 0; i < 3072; ++i) values[r * 3072 + i] = static_cast<float>(rec[1 + i]) / 255.0f;
  }
  ds.images = Tensor<float>({n, 3, 32, 32}, std::move(values));
  return ds;
}

Dataset load_cifar_batches(const std::string& dir_path, Split split) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (split == Split::kTrain) {
    for (int i = 1; i <= 5; ++i) files.push_back((fs::path(dir_path) / ("data_batch_" + std::to_string(i) + ".bin")).string());
  } else {
    files.push_back((fs::path(dir_path) / "test_batch.bin").string());
  }
  std::vector<Dataset> parts;
  for (const auto& f : files) parts.push_back(load_cifar_file(f, split));
  Dataset ds;
  ds.split = split;
  std::vector<float> values;
  for (const auto& p : parts) {
    values.insert(values.end(), p.images.data().begin(), p.images.data().end());
    ds.labels.insert(ds.labels.end(), p.labels.begin(), p.labels.end());
  }
  ds.images = Tensor<float>({ds.size(), 3, 32, 32}, std::move(values));
  return ds;
}

void write_cifar_file(const std::string& path, const Dataset& dataset) {
  validate(dataset);
  if (dataset.images.shape() != Shape{dataset.size(), 3, 32, 32}) throw DataError("CIFAR output needs 3x32x32 images");
  std::vector<std::uint8_t> bytes;
  bytes.reserve(static_cast<std::size_t>(dataset.size()) * kCifarRecordBytes);
  const auto px = dataset.images.data();
  for (std::int64_t r = 0; r < dataset.size(); ++r) {
    bytes.push_back(static_cast<std::uint8_t>(dataset.labels[r]));
    for (int i = 0; i < 3072; ++i) bytes.push_back(to_byte(px[r * 3072 + i]));
  }
  write_all(path, bytes);
}

Dataset subset(const Dataset& dataset, std::span<const std::int64_t> indices) {
  Dataset out;
  out.split = dataset.split;
  out.class_count = dataset.class_count;
  Shape shape = dataset.images.shape();
  const auto stride = static_cast<std::size_t>(shape_numel(shape) / std::max<std::int64_t>(shape[0], 1));
  shape[0] = static_cast<std::int64_t>(indices.size());
  std::vector<float> values;
  values.reserve(indices.size() * stride);
  const auto src = dataset.images.data();
  for (auto i : indices) {
    if (i < 0 || i >= dataset.size()) throw std::out_of_range("subset index out of range");
    values.insert(values.end(), src.begin() + i * stride, src.begin() + (i + 1) * stride);
    out.labels.push_back(dataset.labels[i]);
  }
  out.images = Tensor<float>(shape, std::move(values));
  return out;
}

Dataset take_per_class(const Dataset& dataset, std::int64_t per_class) {
  std::vector<std::int64_t> counts(dataset.class_count, 0), keep;
  for (std::int64_t i = 0; i < dataset.size(); ++i) {
    if (counts[dataset.labels[i]]++ < per_class) keep.push_back(i);
  }
  return subset(dataset, keep);
}

void validate(const Dataset& dataset) {
  if (dataset.images.rank() != 4) throw DataError("dataset images must be [N,C,H,W]");
  if (dataset.images.dim(0) != dataset.size()) throw DataError("image and label counts differ");
  for (int l : dataset.labels) {
    if (l < 0 || l >= dataset.class_count) throw DataError("label " + std::to_string(l) + " out of range");
  }
  for (float v : dataset.images.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw DataError("pixel outside [0,1]");
  }
}

}  // namespace memdef::data
