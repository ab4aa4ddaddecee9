// Copyright 2026 The memdef Authors
// SPDX-License-Identifier: Apache-2.0

#include "memdef/io/binary.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace memdef::io {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void BinaryWriter::f32s(std::span<const float> v) {
  buf_.reserve(buf_.size() + 4 * v.size());
  for (float x : v) f32(x);
}

void BinaryWriter::f64s(std::span<const double> v) {
  buf_.reserve(buf_.size() + 8 * v.size());
  for (double x : v) f64(x);
}

void BinaryReader::fail(const std::string& what) const {
  throw FormatError(source_ + ": " + what + " at offset " + std::to_string(offset_));
}

const std::uint8_t* BinaryReader::take(std::size_t n) {
  if (n > buf_.size() - offset_) {
    fail("truncated: need " + std::to_string(n) + " bytes, " + std::to_string(buf_.size() - offset_) + " left");
  }
  const auto* p = buf_.data() + offset_;
  offset_ += n;
  return p;
}

std::uint8_t BinaryReader::u8() { return *take(1); }

std::uint32_t BinaryReader::u32() {
  const auto* p = take(4);
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t BinaryReader::u64() {
  const auto* p = take(8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

float BinaryReader::f32() { return std::bit_cast<float>(u32()); }
double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> BinaryReader::bytes(std::size_t n) {
  const auto* p = take(n);
  return {p, p + n};
}

std::string BinaryReader::str() {
  const auto n = u32();
  const auto* p = take(n);
  return {reinterpret_cast<const char*>(p), n};
}

void BinaryReader::f32s(std::span<float> out) {
  if (out.size() > (buf_.size() - offset_) / 4) take(out.size() * 4);  // raises the truncation error
  for (auto& x : out) x = f32();
}

void BinaryReader::f64s(std::span<double> out) {
  if (out.size() > (buf_.size() - offset_) / 8) take(out.size() * 8);
  for (auto& x : out) x = f64();
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

void write_text_file(const std::string& path, const std::string& text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace memdef::io
