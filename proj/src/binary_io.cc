// Copyright 2026 The IPMC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ipmc/binary_io.h"

#include <bit>
#include <fstream>
#include <iterator>

#include "ipmc/errors.h"

namespace ipmc {

void ByteWriter::PutU32(uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::PutU64(uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::PutF64(double v) { PutU64(std::bit_cast<uint64_t>(v)); }

void ByteWriter::PutF64s(std::span<const double> values) {
  bytes_.reserve(bytes_.size() + 8 * values.size());
  for (double v : values) PutF64(v);
}

void ByteWriter::PutBytes(std::string_view bytes) {
  bytes_.insert(bytes_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::PutString(std::string_view s) {
  PutU64(s.size());
  PutBytes(s);
}

void ByteReader::Need(size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw FormatError("truncated input: need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ", have " +
                      std::to_string(bytes_.size() - pos_));
  }
}

uint8_t ByteReader::GetU8() {
  Need(1);
  return bytes_[pos_++];
}

uint32_t ByteReader::GetU32() {
  Need(4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

uint64_t ByteReader::GetU64() {
  Need(8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

double ByteReader::GetF64() { return std::bit_cast<double>(GetU64()); }

void ByteReader::GetF64s(std::span<double> out) {
  Need(8 * out.size());
  for (double &v : out) v = GetF64();
}

std::string ByteReader::GetBytes(size_t n) {
  Need(n);
  std::string s(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
  pos_ += n;
  return s;
}

std::string ByteReader::GetString() {
  uint64_t n = GetU64();
  if (n > remaining()) throw FormatError("truncated string of length " + std::to_string(n));
  return GetBytes(n);
}

std::span<const uint8_t> ByteReader::GetSpan(size_t n) {
  Need(n);
  auto s = bytes_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::vector<uint8_t> ReadFileBytes(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

void WriteFileBytes(const std::string &path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace ipmc
