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

#ifndef IPMC_BINARY_IO_H_
#define IPMC_BINARY_IO_H_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ipmc {

// Append-only little-endian encoder. All multi-byte values are written
// least significant byte first regardless of the host byte order.
class ByteWriter {
 public:
  void PutU8(uint8_t v) { bytes_.push_back(v); }
  void PutU32(uint32_t v);
  void PutU64(uint64_t v);
  void PutI32(int32_t v) { PutU32(static_cast<uint32_t>(v)); }
  void PutF64(double v);
  void PutF64s(std::span<const double> values);
  void PutBytes(std::string_view bytes);
  // Length-prefixed (u64) string.
  void PutString(std::string_view s);

  const std::vector<uint8_t> &bytes() const { return bytes_; }
  std::vector<uint8_t> Release() { return std::move(bytes_); }

 private:
  std::vector<uint8_t> bytes_;
};

// Bounds-checked little-endian decoder over a borrowed buffer. Every read
// past the end throws FormatError("truncated ...").
class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

  uint8_t GetU8();
  uint32_t GetU32();
  uint64_t GetU64();
  int32_t GetI32() { return static_cast<int32_t>(GetU32()); }
  double GetF64();
  void GetF64s(std::span<double> out);
  std::string GetBytes(size_t n);
  std::string GetString();
  std::span<const uint8_t> GetSpan(size_t n);

  size_t remaining() const { return bytes_.size() - pos_; }
  size_t position() const { return pos_; }

 private:
  void Need(size_t n) const;

  std::span<const uint8_t> bytes_;
  size_t pos_ = 0;
};

std::vector<uint8_t> ReadFileBytes(const std::string &path);
void WriteFileBytes(const std::string &path, std::span<const uint8_t> bytes);

}  // namespace ipmc

#endif  // IPMC_BINARY_IO_H_
