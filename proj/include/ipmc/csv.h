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

#ifndef IPMC_CSV_H_
#define IPMC_CSV_H_

#include <string>
#include <string_view>
#include <vector>

namespace ipmc {

// RFC-4180 output: fields containing a comma, quote, CR or LF are quoted
// with inner quotes doubled; records end in CRLF.
class CsvWriter {
 public:
  void Row(const std::vector<std::string> &fields);
  const std::string &text() const { return text_; }

 private:
  std::string text_;
};

// Shortest text that parses back to the same double.
std::string FormatReal(double v);

// Parses RFC-4180 text (CRLF or LF line ends). Unterminated quotes raise
// FormatError. A trailing empty line is ignored.
std::vector<std::vector<std::string>> ParseCsv(std::string_view text);

}  // namespace ipmc

#endif  // IPMC_CSV_H_
