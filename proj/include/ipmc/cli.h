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

#ifndef IPMC_CLI_H_
#define IPMC_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace ipmc {

// Exit codes of the command-line front end.
constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Runs one subcommand. `args` excludes the program name. Results go to
// `out`; failures are reported to `err` as a single JSON object.
int RunCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

// Parses IPMC_THREADS; unset means 1. Anything but a positive integer is a
// ConfigError.
int ThreadsFromEnvironment();

}  // namespace ipmc

#endif  // IPMC_CLI_H_
