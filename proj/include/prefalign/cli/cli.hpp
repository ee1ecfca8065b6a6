// Copyright 2026 The prefalign Authors.
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

#ifndef PREFALIGN_CLI_CLI_HPP_
#define PREFALIGN_CLI_CLI_HPP_

#include <filesystem>
#include <string>
#include <vector>

namespace prefalign::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// Entry point of the prefalign tool. args excludes the program name.
// Commands: gen-data, pretrain, align, sweep, eval. Options may also come
// from a key=value file given with --config; command-line flags win.
int run(const std::vector<std::string>& args);

// Sibling paths used for per-run artifacts.
std::filesystem::path manifest_path(const std::filesystem::path& out);
std::filesystem::path metrics_path(const std::filesystem::path& out);

}  // namespace prefalign::cli

#endif  // PREFALIGN_CLI_CLI_HPP_
