// Copyright 2026 The dval Authors.
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

#ifndef DVAL_TOOLS_CLI_HPP
#define DVAL_TOOLS_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace dval::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitData = 1;
inline constexpr int kExitUsage = 2;

/// Runs the `dval` command line. `args` excludes the program name.
/// Errors are reported as a single `error[usage]: ...` or `error[data]: ...` line on `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dval::cli

#endif  // DVAL_TOOLS_CLI_HPP
