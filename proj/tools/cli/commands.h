//
// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef CANARY_AUDIT_TOOLS_CLI_COMMANDS_H_
#define CANARY_AUDIT_TOOLS_CLI_COMMANDS_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace canary_audit::cli {

inline constexpr char kToolVersion[] = "0.1.0";

// Runs the command line `args` (args[0] is the program name). Returns the
// process exit code; 0 only when every requested output was written.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace canary_audit::cli

#endif  // CANARY_AUDIT_TOOLS_CLI_COMMANDS_H_
