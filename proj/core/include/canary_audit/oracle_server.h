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

#ifndef CANARY_AUDIT_ORACLE_SERVER_H_
#define CANARY_AUDIT_ORACLE_SERVER_H_

#include <memory>
#include <string>
#include <thread>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "canary_audit/oracle.h"
#include "canary_audit/vocab.h"

namespace httplib {
class Server;
}

namespace canary_audit {

// Serves any Oracle over the wire protocol. Tokens are mapped through
// `vocab`; unknown or empty tokens are answered with 422.
class OracleServer {
 public:
  OracleServer(Oracle& oracle, Vocabulary vocab, std::string model_id);
  ~OracleServer();

  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port.
  absl::StatusOr<int> Start(const std::string& host = "127.0.0.1", int port = 0);

  // Binds and serves on the calling thread until Stop() is called.
  absl::Status ServeForever(const std::string& host, int port);

  void Stop();

  // "http://host:port" once started.
  std::string url() const;

 private:
  void InstallHandlers();

  Oracle& oracle_;
  Vocabulary vocab_;
  std::string model_id_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::string host_;
  int port_ = 0;
};

}  // namespace canary_audit

#endif  // CANARY_AUDIT_ORACLE_SERVER_H_
