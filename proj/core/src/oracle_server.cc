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

#include "canary_audit/oracle_server.h"

#include <utility>

#include "absl/strings/str_cat.h"
#include "absl/strings/string_view.h"
#include "canary_audit/protocol.h"
#include "httplib.h"
#include "json.hpp"

namespace canary_audit {
namespace {

void SetError(httplib::Response& res, int code, absl::string_view message) {
  res.status = code;
  res.set_content(nlohmann::json{{"error", std::string(message)}}.dump(),
                  "application/json");
}

}  // namespace

OracleServer::OracleServer(Oracle& oracle, Vocabulary vocab,
                           std::string model_id)
    : oracle_(oracle),
      vocab_(std::move(vocab)),
      model_id_(std::move(model_id)),
      server_(std::make_unique<httplib::Server>()) {
  InstallHandlers();
}

OracleServer::~OracleServer() { Stop(); }

void OracleServer::InstallHandlers() {
  server_->Get(kMetaPath, [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(EncodeMeta({oracle_.num_classes(), model_id_, "identity"}),
                    "application/json");
  });
  server_->Post(kScorePath, [this](const httplib::Request& req,
                                   httplib::Response& res) {
    auto request = DecodeScoreRequest(req.body);
    if (!request.ok()) {
      SetError(res, kHttpBadRequest, request.status().message());
      return;
    }
    std::vector<TokenIds> ids;
    ids.reserve(request->size());
    for (const TokenStrings& seq : *request) {
      auto encoded = vocab_.Encode(seq);
      if (!encoded.ok()) {
        SetError(res, kHttpUnprocessable, encoded.status().message());
        return;
      }
      ids.push_back(*std::move(encoded));
    }
    auto dists = oracle_.ScoreBatch(ids);
    if (!dists.ok()) {
      SetError(res, 500, dists.status().message());
      return;
    }
    res.set_content(EncodeScoreResponse(*dists), "application/json");
  });
}

absl::StatusOr<int> OracleServer::Start(const std::string& host, int port) {
  if (thread_.joinable()) return absl::FailedPreconditionError("already started");
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    return absl::UnavailableError(absl::StrCat("cannot bind ", host, ":", port));
  }
  host_ = host;
  port_ = bound;
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

absl::Status OracleServer::ServeForever(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) {
    return absl::UnavailableError(absl::StrCat("cannot listen on ", host, ":", port));
  }
  return absl::OkStatus();
}

void OracleServer::Stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string OracleServer::url() const {
  return absl::StrCat("http://", host_, ":", port_);
}

}  // namespace canary_audit
