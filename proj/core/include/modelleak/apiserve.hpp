// Copyright 2026 The Modelleak Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MODELLEAK_APISERVE_HPP_
#define MODELLEAK_APISERVE_HPP_

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "modelleak/error.hpp"
#include "modelleak/victim.hpp"

namespace modelleak {

// Transient transport failure (connection refused, reset). The client
// retries these; other ApiErrors surface immediately.
class TransportError : public ApiError {
 public:
  using ApiError::ApiError;
};

struct ServeConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  size_t max_batch = 256;
};

// Runs the victim behind HTTP endpoints:
//   POST /v1/predict  {"texts": [...]} -> {"posteriors": [...],
//                                          "model_info": {"num_classes": C}}
//   GET  /v1/info     num_classes and defense kind only
//   GET  /v1/health   "ok"
// Malformed bodies get 400, oversized batches 413. The server owns a
// copy of the victim; requests are handled concurrently.
class ApiServer {
 public:
  ApiServer(VictimModel victim, const ServeConfig& cfg);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  int port() const;
  std::string host() const;
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<ApiServer> serve(VictimModel victim,
                                 const ServeConfig& cfg = {});

// Attacker-side query accounting. Check-and-add is atomic, so totals
// stay exact under concurrent clients.
class BudgetLedger {
 public:
  explicit BudgetLedger(size_t max_queries) : max_queries_(max_queries) {}

  size_t max_queries() const { return max_queries_; }
  size_t used() const;
  size_t remaining() const;
  bool try_spend(size_t n);
  void refund(size_t n);

 private:
  size_t max_queries_;
  size_t used_ = 0;
  mutable std::mutex mu_;
};

// One prediction API seen from the attacker side.
class Transport {
 public:
  virtual ~Transport() = default;
  // Posteriors for a batch of raw texts, in order. Throws
  // TransportError on transient failure, ApiError otherwise.
  virtual std::vector<Vec> predict_batch(
      const std::vector<std::string>& texts) = 0;
};

// In-process transport: same tokenize/predict path as the server, no
// sockets. Experiments default to this.
class DirectTransport : public Transport {
 public:
  explicit DirectTransport(const VictimModel& victim) : victim_(&victim) {}
  std::vector<Vec> predict_batch(
      const std::vector<std::string>& texts) override;

 private:
  const VictimModel* victim_;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(std::string host, int port);
  std::vector<Vec> predict_batch(
      const std::vector<std::string>& texts) override;
  nlohmann::json get_info();

 private:
  std::string host_;
  int port_;
};

struct ClientConfig {
  size_t batch_size = 32;
  int max_retries = 3;
};

// Spends |docs| from the ledger up front (refunded if the transport
// ultimately fails), batches the texts, and returns posteriors in
// document order.
std::vector<Vec> client_query(Transport& transport,
                              const std::vector<Document>& docs,
                              BudgetLedger& ledger,
                              const ClientConfig& cfg = {});

}  // namespace modelleak

#endif  // MODELLEAK_APISERVE_HPP_
