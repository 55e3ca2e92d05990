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

#include "modelleak/apiserve.hpp"

#include <thread>
#include <utility>

#include <httplib.h>

namespace modelleak {

namespace {

using nlohmann::json;

// Shared by the HTTP handler and the direct transport so both paths
// produce byte-identical posteriors for the same text.
Vec predict_text(const VictimModel& victim, const std::string& text) {
  Document doc;
  doc.tokens = tokenize(text);
  if (doc.tokens.empty()) {
    throw InvalidDocument("text has no tokens");
  }
  return predict(victim, doc);
}

std::vector<std::string> parse_texts(const std::string& body) {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!req.is_object() || !req.contains("texts") ||
      !req.at("texts").is_array()) {
    throw ParseError("request must be {\"texts\": [...]}");
  }
  std::vector<std::string> texts;
  for (const json& t : req.at("texts")) {
    if (!t.is_string()) throw ParseError("every text must be a string");
    texts.push_back(t.get<std::string>());
  }
  return texts;
}

void set_error(httplib::Response& res, int status, const std::string& msg) {
  res.status = status;
  json body;
  body["error"] = msg;
  res.set_content(body.dump(), "application/json");
}

}  // namespace

struct ApiServer::Impl {
  VictimModel victim;
  ServeConfig cfg;
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;

  Impl(VictimModel v, const ServeConfig& c) : victim(std::move(v)), cfg(c) {
    if (!victim.model.trained) {
      throw StartupError("refusing to serve an untrained victim");
    }

    server.Get("/v1/health",
               [](const httplib::Request&, httplib::Response& res) {
                 res.set_content("ok", "text/plain");
               });

    server.Get("/v1/info",
               [this](const httplib::Request&, httplib::Response& res) {
                 json info;
                 info["num_classes"] = victim.model.config.num_classes;
                 info["defense"] = defense_kind(victim.defense);
                 res.set_content(info.dump(), "application/json");
               });

    server.Post("/v1/predict", [this](const httplib::Request& req,
                                      httplib::Response& res) {
      std::vector<std::string> texts;
      try {
        texts = parse_texts(req.body);
      } catch (const ParseError& e) {
        set_error(res, 400, e.what());
        return;
      }
      if (texts.size() > cfg.max_batch) {
        set_error(res, 413,
                  "batch of " + std::to_string(texts.size()) +
                      " exceeds the limit of " + std::to_string(cfg.max_batch));
        return;
      }
      json posteriors = json::array();
      try {
        for (const std::string& text : texts) {
          posteriors.push_back(predict_text(victim, text));
        }
      } catch (const InvalidDocument& e) {
        set_error(res, 400, e.what());
        return;
      }
      json body;
      body["posteriors"] = std::move(posteriors);
      body["model_info"] = {
          {"num_classes", victim.model.config.num_classes}};
      res.set_content(body.dump(), "application/json");
    });

    if (cfg.port == 0) {
      bound_port = server.bind_to_any_port(cfg.host);
      if (bound_port <= 0) {
        throw StartupError("cannot bind to " + cfg.host);
      }
    } else {
      if (!server.bind_to_port(cfg.host, cfg.port)) {
        throw StartupError("cannot bind to " + cfg.host + ":" +
                           std::to_string(cfg.port));
      }
      bound_port = cfg.port;
    }
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }

  ~Impl() { shutdown(); }

  void shutdown() {
    if (thread.joinable()) {
      server.stop();
      thread.join();
    }
  }
};

ApiServer::ApiServer(VictimModel victim, const ServeConfig& cfg)
    : impl_(std::make_unique<Impl>(std::move(victim), cfg)) {}

ApiServer::~ApiServer() = default;

int ApiServer::port() const { return impl_->bound_port; }

std::string ApiServer::host() const { return impl_->cfg.host; }

void ApiServer::stop() { impl_->shutdown(); }

std::unique_ptr<ApiServer> serve(VictimModel victim, const ServeConfig& cfg) {
  return std::make_unique<ApiServer>(std::move(victim), cfg);
}

size_t BudgetLedger::used() const {
  std::lock_guard<std::mutex> lock(mu_);
  return used_;
}

size_t BudgetLedger::remaining() const {
  std::lock_guard<std::mutex> lock(mu_);
  return max_queries_ - used_;
}

bool BudgetLedger::try_spend(size_t n) {
  std::lock_guard<std::mutex> lock(mu_);
  if (used_ + n > max_queries_) return false;
  used_ += n;
  return true;
}

void BudgetLedger::refund(size_t n) {
  std::lock_guard<std::mutex> lock(mu_);
  used_ = n > used_ ? 0 : used_ - n;
}

std::vector<Vec> DirectTransport::predict_batch(
    const std::vector<std::string>& texts) {
  std::vector<Vec> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    out.push_back(predict_text(*victim_, text));
  }
  return out;
}

HttpTransport::HttpTransport(std::string host, int port)
    : host_(std::move(host)), port_(port) {}

std::vector<Vec> HttpTransport::predict_batch(
    const std::vector<std::string>& texts) {
  httplib::Client client(host_, port_);
  client.set_read_timeout(30, 0);
  json req;
  req["texts"] = texts;
  const httplib::Result res =
      client.Post("/v1/predict", req.dump(), "application/json");
  if (!res) {
    throw TransportError("no response from " + host_ + ":" +
                         std::to_string(port_));
  }
  if (res->status != 200) {
    throw ApiError("predict returned status " + std::to_string(res->status) +
                   ": " + res->body);
  }
  json body;
  try {
    body = json::parse(res->body);
  } catch (const json::exception& e) {
    throw ApiError(std::string("unparsable response: ") + e.what());
  }
  if (!body.contains("posteriors") || !body.at("posteriors").is_array()) {
    throw ApiError("response is missing 'posteriors'");
  }
  std::vector<Vec> out;
  for (const json& p : body.at("posteriors")) {
    out.push_back(p.get<Vec>());
  }
  if (out.size() != texts.size()) {
    throw ApiError("response holds " + std::to_string(out.size()) +
                   " posteriors for " + std::to_string(texts.size()) +
                   " texts");
  }
  return out;
}

json HttpTransport::get_info() {
  httplib::Client client(host_, port_);
  const httplib::Result res = client.Get("/v1/info");
  if (!res) {
    throw TransportError("no response from " + host_ + ":" +
                         std::to_string(port_));
  }
  if (res->status != 200) {
    throw ApiError("info returned status " + std::to_string(res->status));
  }
  return json::parse(res->body);
}

std::vector<Vec> client_query(Transport& transport,
                              const std::vector<Document>& docs,
                              BudgetLedger& ledger, const ClientConfig& cfg) {
  if (docs.empty()) return {};
  if (cfg.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!ledger.try_spend(docs.size())) {
    throw BudgetExhausted("budget " + std::to_string(ledger.max_queries()) +
                          " cannot cover " + std::to_string(docs.size()) +
                          " more queries (used " +
                          std::to_string(ledger.used()) + ")");
  }

  std::vector<Vec> posteriors;
  posteriors.reserve(docs.size());
  try {
    for (size_t start = 0; start < docs.size(); start += cfg.batch_size) {
      const size_t end = std::min(start + cfg.batch_size, docs.size());
      std::vector<std::string> texts;
      texts.reserve(end - start);
      for (size_t i = start; i < end; ++i) texts.push_back(docs[i].text());

      int attempt = 0;
      for (;;) {
        try {
          std::vector<Vec> batch = transport.predict_batch(texts);
          for (Vec& p : batch) posteriors.push_back(std::move(p));
          break;
        } catch (const TransportError&) {
          if (++attempt > cfg.max_retries) throw;
        }
      }
    }
  } catch (...) {
    ledger.refund(docs.size());
    throw;
  }
  return posteriors;
}

}  // namespace modelleak
