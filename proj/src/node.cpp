#include "conflate/node.hpp"

#include <regex>

#include "conflate/csv.hpp"
#include "conflate/report.hpp"
#include "httplib.h"
#include "json.hpp"

namespace conflate {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

Response json_response(int status, const ordered_json& body) { return {status, body.dump()}; }

Response error_response(int status, const std::string& message) {
  return json_response(status, ordered_json{{"error", message}});
}

ordered_json block_brief(const Block& b) {
  return ordered_json{
      {"index", b.index},
      {"hash", b.hash},
      {"previous_hash", b.previous_hash},
      {"timestamp", b.timestamp},
      {"ledger_kind", to_string(b.ledger_kind)},
      {"entity_id", b.entity_id},
      {"entries", b.entries.size()},
      {"summary",
       ordered_json{{"common", b.summary.common},
                    {"unique", b.summary.unique},
                    {"weighted", b.summary.weighted},
                    {"h_index", b.summary.h_index}}},
  };
}

}  // namespace

std::optional<std::string> parse_peer_address(std::string_view address) {
  static const std::regex pattern(R"(^http://([A-Za-z0-9.\-]+|\[[0-9A-Fa-f:]+\]):([0-9]{1,5})/?$)");
  std::cmatch m;
  if (!std::regex_match(address.begin(), address.end(), m, pattern)) return std::nullopt;
  const int port = std::stoi(m[2].str());
  if (port < 1 || port > 65535) return std::nullopt;
  return "http://" + m[1].str() + ":" + std::to_string(port);
}

// --- Node -----------------------------------------------------------------------

Node::Node(NodeConfig config) : config_(std::move(config)), bound_port_(config_.port) {
  if (config_.n_sources == 0) throw std::invalid_argument("n_sources must be positive");
  if (config_.persist_path && std::filesystem::exists(*config_.persist_path)) {
    Chain loaded = load_chain(*config_.persist_path, config_.difficulty);
    if (auto verdict = validate_chain(loaded); !verdict) {
      throw LedgerError("persisted chain is invalid at block " +
                        std::to_string(verdict.first_invalid.value_or(0)) + ": " +
                        std::string(to_string(verdict.failure)));
    }
    if (loaded.kind() != config_.ledger_kind) {
      throw LedgerError("persisted chain is a " + std::string(to_string(loaded.kind())) + " ledger");
    }
    chain_ = std::move(loaded);
  } else {
    chain_ = genesis(config_.difficulty, config_.ledger_kind, 0);
  }
  for (const auto& p : config_.peers) {
    auto address = parse_peer_address(p);
    if (!address) throw std::invalid_argument("malformed peer address '" + p + "'");
    peers_.insert(*address);
  }
  snapshot_ = std::make_shared<const Chain>(chain_);
}

void Node::set_bound_port(int port) {
  std::lock_guard lock(mutation_mutex_);
  bound_port_ = port;
  std::erase_if(peers_, [&](const std::string& p) { return is_self(p); });
}

bool Node::is_self(const std::string& address) const {
  const std::string port = ":" + std::to_string(bound_port_);
  for (const auto& host : {config_.host, std::string("127.0.0.1"), std::string("localhost"),
                           std::string("0.0.0.0")}) {
    if (address == "http://" + host + port) return true;
  }
  return false;
}

void Node::publish(Chain chain) {
  chain_ = std::move(chain);
  if (config_.persist_path) save_chain(chain_, *config_.persist_path);
  auto snap = std::make_shared<const Chain>(chain_);
  std::lock_guard lock(snapshot_mutex_);
  snapshot_ = std::move(snap);
}

std::shared_ptr<const Chain> Node::snapshot() const {
  std::lock_guard lock(snapshot_mutex_);
  return snapshot_;
}

std::size_t Node::pending_count() const {
  std::lock_guard lock(mutation_mutex_);
  return pending_.size();
}

std::vector<std::string> Node::peers() const {
  std::lock_guard lock(mutation_mutex_);
  return {peers_.begin(), peers_.end()};
}

Response Node::post_profile(std::string_view csv_body) {
  std::vector<PendingEntry> accepted;
  try {
    const auto rows = parse_entity_csv(csv_body);
    accepted.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& row = rows[i];
      if (row.kind != config_.ledger_kind) {
        throw csv::CsvError("this node keeps the " + std::string(to_string(config_.ledger_kind)) +
                                " ledger, row is a " + std::string(to_string(row.kind)),
                            i + 2, 1);
      }
      try {
        accepted.push_back({row.entity_id, entry_from_csv_row(row, config_.n_sources)});
      } catch (const InvalidEntry& err) {
        throw csv::CsvError(err.what(), i + 2, 9);
      }
    }
  } catch (const csv::CsvError& err) {
    return json_response(400, ordered_json{{"error", err.what()}, {"row", err.row()}, {"column", err.column()}});
  }

  std::lock_guard lock(mutation_mutex_);
  for (auto& p : accepted) pending_.push_back(std::move(p));
  return json_response(200, ordered_json{{"accepted", accepted.size()}, {"pending", pending_.size()}});
}

Response Node::mine() {
  std::lock_guard lock(mutation_mutex_);
  if (pending_.empty()) return error_response(409, "no pending entries to mine");

  // One block per entity, in order of first posting.
  std::vector<std::string> order;
  std::map<std::string, std::vector<LedgerEntry>> by_entity;
  for (auto& p : pending_) {
    auto [it, inserted] = by_entity.try_emplace(p.entity_id);
    if (inserted) order.push_back(p.entity_id);
    it->second.push_back(p.entry);
  }

  Chain next = chain_;
  ordered_json blocks = ordered_json::array();
  try {
    for (const auto& entity_id : order) {
      Block b = mine_block(next, by_entity[entity_id], BlockMeta{config_.ledger_kind, entity_id},
                           config_.clock);
      blocks.push_back(block_brief(b));
      next.blocks.push_back(std::move(b));
    }
  } catch (const LedgerError& err) {
    return error_response(500, err.what());
  }
  publish(std::move(next));
  pending_.clear();
  return json_response(200, ordered_json{{"blocks", std::move(blocks)}, {"length", chain_.blocks.size()}});
}

Response Node::chain() const { return json_response(200, chain_to_json(*snapshot())); }

Response Node::register_peers(std::string_view json_body) {
  std::vector<std::string> requested;
  try {
    const json body = json::parse(json_body);
    if (body.contains("address") && body["address"].is_string()) {
      requested.push_back(body["address"].get<std::string>());
    } else if (body.contains("peers") && body["peers"].is_array()) {
      for (const auto& p : body["peers"]) {
        if (!p.is_string()) return error_response(400, "peers must be strings");
        requested.push_back(p.get<std::string>());
      }
    } else {
      return error_response(400, "expected {\"peers\": [...]} or {\"address\": \"...\"}");
    }
  } catch (const json::exception& err) {
    return error_response(400, err.what());
  }

  std::vector<std::string> normalized;
  for (const auto& r : requested) {
    auto address = parse_peer_address(r);
    if (!address) return error_response(400, "malformed peer address '" + r + "'");
    normalized.push_back(*address);
  }

  std::lock_guard lock(mutation_mutex_);
  for (auto& a : normalized) {
    if (!is_self(a)) peers_.insert(std::move(a));
  }
  ordered_json list = ordered_json::array();
  for (const auto& p : peers_) list.push_back(p);
  return json_response(200, ordered_json{{"peers", std::move(list)}});
}

Response Node::resync() {
  const auto targets = peers();
  std::vector<Chain> candidates;
  ordered_json skipped = ordered_json::array();

  for (const auto& peer : targets) {
    httplib::Client client(peer);
    const auto timeout = config_.peer_timeout;
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto res = client.Get("/chain");
    if (!res) {
      skipped.push_back(ordered_json{{"peer", peer}, {"reason", httplib::to_string(res.error())}});
      continue;
    }
    if (res->status != 200) {
      skipped.push_back(ordered_json{{"peer", peer}, {"reason", "HTTP " + std::to_string(res->status)}});
      continue;
    }
    try {
      candidates.push_back(chain_from_json(json::parse(res->body)));
    } catch (const std::exception& err) {
      skipped.push_back(ordered_json{{"peer", peer}, {"reason", err.what()}});
    }
  }

  std::lock_guard lock(mutation_mutex_);
  Chain best = resolve(chain_, candidates);
  const bool replaced = best != chain_;
  if (replaced) publish(std::move(best));
  return json_response(200, ordered_json{{"replaced", replaced},
                                         {"length", chain_.blocks.size()},
                                         {"skipped", std::move(skipped)}});
}

// --- NodeServer -----------------------------------------------------------------

NodeServer::NodeServer(Node& node) : node_(node), server_(std::make_unique<httplib::Server>()) {
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };

  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server_->Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server_->Post("/profile", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, node_.post_profile(req.body));
  });
  server_->Post("/mine", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, node_.mine());
  });
  server_->Get("/chain", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, node_.chain());
  });
  server_->Post("/peers", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, node_.register_peers(req.body));
  });
  server_->Get("/peers", [this, reply](const httplib::Request&, httplib::Response& res) {
    ordered_json list = ordered_json::array();
    for (const auto& p : node_.peers()) list.push_back(p);
    reply(res, json_response(200, ordered_json{{"peers", std::move(list)}}));
  });
  server_->Post("/resync", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, node_.resync());
  });
}

NodeServer::~NodeServer() { stop(); }

int NodeServer::bind() {
  const auto& cfg = node_.config();
  if (cfg.port == 0) {
    port_ = server_->bind_to_any_port(cfg.host);
  } else {
    port_ = server_->bind_to_port(cfg.host, cfg.port) ? cfg.port : -1;
  }
  if (port_ < 0) {
    throw std::runtime_error("cannot bind " + cfg.host + ":" + std::to_string(cfg.port));
  }
  node_.set_bound_port(port_);
  return port_;
}

int NodeServer::start() {
  const int port = bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port;
}

void NodeServer::run() {
  bind();
  server_->listen_after_bind();
}

void NodeServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace conflate
