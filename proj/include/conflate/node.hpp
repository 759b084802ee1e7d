#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "conflate/ledger.hpp"

namespace httplib {
class Server;
}

namespace conflate {

inline constexpr int kDefaultNodePort = 8000;
inline constexpr int kDefaultUiPort = 5000;

struct NodeConfig {
  std::string host = "127.0.0.1";
  int port = kDefaultNodePort;
  unsigned difficulty = kDefaultDifficulty;
  EntityKind ledger_kind = EntityKind::Author;
  std::uint64_t n_sources = 2;  // databases behind every posted profile
  std::optional<std::filesystem::path> persist_path;
  std::vector<std::string> peers;
  Clock clock = system_clock();
  std::chrono::milliseconds peer_timeout{3000};
};

/// HTTP status plus a JSON body.
struct Response {
  int status = 200;
  std::string body;
};

/// Normalizes "http://host:port" (a trailing slash is dropped). Returns
/// nullopt for anything else.
std::optional<std::string> parse_peer_address(std::string_view address);

/// Ledger node state and request handlers, independent of the transport.
///
/// post/mine/resync/register serialize through one mutex. GET /chain reads
/// the most recently published chain snapshot and never waits on mining.
class Node {
 public:
  explicit Node(NodeConfig config);

  Response post_profile(std::string_view csv_body);
  Response mine();
  Response chain() const;
  Response register_peers(std::string_view json_body);
  Response resync();

  std::shared_ptr<const Chain> snapshot() const;
  std::size_t pending_count() const;
  std::vector<std::string> peers() const;
  const NodeConfig& config() const noexcept { return config_; }

  /// Records the port actually bound, so the node refuses itself as a peer.
  void set_bound_port(int port);

 private:
  struct PendingEntry {
    std::string entity_id;
    LedgerEntry entry;
  };

  bool is_self(const std::string& address) const;
  void publish(Chain chain);  // requires mutation_mutex_

  NodeConfig config_;
  mutable std::mutex mutation_mutex_;
  Chain chain_;
  std::vector<PendingEntry> pending_;
  std::set<std::string> peers_;
  int bound_port_;

  mutable std::mutex snapshot_mutex_;
  std::shared_ptr<const Chain> snapshot_;
};

/// Serves a Node over HTTP/1.1:
///   POST /profile  entity CSV body  -> {"accepted": n, "pending": m}
///   POST /mine                      -> {"blocks": [...], "length": n}
///   GET  /chain                     -> {"length": n, "difficulty": d, "blocks": [...]}
///   POST /peers    {"peers": [...]} -> {"peers": [...]}
///   POST /resync                    -> {"replaced": b, "length": n, "skipped": [...]}
class NodeServer {
 public:
  explicit NodeServer(Node& node);
  ~NodeServer();
  NodeServer(const NodeServer&) = delete;
  NodeServer& operator=(const NodeServer&) = delete;

  /// Binds host:port (port 0 picks a free one) and serves on a background
  /// thread. Returns the bound port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  int bind();

  Node& node_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace conflate
