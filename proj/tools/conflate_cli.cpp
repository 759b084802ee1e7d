// conflate: compute conflated citation metrics from database snapshots, write
// reports, and run or drive an informetric ledger node.
//
// Exit codes:
//   0  success
//   1  other failure (I/O, bad flags)
//   2  snapshot or CSV parse error, invalid entity id
//   3  entity not found in any snapshot
//   4  cannot reach the node
//   5  the node reported an error

#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "conflate/csv.hpp"
#include "conflate/engine.hpp"
#include "conflate/ingest.hpp"
#include "conflate/ledger.hpp"
#include "conflate/node.hpp"
#include "conflate/report.hpp"
#include "httplib.h"
#include "json.hpp"

namespace {

using namespace conflate;
using nlohmann::json;

constexpr int kExitOther = 1;
constexpr int kExitParse = 2;
constexpr int kExitUnknownEntity = 3;
constexpr int kExitConnection = 4;
constexpr int kExitServer = 5;

std::string default_node_url() { return "http://127.0.0.1:" + std::to_string(kDefaultNodePort); }

std::vector<DatabaseSnapshot> load_all(const std::vector<std::string>& paths) {
  std::vector<std::unique_ptr<SnapshotProvider>> providers;
  for (const auto& p : paths) providers.push_back(std::make_unique<FileSnapshotProvider>(p));
  return collect(providers);
}

std::vector<std::string> source_names(const std::vector<DatabaseSnapshot>& snapshots) {
  std::vector<std::string> names;
  for (const auto& s : snapshots) names.push_back(s.source_name);
  return names;
}

void print_indicators(std::ostream& out, const std::string& name, const Indicators& ind) {
  out << name << " articles=" << ind.articles << " citations=" << ind.citations
      << " h_index=" << ind.h_index << " mean_citations=" << ind.mean_citations << "\n";
}

// --- compute ------------------------------------------------------------------

struct ComputeArgs {
  std::string kind;
  std::string id;
  std::vector<std::string> sources;
  std::string out;
};

int cmd_compute(const ComputeArgs& args) {
  EntityRef wanted;
  try {
    wanted.kind = parse_entity_kind(args.kind);
    wanted.id = args.id;
    wanted.validate();
  } catch (const InvalidEntity& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitParse;
  }

  const auto snapshots = load_all(args.sources);
  const auto names = source_names(snapshots);
  const EntityRef entity = resolve_entity(snapshots, wanted);
  const auto records = assemble(snapshots, entity);
  const EntityMetrics metrics = conflate_entity(entity, records, snapshots.size(), names);
  export_entity_csv(metrics, args.out);

  const auto summary = related_indicators(metrics);
  std::cout << "entity " << to_string(entity.kind) << " " << entity.id;
  if (!entity.group.empty()) std::cout << " group=" << entity.group;
  std::cout << " sources=" << snapshots.size() << "\n";
  for (const auto& [name, ind] : summary.per_source) print_indicators(std::cout, name, ind);
  print_indicators(std::cout, "conflate", summary.conflate);
  std::cout << "wrote " << args.out << " (" << metrics.per_publication.size() << " publications)\n";
  return 0;
}

// --- report -------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> sources;
  std::string group_by = "group";
  std::string out;
  std::string stats_out;
  std::string scatter_source;
  std::string scatter_out;
};

int cmd_report(const ReportArgs& args) {
  const auto snapshots = load_all(args.sources);
  const auto names = source_names(snapshots);

  std::vector<EntityMetrics> metrics;
  for (const auto& entity : list_entities(snapshots)) {
    metrics.push_back(conflate_entity(entity, assemble(snapshots, entity), snapshots.size(), names));
  }
  if (metrics.empty()) {
    std::cerr << "error: the snapshots list no entities\n";
    return kExitParse;
  }

  const GroupKey key = args.group_by == "kind" ? GroupKey(group_by_kind) : GroupKey(group_by_label);
  const auto groups = aggregate(metrics, key);
  const std::string group_csv = format_group_csv(groups);
  const std::string stats_csv = format_stats_csv(summary_stats(metrics));

  write_text_file(args.out, group_csv);
  if (!args.stats_out.empty()) write_text_file(args.stats_out, stats_csv);
  std::cout << group_csv << "\n" << stats_csv;

  if (!args.scatter_source.empty()) {
    const std::string path =
        args.scatter_out.empty() ? args.scatter_source + "_vs_conflate.csv" : args.scatter_out;
    try {
      export_scatter_data(metrics, args.scatter_source, path);
      std::cout << "\nwrote " << path << "\n";
    } catch (const DegenerateFit& err) {
      std::cerr << "warning: no scatter fit: " << err.what() << "\n";
    }
  }
  return 0;
}

// --- serve --------------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = kDefaultNodePort;
  unsigned difficulty = kDefaultDifficulty;
  std::string kind = "author";
  std::uint64_t n_sources = 2;
  std::string persist;
  std::vector<std::string> peers;
  std::optional<std::int64_t> clock;
};

int cmd_serve(const ServeArgs& args) {
  NodeConfig config;
  config.host = args.host;
  config.port = args.port;
  config.difficulty = args.difficulty;
  config.ledger_kind = parse_entity_kind(args.kind);
  config.n_sources = args.n_sources;
  if (!args.persist.empty()) config.persist_path = args.persist;
  config.peers = args.peers;
  if (args.clock) config.clock = fixed_clock(*args.clock);

  // Handle SIGINT/SIGTERM on this thread; worker threads inherit the mask.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  Node node(std::move(config));
  NodeServer server(node);
  const int port = server.start();
  std::cout << "serving " << to_string(node.config().ledger_kind) << " ledger on http://"
            << node.config().host << ":" << port << " difficulty=" << node.config().difficulty
            << std::endl;

  int received = 0;
  sigwait(&signals, &received);
  server.stop();
  return 0;
}

// --- node clients -------------------------------------------------------------

struct ClientResult {
  int exit_code = 0;
  json body;
};

ClientResult call(const std::string& node_url, const std::string& method, const std::string& path,
                  const std::string& body = {}, const std::string& content_type = "application/json") {
  httplib::Client client(node_url);
  client.set_connection_timeout(5);
  client.set_read_timeout(120);
  auto res = method == "GET" ? client.Get(path) : client.Post(path, body, content_type);
  if (!res) {
    std::cerr << "error: cannot reach " << node_url << ": " << httplib::to_string(res.error()) << "\n";
    return {kExitConnection, {}};
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (res->status >= 400) {
    std::cerr << "error: node answered " << res->status << ": " << res->body << "\n";
    return {kExitServer, parsed};
  }
  if (parsed.is_discarded()) {
    std::cerr << "error: node sent a non-JSON response\n";
    return {kExitServer, {}};
  }
  return {0, parsed};
}

int cmd_post(const std::string& file, const std::string& node_url) {
  const std::string csv_text = read_text_file(file);
  auto r = call(node_url, "POST", "/profile", csv_text, "text/plain");
  if (r.exit_code != 0) return r.exit_code;
  std::cout << "accepted=" << r.body.value("accepted", 0) << " pending=" << r.body.value("pending", 0)
            << "\n";
  return 0;
}

int cmd_mine(const std::string& node_url) {
  auto r = call(node_url, "POST", "/mine");
  if (r.exit_code != 0) return r.exit_code;
  for (const auto& b : r.body["blocks"]) {
    std::cout << "block index=" << b["index"] << " hash=" << b["hash"].get<std::string>()
              << " entity=" << b["entity_id"].get<std::string>() << " entries=" << b["entries"]
              << " weighted=" << b["summary"]["weighted"] << " h_index=" << b["summary"]["h_index"]
              << "\n";
  }
  std::cout << "length=" << r.body["length"] << "\n";
  return 0;
}

int cmd_resync(const std::string& node_url) {
  auto r = call(node_url, "POST", "/resync");
  if (r.exit_code != 0) return r.exit_code;
  std::cout << "replaced=" << (r.body["replaced"].get<bool>() ? "true" : "false")
            << " length=" << r.body["length"] << "\n";
  for (const auto& s : r.body["skipped"]) {
    std::cout << "skipped peer=" << s["peer"].get<std::string>()
              << " reason=" << s["reason"].get<std::string>() << "\n";
  }
  return 0;
}

int cmd_peers(const std::vector<std::string>& peers, const std::string& node_url) {
  auto r = peers.empty() ? call(node_url, "GET", "/peers")
                         : call(node_url, "POST", "/peers", json{{"peers", peers}}.dump());
  if (r.exit_code != 0) return r.exit_code;
  std::cout << "peers=";
  bool first = true;
  for (const auto& p : r.body["peers"]) {
    std::cout << (first ? "" : ",") << p.get<std::string>();
    first = false;
  }
  std::cout << "\n";
  return 0;
}

int cmd_chain(const std::string& node_url) {
  auto r = call(node_url, "GET", "/chain");
  if (r.exit_code != 0) return r.exit_code;
  std::cout << r.body.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conflated bibliometrics across citation databases, with an informetric ledger node"};
  app.require_subcommand(1);

  ComputeArgs compute;
  auto* c = app.add_subcommand("compute", "Conflate one entity's metrics and write its entity CSV");
  c->add_option("--kind", compute.kind, "author | organization | journal")->required();
  c->add_option("--id", compute.id, "ORCID iD, organization name or ISSN")->required();
  c->add_option("--sources", compute.sources, "Snapshot file (repeatable)")->required()->expected(1, -1);
  c->add_option("--out", compute.out, "Entity CSV to write")->required();

  ReportArgs report;
  auto* r = app.add_subcommand("report", "Group totals, average h-index and summary statistics");
  r->add_option("--sources", report.sources, "Snapshot file (repeatable)")->required()->expected(1, -1);
  r->add_option("--group-by", report.group_by, "group | kind")
      ->check(CLI::IsMember({"group", "kind"}));
  r->add_option("--out", report.out, "Group summary CSV to write")->required();
  r->add_option("--stats-out", report.stats_out, "Mean / std-dev CSV to write");
  r->add_option("--scatter", report.scatter_source, "Also export <source> vs conflate scatter data");
  r->add_option("--scatter-out", report.scatter_out, "Scatter CSV path");

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Run a ledger node");
  s->add_option("--host", serve.host, "Bind address")->envname("CONFLATE_HOST");
  s->add_option("--port", serve.port, "Listen port (0 picks one)")->envname("CONFLATE_PORT");
  s->add_option("--difficulty", serve.difficulty, "Leading zero hex digits required of block hashes")
      ->envname("CONFLATE_DIFFICULTY")
      ->check(CLI::Range(1, 64));
  s->add_option("--kind", serve.kind, "Ledger kept by this node: author | organization | journal")
      ->envname("CONFLATE_LEDGER")
      ->check(CLI::IsMember({"author", "organization", "journal"}));
  s->add_option("--n-sources", serve.n_sources, "Number of databases behind posted profiles")
      ->envname("CONFLATE_N_SOURCES")
      ->check(CLI::PositiveNumber);
  s->add_option("--persist", serve.persist, "Chain file, loaded at start and rewritten on change")
      ->envname("CONFLATE_PERSIST");
  s->add_option("--peer", serve.peers, "Peer base address, e.g. http://127.0.0.1:8001 (repeatable)")
      ->envname("CONFLATE_PEERS")
      ->delimiter(',');
  s->add_option("--clock", serve.clock, "Fixed block timestamp (seconds since epoch)");

  std::string node_url = default_node_url();
  std::string post_file;
  std::vector<std::string> peer_list;
  auto add_url = [&](CLI::App* sub) {
    sub->add_option("--node-url", node_url, "Node base address")->envname("CONFLATE_NODE_URL");
  };
  auto* post = app.add_subcommand("post", "POST an entity CSV to a node");
  post->add_option("file,--file", post_file, "Entity CSV")->required();
  add_url(post);
  auto* mine = app.add_subcommand("mine", "Ask a node to mine its pending entries");
  add_url(mine);
  auto* resync = app.add_subcommand("resync", "Ask a node to adopt the longest valid peer chain");
  add_url(resync);
  auto* peers = app.add_subcommand("peers", "Register peers with a node, or list them");
  peers->add_option("--peer", peer_list, "Peer base address (repeatable)");
  add_url(peers);
  auto* chain = app.add_subcommand("chain", "Print a node's chain");
  add_url(chain);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c) return cmd_compute(compute);
    if (*r) return cmd_report(report);
    if (*s) return cmd_serve(serve);
    if (*post) return cmd_post(post_file, node_url);
    if (*mine) return cmd_mine(node_url);
    if (*resync) return cmd_resync(node_url);
    if (*peers) return cmd_peers(peer_list, node_url);
    if (*chain) return cmd_chain(node_url);
  } catch (const UnknownEntity& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUnknownEntity;
  } catch (const ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitParse;
  } catch (const DuplicateEntity& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitParse;
  } catch (const DuplicateSource& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitParse;
  } catch (const csv::CsvError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitParse;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
