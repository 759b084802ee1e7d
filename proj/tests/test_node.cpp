#include <algorithm>
#include <thread>

#include "conflate/node.hpp"
#include "conflate/report.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "oracles.hpp"

using namespace conflate;
using nlohmann::json;

namespace {

const std::string kHeader = std::string(kEntityCsvHeader) + "\n";

std::string row(const std::string& doi, int common, int unique, int weighted,
                const std::string& orcid = fixture::kOrcid) {
  return "author," + orcid + ",Life Sciences," + doi + ",scopus+wos," + std::to_string(common) + "," +
         std::to_string(unique) + "," + std::to_string(common + unique) + "," + std::to_string(weighted) +
         "\n";
}

NodeConfig test_config(unsigned difficulty = 2) {
  NodeConfig c;
  c.port = 0;
  c.difficulty = difficulty;
  c.clock = fixed_clock(1'700'000'000);
  c.peer_timeout = std::chrono::milliseconds(500);
  return c;
}

json body(const Response& r) { return json::parse(r.body); }

}  // namespace

TEST_CASE("post_profile accepts rows as pending entries") {
  Node node(test_config());
  auto r = node.post_profile(kHeader + row("10.1/a", 2, 2, 3) + row("10.1/b", 0, 3, 2) + row("10.1/c", 3, 0, 3));
  CHECK(r.status == 200);
  CHECK(body(r)["accepted"] == 3);
  CHECK(node.pending_count() == 3);

  auto empty = node.post_profile(kHeader);
  CHECK(empty.status == 200);
  CHECK(body(empty)["accepted"] == 0);
  CHECK(node.pending_count() == 3);
}

TEST_CASE("post_profile rejects malformed rows with diagnostics") {
  Node node(test_config());
  auto r = node.post_profile(kHeader + row("10.1/a", 2, 2, 3) +
                             "author,0000-0002-1825-0097,g,10.1/b,scopus+wos,1,1,3,2\n");
  CHECK(r.status == 400);
  CHECK(body(r)["row"] == 3);
  CHECK(body(r)["column"] == 8);
  CHECK(node.pending_count() == 0);

  auto weighted = node.post_profile(kHeader + row("10.1/a", 2, 2, 4));
  CHECK(weighted.status == 400);
  CHECK(body(weighted)["column"] == 9);

  auto kind = node.post_profile(kHeader + "journal,0028-0836,g,10.1/a,scopus,0,1,1,1\n");
  CHECK(kind.status == 400);
  CHECK(node.post_profile("garbage").status == 400);
}

TEST_CASE("mine commits pending entries once") {
  Node node(test_config());
  node.post_profile(kHeader + row("10.1016/j.cell.2020.01.001", 2, 2, 3));
  auto r = node.mine();
  REQUIRE(r.status == 200);
  const auto b = body(r)["blocks"][0];
  CHECK(b["index"] == 1);
  CHECK(b["summary"]["weighted"] == 3);
  CHECK(b["summary"]["h_index"] == 1);
  CHECK(b["entity_id"] == fixture::kOrcid);
  CHECK(body(r)["length"] == 2);
  CHECK(node.pending_count() == 0);

  CHECK(node.mine().status == 409);

  const auto chain = chain_from_json(body(node.chain()));
  CHECK(chain.blocks.size() == 2);
  CHECK(chain.blocks[1].hash == b["hash"]);
  CHECK(validate_chain(chain).valid);
}

TEST_CASE("mine makes one block per entity") {
  Node node(test_config(1));
  node.post_profile(kHeader + row("10.1/a", 1, 0, 1) + row("10.1/b", 1, 0, 1, "0000-0001-0000-0002") +
                    row("10.1/c", 1, 1, 2));
  auto r = node.mine();
  REQUIRE(r.status == 200);
  CHECK(body(r)["blocks"].size() == 2);
  const auto chain = node.snapshot();
  CHECK(chain->blocks[1].entries.size() == 2);
  CHECK(chain->blocks[2].entity_id == "0000-0001-0000-0002");
}

TEST_CASE("fresh node serves genesis") {
  Node node(test_config());
  const auto j = body(node.chain());
  CHECK(j["length"] == 1);
  CHECK(j["difficulty"] == 2);
  CHECK(validate_chain(chain_from_json(j)).valid);
}

TEST_CASE("peer registration") {
  CHECK(parse_peer_address("http://127.0.0.1:8001/") == std::optional<std::string>("http://127.0.0.1:8001"));
  CHECK(parse_peer_address("http://node-b:8000") == std::optional<std::string>("http://node-b:8000"));
  CHECK_FALSE(parse_peer_address("127.0.0.1:8001").has_value());
  CHECK_FALSE(parse_peer_address("http://host:99999").has_value());
  CHECK_FALSE(parse_peer_address("ftp://host:1").has_value());

  auto cfg = test_config();
  cfg.port = 8123;
  Node node(cfg);
  auto r = node.register_peers(R"({"peers": ["http://127.0.0.1:9001", "http://localhost:8123"]})");
  CHECK(r.status == 200);
  CHECK(node.peers() == std::vector<std::string>{"http://127.0.0.1:9001"});
  CHECK(node.register_peers(R"({"peers": ["nope"]})").status == 400);
  CHECK(node.register_peers("{").status == 400);
  CHECK(node.register_peers(R"({"address": "http://10.0.0.2:8000"})").status == 200);
  CHECK(node.peers().size() == 2);
}

TEST_CASE("resync over HTTP") {
  Node a(test_config());
  NodeServer server_a(a);
  const int port_a = server_a.start();
  a.post_profile(kHeader + row("10.1/a", 2, 2, 3));
  REQUIRE(a.mine().status == 200);
  a.post_profile(kHeader + row("10.1/b", 0, 1, 1));
  REQUIRE(a.mine().status == 200);

  Node b(test_config());
  SUBCASE("no peers") {
    const auto r = body(b.resync());
    CHECK(r["replaced"] == false);
    CHECK(r["length"] == 1);
  }
  SUBCASE("longer peer chain is adopted, then resync is idempotent") {
    b.register_peers(json{{"peers", {"http://127.0.0.1:" + std::to_string(port_a)}}}.dump());
    const auto r = body(b.resync());
    CHECK(r["replaced"] == true);
    CHECK(r["length"] == 3);
    CHECK(*b.snapshot() == *a.snapshot());
    CHECK(body(b.resync())["replaced"] == false);
  }
  SUBCASE("unreachable peers are skipped") {
    b.register_peers(R"({"peers": ["http://127.0.0.1:1"]})");
    const auto r = body(b.resync());
    CHECK(r["replaced"] == false);
    CHECK(r["skipped"].size() == 1);
  }

  SUBCASE("HTTP surface") {
    httplib::Client client("127.0.0.1", port_a);
    auto chain = client.Get("/chain");
    REQUIRE(chain);
    CHECK(chain->status == 200);
    CHECK(chain->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(json::parse(chain->body)["length"] == 3);
    auto mine = client.Post("/mine", "", "application/json");
    REQUIRE(mine);
    CHECK(mine->status == 409);
    auto post = client.Post("/profile", kHeader + row("10.1/z", 1, 1, 2), "text/plain");
    REQUIRE(post);
    CHECK(json::parse(post->body)["accepted"] == 1);
    auto bad = client.Post("/profile", "x,y\n", "text/plain");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    auto options = client.Options("/profile");
    REQUIRE(options);
    CHECK(options->status == 204);
  }
  server_a.stop();
}

TEST_CASE("concurrent posts then one mine keep every entry exactly once") {
  Node node(test_config(1));
  NodeServer server(node);
  const int port = server.start();

  constexpr int kClients = 8;
  constexpr int kRowsEach = 5;
  std::vector<std::thread> clients;
  for (int c = 0; c < kClients; ++c) {
    clients.emplace_back([c, port] {
      httplib::Client client("127.0.0.1", port);
      std::string csv = kHeader;
      for (int i = 0; i < kRowsEach; ++i) {
        csv += row("10.1/c" + std::to_string(c) + "-" + std::to_string(i), i, 1, i + 1);
      }
      auto res = client.Post("/profile", csv, "text/plain");
      REQUIRE(res);
      CHECK(res->status == 200);
    });
  }
  for (auto& t : clients) t.join();

  httplib::Client client("127.0.0.1", port);
  auto mined = client.Post("/mine", "", "application/json");
  REQUIRE(mined);
  REQUIRE(mined->status == 200);
  const auto chain = node.snapshot();
  REQUIRE(chain->blocks.size() == 2);
  std::vector<std::string> dois;
  for (const auto& e : chain->blocks[1].entries) dois.push_back(e.record_doi.str());
  std::sort(dois.begin(), dois.end());
  CHECK(dois.size() == kClients * kRowsEach);
  CHECK(std::adjacent_find(dois.begin(), dois.end()) == dois.end());
  server.stop();
}

TEST_CASE("persistence survives a restart") {
  const auto path = std::filesystem::temp_directory_path() / "conflate_test_node_chain.jsonl";
  std::filesystem::remove(path);
  auto cfg = test_config();
  cfg.persist_path = path;
  {
    Node node(cfg);
    node.post_profile(kHeader + row("10.1/a", 2, 2, 3));
    REQUIRE(node.mine().status == 200);
  }
  Node restarted(cfg);
  CHECK(restarted.snapshot()->blocks.size() == 2);

  auto journal = cfg;
  journal.ledger_kind = EntityKind::Journal;
  CHECK_THROWS_AS(Node{journal}, LedgerError);

  std::string text = read_text_file(path);
  text[text.find("\"weighted\":3")+11] = '4';
  write_text_file(path, text);
  CHECK_THROWS_AS(Node{cfg}, LedgerError);
  std::filesystem::remove(path);
}
