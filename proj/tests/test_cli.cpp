#include <filesystem>
#include <regex>

#include "conflate/csv.hpp"
#include "conflate/report.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "process.hpp"

using namespace conflate;
namespace fs = std::filesystem;

namespace {

std::string fixture_path(const char* name) { return std::string(CONFLATE_FIXTURES) + "/" + name; }

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("conflate_cli_" + std::to_string(getpid()));
  fs::create_directories(dir);
  return dir / name;
}

proc::Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), CONFLATE_CLI);
  return proc::run(args);
}

proc::Result compute(const char* a, const char* b, const std::string& id, const fs::path& out) {
  return cli({"compute", "--kind", "author", "--id", id, "--sources", fixture_path(a), fixture_path(b), "--out",
              out.string()});
}

std::string conflate_line(const std::string& out) {
  std::smatch m;
  static const std::regex re(R"(^conflate [^\n]*)", std::regex::multiline);
  return std::regex_search(out, m, re) ? m.str() : std::string{};
}

}  // namespace

TEST_CASE("compute prints and writes the conflated profile") {
  const auto out = scratch("ex2.csv");
  const auto r = compute("worked_ex2_scopus.json", "worked_ex2_wos.json", fixture::kOrcid, out);
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out.find("entity author 0000-0002-1825-0097 group=Life Sciences sources=2") != std::string::npos);
  CHECK(r.out.find("scopus articles=1 citations=3 h_index=1") != std::string::npos);
  CHECK(r.out.find("wos articles=1 citations=3 h_index=1") != std::string::npos);
  CHECK(conflate_line(r.out).starts_with("conflate articles=1 citations=3 h_index=1"));

  const auto rows = import_entity_csv(out);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].doi.str() == "10.1016/j.cell.2020.01.001");
  CHECK(rows[0].sources == std::vector<std::string>{"scopus", "wos"});
  CHECK(rows[0].weighted == 3);
  const auto totals = summarize_rows(rows, 2);
  CHECK(conflate_line(r.out).starts_with("conflate articles=" + std::to_string(totals.articles) +
                                         " citations=" + std::to_string(totals.citations) +
                                         " h_index=" + std::to_string(totals.h_index)));
}

TEST_CASE("compute on a publication seen by one of two sources") {
  const auto r = compute("worked_ex1_scopus.json", "worked_ex1_wos.json", fixture::kOrcid, scratch("ex1.csv"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(conflate_line(r.out).starts_with("conflate articles=1 citations=2 h_index=1"));
}

TEST_CASE("compute exit codes") {
  const auto unknown =
      compute("worked_ex2_scopus.json", "worked_ex2_wos.json", "0000-0000-0000-0001", scratch("u.csv"));
  CHECK(unknown.exit_code == 3);
  CHECK(unknown.err.find("0000-0000-0000-0001") != std::string::npos);

  const auto bad_id = compute("worked_ex2_scopus.json", "worked_ex2_wos.json", "not-an-orcid", scratch("b.csv"));
  CHECK(bad_id.exit_code == 2);

  const auto truncated = compute("worked_ex2_scopus.json", "truncated.json", fixture::kOrcid, scratch("t.csv"));
  CHECK(truncated.exit_code == 2);
  CHECK(truncated.err.find("truncated.json") != std::string::npos);

  const auto dup = compute("worked_ex2_scopus.json", "worked_ex2_scopus.json", fixture::kOrcid, scratch("d.csv"));
  CHECK(dup.exit_code == 2);

  CHECK(cli({"compute", "--kind", "author"}).exit_code != 0);
}

TEST_CASE("report groups and summary statistics") {
  const auto out = scratch("groups.csv");
  const auto stats = scratch("stats.csv");
  auto r = cli({"report", "--sources", fixture_path("worked_ex2_scopus.json"), fixture_path("worked_ex2_wos.json"), "--out",
                out.string(), "--stats-out", stats.string()});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  auto groups = csv::parse(read_text_file(out));
  REQUIRE(groups.size() == 2);
  CHECK(groups[0][0] == "group");
  CHECK(groups[1][0] == "Life Sciences");
  CHECK(groups[1][1] == "1");
  CHECK(groups[1].back() == "1");  // conflate_avg_h
  auto st = csv::parse(read_text_file(stats));
  REQUIRE(st.size() == 4);  // header, scopus, wos, conflate
  CHECK(st[3][0] == "conflate");
  CHECK(st[3][3] == "0");  // a single entity has no spread
  CHECK(st[3][4] == "3");

  r = cli({"report", "--sources", fixture_path("two_entities.json"), "--out", out.string(), "--group-by", "group"});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  groups = csv::parse(read_text_file(out));
  REQUIRE(groups.size() == 3);
  CHECK(groups[1][0] == "Engineering");
  CHECK(groups[2][0] == "Sciences");

  r = cli({"report", "--sources", fixture_path("two_entities.json"), "--out", out.string(), "--group-by", "kind"});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  groups = csv::parse(read_text_file(out));
  REQUIRE(groups.size() == 3);
  CHECK(groups[1][0] == "author");
  CHECK(groups[2][0] == "journal");

  CHECK(cli({"report", "--sources", fixture_path("truncated.json"), "--out", out.string()}).exit_code == 2);
}

TEST_CASE("serve, post, mine and resync") {
  const auto csv_path = scratch("three.csv");
  const std::string header = std::string(kEntityCsvHeader) + "\n";
  write_text_file(csv_path, header +
                                "author,0000-0002-1825-0097,g,10.1/a,scopus+wos,2,2,4,3\n"
                                "author,0000-0002-1825-0097,g,10.1/b,scopus,0,3,3,2\n"
                                "author,0000-0002-1825-0097,g,10.1/c,scopus+wos,3,0,3,3\n");

  proc::Server node({CONFLATE_CLI, "serve", "--port", "0", "--difficulty", "2"});
  const std::string url = node.url();

  auto r = cli({"post", csv_path.string(), "--node-url", url});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out == "accepted=3 pending=3\n");

  r = cli({"mine", "--node-url", url});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out.find("block index=1 hash=00") != std::string::npos);
  CHECK(r.out.find("weighted=8 h_index=3") != std::string::npos);
  CHECK(r.out.find("length=2") != std::string::npos);

  r = cli({"mine", "--node-url", url});
  CHECK(r.exit_code == 5);

  r = cli({"resync", "--node-url", url});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out == "replaced=false length=2\n");

  r = cli({"peers", "--peer", "http://127.0.0.1:1", "--node-url", url});
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(r.out == "peers=http://127.0.0.1:1\n");

  r = cli({"chain", "--node-url", url});
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("\"length\": 2") != std::string::npos);

  write_text_file(csv_path, header + "author,0000-0002-1825-0097,g,10.1/a,scopus+wos,2,2,4,4\n");
  CHECK(cli({"post", csv_path.string(), "--node-url", url}).exit_code == 5);

  CHECK(node.stop() == 0);
  CHECK(cli({"mine", "--node-url", url}).exit_code == 4);
}
