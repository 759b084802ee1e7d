#include "conflate/ledger.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "conflate/engine.hpp"
#include "conflate/report.hpp"
#include "conflate/sha256.hpp"

namespace conflate {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<std::string> split_tag(std::string_view tag) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = tag.find('+', start);
    out.emplace_back(tag.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string join_sources(const std::vector<std::string>& names) {
  std::string out;
  for (const auto& n : names) {
    if (!out.empty()) out += '+';
    out += n;
  }
  return out;
}

class ByteWriter {
 public:
  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_ += static_cast<char>((v >> shift) & 0xff);
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    out_.append(s);
  }
  std::string& bytes() { return out_; }

 private:
  std::string out_;
};

void write_prefix(ByteWriter& w, const Block& b) {
  w.u64(b.index);
  w.i64(b.timestamp);
  w.str(to_string(b.ledger_kind));
  w.str(b.entity_id);
  w.u64(b.entries.size());
  for (const auto& e : b.entries) {
    w.str(e.record_doi.str());
    w.u64(e.sources.size());
    for (const auto& s : e.sources) w.str(s);
    w.u64(e.n_sources);
    w.u64(e.common_count);
    w.u64(e.unique_count);
    w.u64(e.union_count);
    w.u64(e.weighted_citations);
    w.u64(e.transactions.size());
    for (const auto& t : e.transactions) {
      w.str(t.citer.str());
      w.str(t.source);
    }
  }
  w.u64(b.summary.common);
  w.u64(b.summary.unique);
  w.u64(b.summary.weighted);
  w.u64(b.summary.h_index);
  w.str(b.previous_hash);
}

void append_nonce(std::string& bytes, std::uint64_t nonce) {
  for (int shift = 56; shift >= 0; shift -= 8) bytes += static_cast<char>((nonce >> shift) & 0xff);
}

// --- strict JSON access -------------------------------------------------------

[[noreturn]] void bad_json(const std::string& what) { throw LedgerError("malformed block: " + what); }

void expect_keys(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) bad_json(std::string(where) + " is not an object");
  if (j.size() != keys.size()) bad_json(std::string(where) + " has unexpected keys");
  for (const char* k : keys) {
    if (!j.contains(k)) bad_json(std::string(where) + " lacks \"" + k + "\"");
  }
}

std::uint64_t get_u64(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) bad_json(std::string("\"") + key + "\" is not an unsigned integer");
  return v.get<std::uint64_t>();
}

std::int64_t get_i64(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) bad_json(std::string("\"") + key + "\" is not an integer");
  return v.get<std::int64_t>();
}

std::string get_str(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) bad_json(std::string("\"") + key + "\" is not a string");
  return v.get<std::string>();
}

const json& get_array(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_array()) bad_json(std::string("\"") + key + "\" is not an array");
  return v;
}

DoiId get_doi(const json& j, const char* key) {
  try {
    return DoiId::from_normalized(get_str(j, key));
  } catch (const std::invalid_argument& err) {
    bad_json(err.what());
  }
}

bool is_hex_digest(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

Verdict fail(std::size_t index, Failure failure, std::string detail) {
  return Verdict{false, index, failure, std::move(detail)};
}

}  // namespace

// --- entries ------------------------------------------------------------------

std::optional<std::string> entry_problem(const LedgerEntry& e) {
  if (e.n_sources == 0) return "n_sources must be positive";
  if (e.common_count + e.unique_count != e.union_count) {
    return "common + unique (" + std::to_string(e.common_count + e.unique_count) +
           ") differs from union (" + std::to_string(e.union_count) + ")";
  }
  const auto expected = e.common_count + ceil_div(e.unique_count, e.n_sources);
  if (e.weighted_citations != expected) {
    return "weighted citations " + std::to_string(e.weighted_citations) + " != ceil(" +
           std::to_string(e.common_count) + " + " + std::to_string(e.unique_count) + "/" +
           std::to_string(e.n_sources) + ") = " + std::to_string(expected);
  }
  if (e.sources.empty() || e.sources.size() > e.n_sources) return "bad source list size";
  for (std::size_t i = 0; i < e.sources.size(); ++i) {
    if (e.sources[i].empty() || e.sources[i].find('+') != std::string::npos) return "bad source name";
    if (i > 0 && !(e.sources[i - 1] < e.sources[i])) return "sources not sorted and distinct";
  }
  if (e.transactions.empty()) return std::nullopt;

  if (e.transactions.size() != e.union_count) {
    return "transaction count " + std::to_string(e.transactions.size()) + " != union " +
           std::to_string(e.union_count);
  }
  std::uint64_t everywhere = 0;
  for (std::size_t i = 0; i < e.transactions.size(); ++i) {
    const auto& t = e.transactions[i];
    if (i > 0 && !(e.transactions[i - 1].citer < t.citer)) return "transactions not sorted and distinct";
    if (t.citer == e.record_doi) return "record cites itself";
    const auto tags = split_tag(t.source);
    for (std::size_t k = 0; k < tags.size(); ++k) {
      if (!std::binary_search(e.sources.begin(), e.sources.end(), tags[k])) {
        return "transaction source '" + tags[k] + "' not among the record's sources";
      }
      if (k > 0 && !(tags[k - 1] < tags[k])) return "transaction source tag not sorted";
    }
    if (tags.size() == e.n_sources) ++everywhere;
  }
  if (everywhere != e.common_count) {
    return "common count " + std::to_string(e.common_count) + " != citers in all sources " +
           std::to_string(everywhere);
  }
  return std::nullopt;
}

LedgerEntry entry_from_publication(const PublicationMetrics& pub) {
  LedgerEntry e{
      .record_doi = pub.record.doi,
      .sources = {pub.record.sources.begin(), pub.record.sources.end()},
      .n_sources = pub.partition.n_sources,
      .common_count = pub.partition.common.size(),
      .unique_count = pub.partition.unique.size(),
      .union_count = pub.partition.union_all.size(),
      .weighted_citations = pub.score.s,
      .transactions = {},
  };
  for (const auto& citer : pub.partition.union_all) {
    std::vector<std::string> tags;
    for (const auto& [source, citers] : pub.record.citers_by_source) {
      if (citers.contains(citer)) tags.push_back(source);
    }
    e.transactions.push_back(Transaction{citer, join_sources(tags)});
  }
  return e;
}

std::vector<LedgerEntry> entries_from_metrics(const EntityMetrics& metrics) {
  std::vector<LedgerEntry> out;
  out.reserve(metrics.per_publication.size());
  for (const auto& pub : metrics.per_publication) out.push_back(entry_from_publication(pub));
  return out;
}

LedgerEntry entry_from_csv_row(const EntityCsvRow& row, std::uint64_t n_sources) {
  LedgerEntry e{
      .record_doi = row.doi,
      .sources = row.sources,
      .n_sources = n_sources,
      .common_count = row.common,
      .unique_count = row.unique,
      .union_count = row.union_count,
      .weighted_citations = row.weighted,
      .transactions = {},
  };
  if (auto problem = entry_problem(e)) throw InvalidEntry(*problem);
  return e;
}

BlockSummary summarize_entries(std::span<const LedgerEntry> entries) {
  BlockSummary s;
  if (entries.empty()) return s;
  const auto n = entries.front().n_sources;
  if (n == 0) throw InvalidEntry("n_sources must be positive");
  std::vector<std::uint64_t> union_counts;
  union_counts.reserve(entries.size());
  for (const auto& e : entries) {
    if (e.n_sources != n) throw InvalidEntry("entries of one block must share n_sources");
    s.common += e.common_count;
    s.unique += e.unique_count;
    union_counts.push_back(e.union_count);
  }
  s.weighted = s.common + ceil_div(s.unique, n);
  s.h_index = h_index(union_counts);
  return s;
}

// --- blocks -------------------------------------------------------------------

std::string canonical_bytes(const Block& block) {
  ByteWriter w;
  write_prefix(w, block);
  w.u64(block.nonce);
  return std::move(w.bytes());
}

std::string compute_hash(const Block& block) { return sha256_hex(canonical_bytes(block)); }

bool meets_difficulty(std::string_view hash, unsigned difficulty) noexcept {
  if (hash.size() < difficulty) return false;
  return std::all_of(hash.begin(), hash.begin() + difficulty, [](char c) { return c == '0'; });
}

Clock system_clock() {
  return [] {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

Clock fixed_clock(std::int64_t seconds) {
  return [seconds] { return seconds; };
}

Chain genesis(unsigned difficulty, EntityKind kind, std::int64_t timestamp) {
  if (difficulty == 0 || difficulty > 64) throw std::invalid_argument("difficulty must be in 1..64");
  Block b;
  b.index = 0;
  b.timestamp = timestamp;
  b.ledger_kind = kind;
  b.hash = compute_hash(b);
  return Chain{{std::move(b)}, difficulty};
}

Block mine_block(const Chain& chain, std::span<const LedgerEntry> pending, const BlockMeta& meta,
                 const Clock& clock) {
  if (pending.empty()) throw EmptyPending("nothing to mine");
  if (chain.blocks.empty()) throw LedgerError("cannot mine on an empty chain");
  if (meta.ledger_kind != chain.kind()) throw LedgerError("block kind differs from the ledger's kind");
  for (const auto& e : pending) {
    if (auto problem = entry_problem(e)) throw InvalidEntry(problem->c_str());
  }

  Block b;
  b.index = chain.tip().index + 1;
  b.timestamp = clock();
  b.ledger_kind = meta.ledger_kind;
  b.entity_id = meta.entity_id;
  b.entries.assign(pending.begin(), pending.end());
  b.summary = summarize_entries(b.entries);
  b.previous_hash = chain.tip().hash;

  ByteWriter w;
  write_prefix(w, b);
  std::string& bytes = w.bytes();
  const std::size_t prefix_size = bytes.size();
  for (std::uint64_t nonce = 0;; ++nonce) {
    bytes.resize(prefix_size);
    append_nonce(bytes, nonce);
    std::string hash = sha256_hex(bytes);
    if (meets_difficulty(hash, chain.difficulty)) {
      b.nonce = nonce;
      b.hash = std::move(hash);
      return b;
    }
  }
}

std::string_view to_string(Failure failure) noexcept {
  switch (failure) {
    case Failure::None: return "none";
    case Failure::EmptyChain: return "empty chain";
    case Failure::BadDifficulty: return "bad difficulty";
    case Failure::IndexGap: return "index gap";
    case Failure::KindMismatch: return "ledger kind mismatch";
    case Failure::BadGenesis: return "bad genesis block";
    case Failure::MalformedEntry: return "malformed entry";
    case Failure::SummaryMismatch: return "summary does not match entries";
    case Failure::HashMismatch: return "hash mismatch";
    case Failure::BrokenLink: return "broken link to previous block";
    case Failure::InsufficientWork: return "hash does not meet difficulty";
  }
  return "unknown";
}

Verdict validate_chain(const Chain& chain) {
  if (chain.blocks.empty()) return Verdict{false, std::nullopt, Failure::EmptyChain, "no blocks"};
  if (chain.difficulty == 0 || chain.difficulty > 64) {
    return Verdict{false, std::nullopt, Failure::BadDifficulty, std::to_string(chain.difficulty)};
  }
  const EntityKind kind = chain.kind();

  for (std::size_t i = 0; i < chain.blocks.size(); ++i) {
    const Block& b = chain.blocks[i];
    if (b.index != i) {
      return fail(i, Failure::IndexGap, "index " + std::to_string(b.index) + " at position " + std::to_string(i));
    }
    if (b.ledger_kind != kind) return fail(i, Failure::KindMismatch, std::string(to_string(b.ledger_kind)));

    if (i == 0) {
      if (!b.entries.empty() || b.previous_hash != kZeroHash || !b.entity_id.empty()) {
        return fail(i, Failure::BadGenesis, "genesis must be empty and link to the zero hash");
      }
    } else {
      if (b.entries.empty()) return fail(i, Failure::MalformedEntry, "block has no entries");
      for (std::size_t k = 0; k < b.entries.size(); ++k) {
        if (auto problem = entry_problem(b.entries[k])) {
          return fail(i, Failure::MalformedEntry, "entry " + std::to_string(k) + ": " + *problem);
        }
      }
    }

    BlockSummary expected;
    try {
      expected = summarize_entries(b.entries);
    } catch (const InvalidEntry& err) {
      return fail(i, Failure::MalformedEntry, err.what());
    }
    if (expected != b.summary) {
      return fail(i, Failure::SummaryMismatch,
                  "stored weighted " + std::to_string(b.summary.weighted) + " h " +
                      std::to_string(b.summary.h_index) + ", recomputed weighted " +
                      std::to_string(expected.weighted) + " h " + std::to_string(expected.h_index));
    }

    if (compute_hash(b) != b.hash) return fail(i, Failure::HashMismatch, "stored hash " + b.hash);
    if (i > 0) {
      if (b.previous_hash != chain.blocks[i - 1].hash) return fail(i, Failure::BrokenLink, b.previous_hash);
      if (!meets_difficulty(b.hash, chain.difficulty)) return fail(i, Failure::InsufficientWork, b.hash);
    }
  }
  return Verdict{};
}

Chain resolve(const Chain& local, std::span<const Chain> candidates) {
  const bool local_valid = static_cast<bool>(validate_chain(local));
  const Chain* best = &local;
  std::size_t best_length = local_valid ? local.blocks.size() : 0;

  for (const auto& candidate : candidates) {
    if (candidate.blocks.size() <= best_length) continue;
    if (candidate.difficulty != local.difficulty) continue;
    if (!local.blocks.empty() && candidate.blocks.front() != local.blocks.front()) continue;
    if (!validate_chain(candidate)) continue;
    best = &candidate;
    best_length = candidate.blocks.size();
  }
  return *best;
}

// --- serialization ------------------------------------------------------------

ordered_json block_to_json(const Block& b) {
  ordered_json entries = ordered_json::array();
  for (const auto& e : b.entries) {
    ordered_json txs = ordered_json::array();
    for (const auto& t : e.transactions) {
      txs.push_back(ordered_json{{"doi", t.citer.str()}, {"source", t.source}});
    }
    entries.push_back(ordered_json{
        {"record_doi", e.record_doi.str()},
        {"sources", e.sources},
        {"n_sources", e.n_sources},
        {"common", e.common_count},
        {"unique", e.unique_count},
        {"union", e.union_count},
        {"weighted", e.weighted_citations},
        {"transactions", std::move(txs)},
    });
  }
  return ordered_json{
      {"index", b.index},
      {"timestamp", b.timestamp},
      {"ledger_kind", to_string(b.ledger_kind)},
      {"entity_id", b.entity_id},
      {"entries", std::move(entries)},
      {"summary",
       ordered_json{{"common", b.summary.common},
                    {"unique", b.summary.unique},
                    {"weighted", b.summary.weighted},
                    {"h_index", b.summary.h_index}}},
      {"previous_hash", b.previous_hash},
      {"nonce", b.nonce},
      {"hash", b.hash},
  };
}

Block block_from_json(const json& j) {
  expect_keys(j,
              {"index", "timestamp", "ledger_kind", "entity_id", "entries", "summary",
               "previous_hash", "nonce", "hash"},
              "block");
  Block b;
  b.index = get_u64(j, "index");
  b.timestamp = get_i64(j, "timestamp");
  try {
    b.ledger_kind = parse_entity_kind(get_str(j, "ledger_kind"));
  } catch (const InvalidEntity& err) {
    bad_json(err.what());
  }
  if (get_str(j, "ledger_kind") != to_string(b.ledger_kind)) bad_json("ledger_kind not canonical");
  b.entity_id = get_str(j, "entity_id");

  for (const auto& je : get_array(j, "entries")) {
    expect_keys(je,
                {"record_doi", "sources", "n_sources", "common", "unique", "union", "weighted",
                 "transactions"},
                "entry");
    LedgerEntry e{
        .record_doi = get_doi(je, "record_doi"),
        .sources = {},
        .n_sources = get_u64(je, "n_sources"),
        .common_count = get_u64(je, "common"),
        .unique_count = get_u64(je, "unique"),
        .union_count = get_u64(je, "union"),
        .weighted_citations = get_u64(je, "weighted"),
        .transactions = {},
    };
    for (const auto& s : get_array(je, "sources")) {
      if (!s.is_string()) bad_json("source is not a string");
      e.sources.push_back(s.get<std::string>());
    }
    for (const auto& jt : get_array(je, "transactions")) {
      expect_keys(jt, {"doi", "source"}, "transaction");
      e.transactions.push_back(Transaction{get_doi(jt, "doi"), get_str(jt, "source")});
    }
    b.entries.push_back(std::move(e));
  }

  const auto& js = j.at("summary");
  expect_keys(js, {"common", "unique", "weighted", "h_index"}, "summary");
  b.summary = BlockSummary{get_u64(js, "common"), get_u64(js, "unique"), get_u64(js, "weighted"),
                           get_u64(js, "h_index")};
  b.previous_hash = get_str(j, "previous_hash");
  b.nonce = get_u64(j, "nonce");
  b.hash = get_str(j, "hash");
  if (!is_hex_digest(b.previous_hash)) bad_json("previous_hash is not a lowercase SHA-256 digest");
  if (!is_hex_digest(b.hash)) bad_json("hash is not a lowercase SHA-256 digest");
  return b;
}

ordered_json chain_to_json(const Chain& chain) {
  ordered_json blocks = ordered_json::array();
  for (const auto& b : chain.blocks) blocks.push_back(block_to_json(b));
  return ordered_json{
      {"length", chain.blocks.size()},
      {"difficulty", chain.difficulty},
      {"blocks", std::move(blocks)},
  };
}

Chain chain_from_json(const json& j) {
  if (!j.is_object() || !j.contains("blocks") || !j.contains("difficulty")) {
    throw LedgerError("malformed chain: expected \"blocks\" and \"difficulty\"");
  }
  Chain chain;
  const auto difficulty = get_u64(j, "difficulty");
  if (difficulty == 0 || difficulty > 64) throw LedgerError("malformed chain: bad difficulty");
  chain.difficulty = static_cast<unsigned>(difficulty);
  for (const auto& jb : get_array(j, "blocks")) chain.blocks.push_back(block_from_json(jb));
  if (j.contains("length") && get_u64(j, "length") != chain.blocks.size()) {
    throw LedgerError("malformed chain: length does not match block count");
  }
  return chain;
}

std::string serialize_chain_lines(const Chain& chain) {
  std::string out;
  for (const auto& b : chain.blocks) {
    out += block_to_json(b).dump();
    out += '\n';
  }
  return out;
}

Chain parse_chain_lines(std::string_view text, unsigned difficulty) {
  Chain chain;
  chain.difficulty = difficulty;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    ++line_no;
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      throw LedgerError("line " + std::to_string(line_no) + ": missing trailing newline");
    }
    const std::string_view line = text.substr(start, end - start);
    start = end + 1;
    try {
      Block b = block_from_json(json::parse(line));
      if (block_to_json(b).dump() != line) throw LedgerError("not in canonical form");
      chain.blocks.push_back(std::move(b));
    } catch (const json::exception& err) {
      throw LedgerError("line " + std::to_string(line_no) + ": " + err.what());
    } catch (const LedgerError& err) {
      throw LedgerError("line " + std::to_string(line_no) + ": " + err.what());
    }
  }
  return chain;
}

void save_chain(const Chain& chain, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  write_text_file(tmp, serialize_chain_lines(chain));
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace '" + path.string() + "': " + ec.message());
}

Chain load_chain(const std::filesystem::path& path, unsigned difficulty) {
  return parse_chain_lines(read_text_file(path), difficulty);
}

}  // namespace conflate
