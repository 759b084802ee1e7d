#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "conflate/model.hpp"
#include "json.hpp"

namespace conflate {

struct EntityCsvRow;

class LedgerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyPending : public LedgerError {
 public:
  using LedgerError::LedgerError;
};

class InvalidEntry : public LedgerError {
 public:
  using LedgerError::LedgerError;
};

inline const std::string kZeroHash(64, '0');

/// One citing work. `source` is the '+'-joined list of databases that
/// index the citation.
struct Transaction {
  DoiId citer;
  std::string source;

  friend bool operator==(const Transaction&, const Transaction&) = default;
};

/// A publication (the record) and the citations it received (the
/// transactions), with the counts produced by the conflate engine.
/// Entries posted from an entity CSV carry counts only; their transaction
/// list is empty.
struct LedgerEntry {
  DoiId record_doi;
  std::vector<std::string> sources;  // sorted, distinct
  std::uint64_t n_sources = 0;
  std::uint64_t common_count = 0;
  std::uint64_t unique_count = 0;
  std::uint64_t union_count = 0;
  std::uint64_t weighted_citations = 0;
  std::vector<Transaction> transactions;  // sorted by citer, one per citer

  friend bool operator==(const LedgerEntry&, const LedgerEntry&) = default;
};

/// Why an entry is inconsistent, or nullopt when it is well-formed.
std::optional<std::string> entry_problem(const LedgerEntry& entry);

LedgerEntry entry_from_publication(const PublicationMetrics& pub);
std::vector<LedgerEntry> entries_from_metrics(const EntityMetrics& metrics);

/// Throws InvalidEntry when the row's weighted count disagrees with the
/// pay-off rule for `n_sources`.
LedgerEntry entry_from_csv_row(const EntityCsvRow& row, std::uint64_t n_sources);

struct BlockSummary {
  std::uint64_t common = 0;
  std::uint64_t unique = 0;
  std::uint64_t weighted = 0;  // sum(common) + ceil(sum(unique) / N)
  std::uint64_t h_index = 0;   // over per-entry union counts

  friend bool operator==(const BlockSummary&, const BlockSummary&) = default;
};

/// Recomputes a block summary from its entries. All entries must share one
/// n_sources; otherwise InvalidEntry.
BlockSummary summarize_entries(std::span<const LedgerEntry> entries);

struct Block {
  std::uint64_t index = 0;
  std::int64_t timestamp = 0;  // seconds since the Unix epoch, UTC
  EntityKind ledger_kind = EntityKind::Author;
  std::string entity_id;
  std::vector<LedgerEntry> entries;
  BlockSummary summary;
  std::string previous_hash = kZeroHash;
  std::uint64_t nonce = 0;
  std::string hash;

  friend bool operator==(const Block&, const Block&) = default;
};

/// Byte layout hashed into Block::hash; every field except `hash`, in
/// declaration order. Integers are 8-byte big-endian, strings and lists are
/// prefixed with their 8-byte big-endian length.
std::string canonical_bytes(const Block& block);
std::string compute_hash(const Block& block);

/// True when `hash` starts with at least `difficulty` '0' hex digits.
bool meets_difficulty(std::string_view hash, unsigned difficulty) noexcept;

inline constexpr unsigned kDefaultDifficulty = 3;

struct Chain {
  std::vector<Block> blocks;
  unsigned difficulty = kDefaultDifficulty;

  const Block& tip() const { return blocks.back(); }
  EntityKind kind() const { return blocks.front().ledger_kind; }

  friend bool operator==(const Chain&, const Chain&) = default;
};

using Clock = std::function<std::int64_t()>;
Clock system_clock();
Clock fixed_clock(std::int64_t seconds);

/// A one-block chain. The genesis block holds no entries, is not mined and
/// links to the all-zero hash.
Chain genesis(unsigned difficulty, EntityKind kind = EntityKind::Author, std::int64_t timestamp = 0);

struct BlockMeta {
  EntityKind ledger_kind = EntityKind::Author;
  std::string entity_id;
};

/// Mines the next block for `chain` by counting the nonce up from zero.
/// Throws EmptyPending, or InvalidEntry for malformed entries.
Block mine_block(const Chain& chain, std::span<const LedgerEntry> pending, const BlockMeta& meta,
                 const Clock& clock);

enum class Failure {
  None,
  EmptyChain,
  BadDifficulty,
  IndexGap,
  KindMismatch,
  BadGenesis,
  MalformedEntry,
  SummaryMismatch,
  HashMismatch,
  BrokenLink,
  InsufficientWork,
};

std::string_view to_string(Failure failure) noexcept;

struct Verdict {
  bool valid = true;
  std::optional<std::size_t> first_invalid;
  Failure failure = Failure::None;
  std::string detail;

  explicit operator bool() const noexcept { return valid; }
};

/// Checks, per block and in order: index, ledger kind, entry consistency,
/// the summation rule (summary equals its recomputation from entries),
/// the stored hash, the link to the previous block and the work.
Verdict validate_chain(const Chain& chain);

/// The longest valid candidate that shares local's genesis block and
/// difficulty; local wins ties. An invalid local chain counts as empty.
Chain resolve(const Chain& local, std::span<const Chain> candidates);

// --- serialization -----------------------------------------------------------

nlohmann::ordered_json block_to_json(const Block& block);
/// Strict: unknown or missing keys, wrong types and non-normalized DOIs all
/// throw LedgerError.
Block block_from_json(const nlohmann::json& j);

/// {"length": n, "difficulty": d, "blocks": [...]}
nlohmann::ordered_json chain_to_json(const Chain& chain);
Chain chain_from_json(const nlohmann::json& j);

/// Persistence layout: one compact JSON block per line, LF-terminated.
std::string serialize_chain_lines(const Chain& chain);
/// Throws LedgerError when a line is not exactly the canonical encoding of
/// the block it decodes to.
Chain parse_chain_lines(std::string_view text, unsigned difficulty);

void save_chain(const Chain& chain, const std::filesystem::path& path);
Chain load_chain(const std::filesystem::path& path, unsigned difficulty);

}  // namespace conflate
