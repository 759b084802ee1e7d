#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace conflate {

class EmptyDoi : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class MalformedDoi : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class InvalidEntity : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A normalized Digital Object Identifier, the only join key between
/// bibliographic databases. Values are lowercase, trimmed and carry no
/// resolver prefix.
class DoiId {
 public:
  /// Normalizes any raw DOI string. Throws EmptyDoi or MalformedDoi.
  static DoiId normalize(std::string_view raw);

  /// Accepts only strings already in normalized form; anything else is a
  /// MalformedDoi. Used when reading persisted data, where silently
  /// re-normalizing would hide a modification.
  static DoiId from_normalized(std::string_view value);

  const std::string& str() const noexcept { return value_; }

  friend auto operator<=>(const DoiId&, const DoiId&) = default;
  friend bool operator==(const DoiId&, const DoiId&) = default;

 private:
  explicit DoiId(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

/// Normalization without validation; exposed for tests and diagnostics.
std::string normalize_doi_text(std::string_view raw);

/// Returns the normalized DOI or throws (see DoiId::normalize).
inline DoiId normalize_doi(std::string_view raw) { return DoiId::normalize(raw); }

enum class EntityKind { Author, Organization, Journal };

std::string_view to_string(EntityKind kind) noexcept;
/// Accepts "author", "organization", "journal" (case-insensitive).
EntityKind parse_entity_kind(std::string_view text);

bool is_orcid(std::string_view id) noexcept;
bool is_issn(std::string_view id) noexcept;

struct EntityRef {
  EntityKind kind = EntityKind::Author;
  std::string id;     // ORCID, organization name or ISSN
  std::string group;  // opaque label: discipline, organization category, ...

  /// Throws InvalidEntity when the id does not fit its kind.
  void validate() const;

  friend bool operator==(const EntityRef& a, const EntityRef& b) {
    return a.kind == b.kind && a.id == b.id;
  }
};

using DoiSet = std::set<DoiId>;

/// One article as seen across the databases that index it.
struct PublicationRecord {
  DoiId doi;
  std::set<std::string> sources;
  std::map<std::string, DoiSet> citers_by_source;

  /// Builds a record, dropping self-citations and adding any citer source
  /// to `sources`.
  static PublicationRecord make(DoiId doi, std::map<std::string, DoiSet> citers_by_source,
                                std::set<std::string> sources = {});

  friend bool operator==(const PublicationRecord&, const PublicationRecord&) = default;
};

/// Split of the merged citer set into citers indexed by every source and
/// the rest.
struct CitationPartition {
  std::size_t n_sources = 0;
  DoiSet common;
  DoiSet unique;
  DoiSet union_all;

  friend bool operator==(const CitationPartition&, const CitationPartition&) = default;
};

/// Pay-off weighted citation count of one publication. `s2` is kept as the
/// exact fraction unique / n_sources.
struct WeightedCitationScore {
  std::uint64_t s1 = 0;
  std::uint64_t s2_numerator = 0;
  std::uint64_t s2_denominator = 1;
  std::uint64_t s = 0;

  double s2() const noexcept {
    return static_cast<double>(s2_numerator) / static_cast<double>(s2_denominator);
  }

  friend bool operator==(const WeightedCitationScore&, const WeightedCitationScore&) = default;
};

struct PublicationMetrics {
  PublicationRecord record;
  CitationPartition partition;
  WeightedCitationScore score;

  friend bool operator==(const PublicationMetrics&, const PublicationMetrics&) = default;
};

struct EntityMetrics {
  EntityRef entity;
  std::size_t n_sources = 0;
  std::map<std::string, std::uint64_t> per_source_articles;
  std::map<std::string, std::uint64_t> per_source_citations;
  std::map<std::string, std::uint64_t> per_source_h;
  std::uint64_t conflate_articles = 0;
  std::uint64_t conflate_citations = 0;
  std::uint64_t conflate_h = 0;
  std::vector<PublicationMetrics> per_publication;  // sorted by DOI
};

/// ceil(numerator / denominator) for denominator > 0.
constexpr std::uint64_t ceil_div(std::uint64_t numerator, std::uint64_t denominator) noexcept {
  return numerator / denominator + (numerator % denominator != 0 ? 1 : 0);
}

}  // namespace conflate
