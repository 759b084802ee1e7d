#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "conflate/model.hpp"

namespace conflate {

class EmptyInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateFit : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// ---------------------------------------------------------------------------
// Entity CSV: one row per publication, sorted by DOI. This is the payload a
// ledger node accepts on POST /profile.

inline constexpr std::string_view kEntityCsvHeader =
    "entity_kind,entity_id,group,doi,sources,common_citations,unique_citations,"
    "union_citations,weighted_citations";

struct EntityCsvRow {
  EntityKind kind = EntityKind::Author;
  std::string entity_id;
  std::string group;
  DoiId doi;
  std::vector<std::string> sources;  // sorted
  std::uint64_t common = 0;
  std::uint64_t unique = 0;
  std::uint64_t union_count = 0;
  std::uint64_t weighted = 0;

  friend bool operator==(const EntityCsvRow&, const EntityCsvRow&) = default;
};

std::vector<EntityCsvRow> entity_csv_rows(const EntityMetrics& metrics);
std::string format_entity_csv(const EntityMetrics& metrics);
std::string format_entity_csv(std::span<const EntityCsvRow> rows);
void export_entity_csv(const EntityMetrics& metrics, const std::filesystem::path& path);

/// Parses entity CSV text. Throws csv::CsvError naming the row and column
/// of the first problem, including rows whose common + unique counts do not
/// add up to the union count.
std::vector<EntityCsvRow> parse_entity_csv(std::string_view text);
std::vector<EntityCsvRow> import_entity_csv(const std::filesystem::path& path);

struct ConflateTotals {
  std::uint64_t articles = 0;
  std::uint64_t citations = 0;
  std::uint64_t h_index = 0;
  std::map<std::string, std::uint64_t> per_source_articles;

  friend bool operator==(const ConflateTotals&, const ConflateTotals&) = default;
};

/// Recomputes the conflate totals of an entity from its CSV rows alone.
ConflateTotals summarize_rows(std::span<const EntityCsvRow> rows, std::size_t n_sources);

// ---------------------------------------------------------------------------
// Group aggregation

struct GroupTotals {
  std::uint64_t articles = 0;
  std::uint64_t citations = 0;
  std::uint64_t avg_h = 0;  // round-half-up mean over member entities
};

struct GroupSummary {
  std::string group;
  std::size_t entities = 0;
  std::map<std::string, GroupTotals> per_source;
  GroupTotals conflate;
};

using GroupKey = std::function<std::string(const EntityMetrics&)>;

std::string group_by_label(const EntityMetrics& m);
std::string group_by_kind(const EntityMetrics& m);

/// One summary per distinct key, sorted by key. Throws EmptyInput.
std::vector<GroupSummary> aggregate(std::span<const EntityMetrics> metrics, const GroupKey& key);

/// Round-half-up of sum / count, computed exactly.
std::uint64_t rounded_mean(std::uint64_t sum, std::uint64_t count);

std::string format_group_csv(std::span<const GroupSummary> groups);

// ---------------------------------------------------------------------------
// Mean / population standard deviation

struct FieldStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct SourceStats {
  FieldStats articles;
  FieldStats citations;
  FieldStats h;
};

struct SummaryStats {
  std::size_t entities = 0;
  std::map<std::string, SourceStats> per_source;
  SourceStats conflate;
};

/// Throws EmptyInput.
SummaryStats summary_stats(std::span<const EntityMetrics> metrics);
std::string format_stats_csv(const SummaryStats& stats);

// ---------------------------------------------------------------------------
// Source-vs-conflate scatter data with an ordinary least-squares line.

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Least-squares line through the points. Throws DegenerateFit when fewer
/// than two points are given or every x is equal.
LinearFit fit_line(std::span<const Point> points);

struct ScatterRow {
  std::string entity_id;
  Point articles;
  Point citations;
  Point h;
};

struct ScatterData {
  std::string source;
  std::vector<ScatterRow> rows;
  LinearFit articles_fit;
  LinearFit citations_fit;
  LinearFit h_fit;
};

/// x is the named source's value, y the conflate value. Throws DegenerateFit
/// if any of the three series cannot be fitted.
ScatterData scatter_data(std::span<const EntityMetrics> metrics, const std::string& source);
std::string format_scatter_csv(const ScatterData& data);
void export_scatter_data(std::span<const EntityMetrics> metrics, const std::string& source,
                         const std::filesystem::path& path);

/// Writes `contents` to `path`, throwing IoError on failure.
void write_text_file(const std::filesystem::path& path, std::string_view contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace conflate
