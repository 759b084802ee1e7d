#include "conflate/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "conflate/csv.hpp"
#include "conflate/engine.hpp"

namespace conflate {

namespace {

constexpr std::size_t kEntityCsvColumns = 9;

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  for (;;) {
    auto pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::uint64_t parse_count(const std::string& field, std::size_t row, std::size_t column) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
    throw csv::CsvError("expected a non-negative integer, got '" + field + "'", row, column);
  }
  return value;
}

FieldStats field_stats(const std::vector<double>& values) {
  long double sum = 0;
  for (double v : values) sum += v;
  const long double mean = sum / static_cast<long double>(values.size());
  long double squares = 0;
  for (double v : values) squares += (v - mean) * (v - mean);
  return {static_cast<double>(mean),
          static_cast<double>(std::sqrt(squares / static_cast<long double>(values.size())))};
}

std::set<std::string> all_sources(std::span<const EntityMetrics> metrics) {
  std::set<std::string> names;
  for (const auto& m : metrics) {
    for (const auto& [name, _] : m.per_source_articles) names.insert(name);
  }
  return names;
}

template <typename Map>
std::uint64_t value_or_zero(const Map& map, const std::string& key) {
  auto it = map.find(key);
  return it == map.end() ? 0 : it->second;
}

}  // namespace

// --- entity CSV -------------------------------------------------------------

std::vector<EntityCsvRow> entity_csv_rows(const EntityMetrics& metrics) {
  std::vector<EntityCsvRow> rows;
  rows.reserve(metrics.per_publication.size());
  for (const auto& pub : metrics.per_publication) {
    rows.push_back(EntityCsvRow{
        .kind = metrics.entity.kind,
        .entity_id = metrics.entity.id,
        .group = metrics.entity.group,
        .doi = pub.record.doi,
        .sources = {pub.record.sources.begin(), pub.record.sources.end()},
        .common = pub.partition.common.size(),
        .unique = pub.partition.unique.size(),
        .union_count = pub.partition.union_all.size(),
        .weighted = pub.score.s,
    });
  }
  std::sort(rows.begin(), rows.end(),
            [](const EntityCsvRow& a, const EntityCsvRow& b) { return a.doi < b.doi; });
  return rows;
}

std::string format_entity_csv(std::span<const EntityCsvRow> rows) {
  std::string out(kEntityCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    out += csv::format_row({std::string(to_string(r.kind)), r.entity_id, r.group, r.doi.str(),
                            join(r.sources, '+'), std::to_string(r.common),
                            std::to_string(r.unique), std::to_string(r.union_count),
                            std::to_string(r.weighted)});
  }
  return out;
}

std::string format_entity_csv(const EntityMetrics& metrics) {
  const auto rows = entity_csv_rows(metrics);
  return format_entity_csv(rows);
}

void export_entity_csv(const EntityMetrics& metrics, const std::filesystem::path& path) {
  write_text_file(path, format_entity_csv(metrics));
}

std::vector<EntityCsvRow> parse_entity_csv(std::string_view text) {
  const auto table = csv::parse(text);
  if (table.empty()) throw csv::CsvError("missing header row", 1, 1);

  const auto expected = split(kEntityCsvHeader, ',');
  const auto& header = table.front();
  for (std::size_t i = 0; i < std::max(header.size(), expected.size()); ++i) {
    if (i >= header.size() || i >= expected.size() || header[i] != expected[i]) {
      throw csv::CsvError("header must be exactly '" + std::string(kEntityCsvHeader) + "'", 1,
                          i + 1);
    }
  }

  std::vector<EntityCsvRow> rows;
  rows.reserve(table.size() - 1);
  for (std::size_t r = 1; r < table.size(); ++r) {
    const auto& f = table[r];
    const std::size_t row_no = r + 1;
    if (f.size() != kEntityCsvColumns) {
      throw csv::CsvError("expected " + std::to_string(kEntityCsvColumns) + " fields, got " +
                              std::to_string(f.size()),
                          row_no, std::min(f.size(), kEntityCsvColumns) + 1);
    }

    EntityRef entity;
    try {
      entity.kind = parse_entity_kind(f[0]);
    } catch (const InvalidEntity& err) {
      throw csv::CsvError(err.what(), row_no, 1);
    }
    entity.id = f[1];
    try {
      entity.validate();
    } catch (const InvalidEntity& err) {
      throw csv::CsvError(err.what(), row_no, 2);
    }

    std::optional<DoiId> doi;
    try {
      doi = DoiId::from_normalized(f[3]);
    } catch (const std::invalid_argument& err) {
      throw csv::CsvError(err.what(), row_no, 4);
    }

    auto sources = split(f[4], '+');
    if (sources.empty() || std::any_of(sources.begin(), sources.end(),
                                       [](const std::string& s) { return s.empty(); })) {
      throw csv::CsvError("sources must be a '+'-joined list of names", row_no, 5);
    }
    if (!std::is_sorted(sources.begin(), sources.end()) ||
        std::adjacent_find(sources.begin(), sources.end()) != sources.end()) {
      throw csv::CsvError("sources must be sorted and distinct", row_no, 5);
    }

    EntityCsvRow row{
        .kind = entity.kind,
        .entity_id = entity.id,
        .group = f[2],
        .doi = *doi,
        .sources = std::move(sources),
        .common = parse_count(f[5], row_no, 6),
        .unique = parse_count(f[6], row_no, 7),
        .union_count = parse_count(f[7], row_no, 8),
        .weighted = parse_count(f[8], row_no, 9),
    };
    if (row.common + row.unique != row.union_count) {
      throw csv::CsvError("common_citations + unique_citations (" +
                              std::to_string(row.common + row.unique) +
                              ") must equal union_citations (" + std::to_string(row.union_count) +
                              ")",
                          row_no, 8);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<EntityCsvRow> import_entity_csv(const std::filesystem::path& path) {
  return parse_entity_csv(read_text_file(path));
}

ConflateTotals summarize_rows(std::span<const EntityCsvRow> rows, std::size_t n_sources) {
  if (n_sources == 0) throw std::invalid_argument("summarize_rows needs at least one source");
  ConflateTotals t;
  std::uint64_t common = 0;
  std::uint64_t unique = 0;
  std::uint64_t everywhere = 0;
  std::uint64_t partial = 0;
  std::vector<std::uint64_t> union_counts;
  for (const auto& r : rows) {
    common += r.common;
    unique += r.unique;
    union_counts.push_back(r.union_count);
    (r.sources.size() >= n_sources ? everywhere : partial) += 1;
    for (const auto& s : r.sources) ++t.per_source_articles[s];
  }
  t.articles = everywhere + ceil_div(partial, n_sources);
  t.citations = common + ceil_div(unique, n_sources);
  t.h_index = h_index(union_counts);
  return t;
}

// --- aggregation --------------------------------------------------------------

std::string group_by_label(const EntityMetrics& m) { return m.entity.group; }
std::string group_by_kind(const EntityMetrics& m) { return std::string(to_string(m.entity.kind)); }

std::uint64_t rounded_mean(std::uint64_t sum, std::uint64_t count) {
  if (count == 0) return 0;
  return (2 * sum + count) / (2 * count);
}

std::vector<GroupSummary> aggregate(std::span<const EntityMetrics> metrics, const GroupKey& key) {
  if (metrics.empty()) throw EmptyInput("aggregate needs at least one entity");

  struct Accumulator {
    GroupSummary summary;
    std::map<std::string, std::uint64_t> h_sums;
    std::uint64_t conflate_h_sum = 0;
  };
  std::map<std::string, Accumulator> groups;
  const auto sources = all_sources(metrics);

  for (const auto& m : metrics) {
    const std::string label = key(m);
    auto& acc = groups[label];
    acc.summary.group = label;
    ++acc.summary.entities;
    for (const auto& s : sources) {
      auto& totals = acc.summary.per_source[s];
      totals.articles += value_or_zero(m.per_source_articles, s);
      totals.citations += value_or_zero(m.per_source_citations, s);
      acc.h_sums[s] += value_or_zero(m.per_source_h, s);
    }
    acc.summary.conflate.articles += m.conflate_articles;
    acc.summary.conflate.citations += m.conflate_citations;
    acc.conflate_h_sum += m.conflate_h;
  }

  std::vector<GroupSummary> out;
  out.reserve(groups.size());
  for (auto& [label, acc] : groups) {
    for (auto& [s, totals] : acc.summary.per_source) {
      totals.avg_h = rounded_mean(acc.h_sums[s], acc.summary.entities);
    }
    acc.summary.conflate.avg_h = rounded_mean(acc.conflate_h_sum, acc.summary.entities);
    out.push_back(std::move(acc.summary));
  }
  return out;
}

std::string format_group_csv(std::span<const GroupSummary> groups) {
  std::set<std::string> sources;
  for (const auto& g : groups) {
    for (const auto& [s, _] : g.per_source) sources.insert(s);
  }

  csv::Row header{"group", "entities"};
  for (const auto& s : sources) {
    header.push_back(s + "_articles");
    header.push_back(s + "_citations");
    header.push_back(s + "_avg_h");
  }
  header.insert(header.end(), {"conflate_articles", "conflate_citations", "conflate_avg_h"});

  std::string out = csv::format_row(header);
  for (const auto& g : groups) {
    csv::Row row{g.group, std::to_string(g.entities)};
    for (const auto& s : sources) {
      auto it = g.per_source.find(s);
      const GroupTotals t = it == g.per_source.end() ? GroupTotals{} : it->second;
      row.push_back(std::to_string(t.articles));
      row.push_back(std::to_string(t.citations));
      row.push_back(std::to_string(t.avg_h));
    }
    row.push_back(std::to_string(g.conflate.articles));
    row.push_back(std::to_string(g.conflate.citations));
    row.push_back(std::to_string(g.conflate.avg_h));
    out += csv::format_row(row);
  }
  return out;
}

// --- summary statistics -------------------------------------------------------

SummaryStats summary_stats(std::span<const EntityMetrics> metrics) {
  if (metrics.empty()) throw EmptyInput("summary_stats needs at least one entity");

  auto series = [&](auto&& pick) {
    std::vector<double> values;
    values.reserve(metrics.size());
    for (const auto& m : metrics) values.push_back(static_cast<double>(pick(m)));
    return field_stats(values);
  };

  SummaryStats stats;
  stats.entities = metrics.size();
  for (const auto& s : all_sources(metrics)) {
    stats.per_source[s] = SourceStats{
        series([&](const EntityMetrics& m) { return value_or_zero(m.per_source_articles, s); }),
        series([&](const EntityMetrics& m) { return value_or_zero(m.per_source_citations, s); }),
        series([&](const EntityMetrics& m) { return value_or_zero(m.per_source_h, s); }),
    };
  }
  stats.conflate = SourceStats{
      series([](const EntityMetrics& m) { return m.conflate_articles; }),
      series([](const EntityMetrics& m) { return m.conflate_citations; }),
      series([](const EntityMetrics& m) { return m.conflate_h; }),
  };
  return stats;
}

std::string format_stats_csv(const SummaryStats& stats) {
  std::string out = csv::format_row({"series", "entities", "articles_mean", "articles_stddev",
                                     "citations_mean", "citations_stddev", "h_mean", "h_stddev"});
  auto line = [&](const std::string& name, const SourceStats& s) {
    out += csv::format_row({name, std::to_string(stats.entities), format_double(s.articles.mean),
                            format_double(s.articles.stddev), format_double(s.citations.mean),
                            format_double(s.citations.stddev), format_double(s.h.mean),
                            format_double(s.h.stddev)});
  };
  for (const auto& [name, s] : stats.per_source) line(name, s);
  line("conflate", stats.conflate);
  return out;
}

// --- scatter ------------------------------------------------------------------

LinearFit fit_line(std::span<const Point> points) {
  if (points.size() < 2) throw DegenerateFit("a line fit needs at least two points");
  if (std::all_of(points.begin(), points.end(),
                  [&](const Point& p) { return p.x == points.front().x; })) {
    throw DegenerateFit("all x values are equal");
  }
  long double mx = 0;
  long double my = 0;
  for (const auto& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<long double>(points.size());
  my /= static_cast<long double>(points.size());
  long double sxx = 0;
  long double sxy = 0;
  for (const auto& p : points) {
    sxx += (p.x - mx) * (p.x - mx);
    sxy += (p.x - mx) * (p.y - my);
  }
  const long double slope = sxy / sxx;
  return {static_cast<double>(slope), static_cast<double>(my - slope * mx)};
}

ScatterData scatter_data(std::span<const EntityMetrics> metrics, const std::string& source) {
  ScatterData data;
  data.source = source;
  std::vector<Point> articles;
  std::vector<Point> citations;
  std::vector<Point> h;
  for (const auto& m : metrics) {
    ScatterRow row{
        m.entity.id,
        {static_cast<double>(value_or_zero(m.per_source_articles, source)),
         static_cast<double>(m.conflate_articles)},
        {static_cast<double>(value_or_zero(m.per_source_citations, source)),
         static_cast<double>(m.conflate_citations)},
        {static_cast<double>(value_or_zero(m.per_source_h, source)), static_cast<double>(m.conflate_h)},
    };
    articles.push_back(row.articles);
    citations.push_back(row.citations);
    h.push_back(row.h);
    data.rows.push_back(std::move(row));
  }
  auto fit = [&](std::span<const Point> pts, const char* what) {
    try {
      return fit_line(pts);
    } catch (const DegenerateFit& err) {
      throw DegenerateFit(std::string(what) + ": " + err.what());
    }
  };
  data.articles_fit = fit(articles, "articles");
  data.citations_fit = fit(citations, "citations");
  data.h_fit = fit(h, "h-index");
  return data;
}

std::string format_scatter_csv(const ScatterData& data) {
  std::string out = "# x=" + data.source + " y=conflate\n";
  auto fit_line_comment = [&](const char* name, const LinearFit& f) {
    out += std::string("# fit,") + name + ",slope=" + format_double(f.slope) +
           ",intercept=" + format_double(f.intercept) + "\n";
  };
  fit_line_comment("articles", data.articles_fit);
  fit_line_comment("citations", data.citations_fit);
  fit_line_comment("h", data.h_fit);
  out += csv::format_row(
      {"entity_id", "articles_x", "articles_y", "citations_x", "citations_y", "h_x", "h_y"});
  for (const auto& r : data.rows) {
    out += csv::format_row({r.entity_id, format_double(r.articles.x), format_double(r.articles.y),
                            format_double(r.citations.x), format_double(r.citations.y),
                            format_double(r.h.x), format_double(r.h.y)});
  }
  return out;
}

void export_scatter_data(std::span<const EntityMetrics> metrics, const std::string& source,
                         const std::filesystem::path& path) {
  write_text_file(path, format_scatter_csv(scatter_data(metrics, source)));
}

// --- files ----------------------------------------------------------------------

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace conflate
