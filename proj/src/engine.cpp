#include "conflate/engine.hpp"

#include <algorithm>
#include <functional>

namespace conflate {

CitationPartition partition(const std::map<std::string, DoiSet>& citers_by_source,
                            std::size_t n_sources) {
  if (n_sources == 0) throw ZeroSources("partition needs at least one source");
  if (citers_by_source.size() > n_sources) {
    throw std::invalid_argument("more citer sets (" + std::to_string(citers_by_source.size()) +
                                ") than sources (" + std::to_string(n_sources) + ")");
  }

  CitationPartition out;
  out.n_sources = n_sources;
  for (const auto& [source, citers] : citers_by_source) {
    out.union_all.insert(citers.begin(), citers.end());
  }

  if (citers_by_source.size() == n_sources && !citers_by_source.empty()) {
    auto it = citers_by_source.begin();
    out.common = it->second;
    for (++it; it != citers_by_source.end(); ++it) {
      std::erase_if(out.common, [&](const DoiId& d) { return !it->second.contains(d); });
    }
  }

  std::set_difference(out.union_all.begin(), out.union_all.end(), out.common.begin(),
                      out.common.end(), std::inserter(out.unique, out.unique.end()));
  return out;
}

WeightedCitationScore weighted_score(const CitationPartition& p) {
  if (p.n_sources == 0) throw ZeroSources("weighted_score needs at least one source");
  WeightedCitationScore score;
  score.s1 = p.common.size();
  score.s2_numerator = p.unique.size();
  score.s2_denominator = p.n_sources;
  score.s = score.s1 + ceil_div(score.s2_numerator, score.s2_denominator);
  return score;
}

std::uint64_t h_index(std::span<const std::uint64_t> citation_counts) {
  std::vector<std::uint64_t> sorted(citation_counts.begin(), citation_counts.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::uint64_t h = 0;
  while (h < sorted.size() && sorted[h] >= h + 1) ++h;
  return h;
}

EntityMetrics conflate_entity(const EntityRef& entity, std::span<const PublicationRecord> records,
                              std::size_t n_sources, std::span<const std::string> source_names) {
  if (n_sources == 0) throw ZeroSources("conflate_entity needs at least one source");

  EntityMetrics m;
  m.entity = entity;
  m.n_sources = n_sources;

  std::map<std::string, std::vector<std::uint64_t>> per_source_counts;
  for (const auto& name : source_names) {
    m.per_source_articles[name] = 0;
    m.per_source_citations[name] = 0;
    per_source_counts[name];
  }

  std::uint64_t common_total = 0;
  std::uint64_t unique_total = 0;
  std::uint64_t articles_everywhere = 0;
  std::uint64_t articles_partial = 0;
  std::vector<std::uint64_t> union_counts;
  union_counts.reserve(records.size());

  for (const auto& record : records) {
    for (auto& [name, counts] : per_source_counts) {
      std::uint64_t count = 0;
      if (record.sources.contains(name)) {
        ++m.per_source_articles[name];
        if (auto it = record.citers_by_source.find(name); it != record.citers_by_source.end()) {
          count = it->second.size();
        }
      }
      m.per_source_citations[name] += count;
      counts.push_back(count);
    }

    PublicationMetrics pub{record, partition(record.citers_by_source, n_sources), {}};
    pub.score = weighted_score(pub.partition);
    common_total += pub.partition.common.size();
    unique_total += pub.partition.unique.size();
    union_counts.push_back(pub.partition.union_all.size());

    if (record.sources.size() >= n_sources) {
      ++articles_everywhere;
    } else {
      ++articles_partial;
    }
    m.per_publication.push_back(std::move(pub));
  }

  std::sort(m.per_publication.begin(), m.per_publication.end(),
            [](const PublicationMetrics& a, const PublicationMetrics& b) {
              return a.record.doi < b.record.doi;
            });

  for (const auto& [name, counts] : per_source_counts) m.per_source_h[name] = h_index(counts);
  m.conflate_citations = common_total + ceil_div(unique_total, n_sources);
  m.conflate_articles = articles_everywhere + ceil_div(articles_partial, n_sources);
  m.conflate_h = h_index(union_counts);
  return m;
}

IndicatorSummary related_indicators(const EntityMetrics& metrics) {
  auto make = [](std::uint64_t articles, std::uint64_t citations, std::uint64_t h) {
    Indicators ind{articles, citations, h, 0.0};
    if (articles > 0) ind.mean_citations = static_cast<double>(citations) / static_cast<double>(articles);
    return ind;
  };

  IndicatorSummary out;
  for (const auto& [name, articles] : metrics.per_source_articles) {
    const auto citations = metrics.per_source_citations.count(name) ? metrics.per_source_citations.at(name) : 0;
    const auto h = metrics.per_source_h.count(name) ? metrics.per_source_h.at(name) : 0;
    out.per_source[name] = make(articles, citations, h);
  }
  out.conflate = make(metrics.conflate_articles, metrics.conflate_citations, metrics.conflate_h);
  return out;
}

}  // namespace conflate
