#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conflate/model.hpp"

namespace conflate {

class ZeroSources : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Splits the citer sets of one publication. A source missing from the map
/// counts as an empty set, so `common` is empty unless all `n_sources`
/// sources are present.
CitationPartition partition(const std::map<std::string, DoiSet>& citers_by_source,
                            std::size_t n_sources);

/// Pay-off weighting: each common citer weighs 1, each unique citer 1/N.
/// s = ceil(|common| + |unique| / N).
WeightedCitationScore weighted_score(const CitationPartition& partition);

/// Largest h such that at least h of the counts are >= h.
std::uint64_t h_index(std::span<const std::uint64_t> citation_counts);

/// Conflated metrics for one entity from its assembled records.
///
/// Entity totals apply the ceiling once, to the summed score:
///   conflate_citations = sum(|common|) + ceil(sum(|unique|) / N)
/// Articles use the same pay-off rule, with a publication indexed by all N
/// sources weighing 1 and any other 1/N. conflate_h is computed over the
/// deduplicated union citer count of each publication.
EntityMetrics conflate_entity(const EntityRef& entity, std::span<const PublicationRecord> records,
                              std::size_t n_sources, std::span<const std::string> source_names);

struct Indicators {
  std::uint64_t articles = 0;
  std::uint64_t citations = 0;
  std::uint64_t h_index = 0;
  double mean_citations = 0.0;  // citations per article, 0 when there are no articles
};

struct IndicatorSummary {
  std::map<std::string, Indicators> per_source;
  Indicators conflate;
};

IndicatorSummary related_indicators(const EntityMetrics& metrics);

}  // namespace conflate
