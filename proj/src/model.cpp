#include "conflate/model.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace conflate {

namespace {

constexpr std::array<std::string_view, 6> kResolverPrefixes = {
    "https://doi.org/", "http://doi.org/", "https://dx.doi.org/",
    "http://dx.doi.org/", "doi.org/", "doi:",
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

bool starts_with_nocase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  }
  return true;
}

void check_normalized(const std::string& value, std::string_view raw) {
  if (value.empty()) throw EmptyDoi("empty DOI: '" + std::string(raw) + "'");
  const auto slash = value.find('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == value.size()) {
    throw MalformedDoi("DOI has no prefix/suffix separator: '" + std::string(raw) + "'");
  }
}

}  // namespace

std::string normalize_doi_text(std::string_view raw) {
  std::string_view s = trim(raw);
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (auto prefix : kResolverPrefixes) {
      if (starts_with_nocase(s, prefix)) {
        s = trim(s.substr(prefix.size()));
        stripped = true;
        break;
      }
    }
  }
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

DoiId DoiId::normalize(std::string_view raw) {
  std::string value = normalize_doi_text(raw);
  check_normalized(value, raw);
  return DoiId(std::move(value));
}

DoiId DoiId::from_normalized(std::string_view value) {
  std::string normalized = normalize_doi_text(value);
  if (normalized != value) {
    throw MalformedDoi("DOI is not in normalized form: '" + std::string(value) + "'");
  }
  check_normalized(normalized, value);
  return DoiId(std::move(normalized));
}

std::string_view to_string(EntityKind kind) noexcept {
  switch (kind) {
    case EntityKind::Author:
      return "author";
    case EntityKind::Organization:
      return "organization";
    case EntityKind::Journal:
      return "journal";
  }
  return "author";
}

EntityKind parse_entity_kind(std::string_view text) {
  std::string lower(text);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "author") return EntityKind::Author;
  if (lower == "organization") return EntityKind::Organization;
  if (lower == "journal") return EntityKind::Journal;
  throw InvalidEntity("unknown entity kind '" + std::string(text) + "'");
}

bool is_orcid(std::string_view id) noexcept {
  if (id.size() != 19) return false;
  for (std::size_t i = 0; i < id.size(); ++i) {
    if (i % 5 == 4) {
      if (id[i] != '-') return false;
    } else if (std::isalnum(static_cast<unsigned char>(id[i])) == 0) {
      return false;
    }
  }
  return true;
}

bool is_issn(std::string_view id) noexcept {
  if (id.size() != 9 || id[4] != '-') return false;
  for (std::size_t i = 0; i < 8; ++i) {
    if (i == 4) continue;
    if (std::isdigit(static_cast<unsigned char>(id[i])) == 0) return false;
  }
  return std::isdigit(static_cast<unsigned char>(id[8])) != 0 || id[8] == 'X';
}

void EntityRef::validate() const {
  switch (kind) {
    case EntityKind::Author:
      if (!is_orcid(id)) throw InvalidEntity("not an ORCID iD: '" + id + "'");
      break;
    case EntityKind::Journal:
      if (!is_issn(id)) throw InvalidEntity("not an ISSN: '" + id + "'");
      break;
    case EntityKind::Organization:
      if (trim(id).empty()) throw InvalidEntity("organization name is empty");
      break;
  }
}

PublicationRecord PublicationRecord::make(DoiId doi, std::map<std::string, DoiSet> citers_by_source,
                                          std::set<std::string> sources) {
  PublicationRecord record{std::move(doi), std::move(sources), std::move(citers_by_source)};
  for (auto& [source, citers] : record.citers_by_source) {
    citers.erase(record.doi);
    record.sources.insert(source);
  }
  return record;
}

}  // namespace conflate
