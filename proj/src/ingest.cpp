#include "conflate/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "json.hpp"

namespace conflate {

namespace {

using nlohmann::json;

[[noreturn]] void schema_error(const std::string& origin, const std::string& path,
                               const std::string& what) {
  throw ParseError(origin + ": " + path + ": " + what);
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

std::string required_string(const json& obj, const char* key, const std::string& origin,
                            const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) schema_error(origin, path, std::string("missing \"") + key + "\"");
  if (!it->is_string()) schema_error(origin, path + "." + key, "expected a string");
  return it->get<std::string>();
}

std::optional<std::string> optional_doi(const json& obj, const std::string& origin,
                                        const std::string& path) {
  auto it = obj.find("doi");
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) schema_error(origin, path + ".doi", "expected a string or null");
  return it->get<std::string>();
}

const json& optional_array(const json& obj, const char* key, const std::string& origin,
                           const std::string& path) {
  static const json empty = json::array();
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return empty;
  if (!it->is_array()) schema_error(origin, path + "." + key, "expected an array");
  return *it;
}

void check_source_name(const std::string& name, const std::string& origin) {
  if (name.empty()) schema_error(origin, "database", "must be non-empty");
  if (name == "conflate") schema_error(origin, "database", "\"conflate\" is reserved");
  if (name.find_first_of("+,\"\r\n") != std::string::npos) {
    schema_error(origin, "database", "must not contain '+', ',', quotes or newlines");
  }
}

std::optional<std::string> usable_doi(const std::optional<std::string>& raw) {
  if (!raw) return std::nullopt;
  try {
    return DoiId::normalize(*raw).str();
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

auto entity_key(const EntityRef& ref) { return std::tie(ref.kind, ref.id); }

}  // namespace

const SnapshotEntity* DatabaseSnapshot::find(const EntityRef& ref) const {
  for (const auto& e : entities) {
    if (e.entity == ref) return &e;
  }
  return nullptr;
}

DatabaseSnapshot parse_snapshot(std::string_view text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& err) {
    const auto [line, column] = line_column(text, err.byte == 0 ? 0 : err.byte - 1);
    throw ParseError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " +
                         err.what(),
                     line, column);
  }
  if (!doc.is_object()) schema_error(origin, "$", "expected an object");

  DatabaseSnapshot snapshot;
  snapshot.source_name = required_string(doc, "database", origin, "$");
  check_source_name(snapshot.source_name, origin);

  auto entities_it = doc.find("entities");
  if (entities_it == doc.end() || !entities_it->is_array()) {
    schema_error(origin, "$.entities", "expected an array");
  }

  std::map<std::tuple<EntityKind, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < entities_it->size(); ++i) {
    const json& e = (*entities_it)[i];
    const std::string path = "$.entities[" + std::to_string(i) + "]";
    if (!e.is_object()) schema_error(origin, path, "expected an object");

    SnapshotEntity entity;
    try {
      entity.entity.kind = parse_entity_kind(required_string(e, "kind", origin, path));
      entity.entity.id = required_string(e, "id", origin, path);
      if (auto g = e.find("group"); g != e.end() && !g->is_null()) {
        if (!g->is_string()) schema_error(origin, path + ".group", "expected a string");
        entity.entity.group = g->get<std::string>();
      }
      entity.entity.validate();
    } catch (const InvalidEntity& err) {
      schema_error(origin, path, err.what());
    }

    const auto key = std::make_tuple(entity.entity.kind, entity.entity.id);
    if (auto [it, inserted] = seen.emplace(key, i); !inserted) {
      throw DuplicateEntity(origin + ": " + path + ": " + std::string(to_string(entity.entity.kind)) +
                            " '" + entity.entity.id + "' already listed at $.entities[" +
                            std::to_string(it->second) + "]");
    }

    const json& pubs = optional_array(e, "publications", origin, path);
    for (std::size_t j = 0; j < pubs.size(); ++j) {
      const json& p = pubs[j];
      const std::string ppath = path + ".publications[" + std::to_string(j) + "]";
      if (!p.is_object()) schema_error(origin, ppath, "expected an object");
      RawPublication pub;
      pub.doi = optional_doi(p, origin, ppath);
      const json& citers = optional_array(p, "citers", origin, ppath);
      for (std::size_t k = 0; k < citers.size(); ++k) {
        const std::string cpath = ppath + ".citers[" + std::to_string(k) + "]";
        if (!citers[k].is_object()) schema_error(origin, cpath, "expected an object");
        pub.citers.push_back(RawCiter{optional_doi(citers[k], origin, cpath)});
      }
      entity.publications.push_back(std::move(pub));
    }
    snapshot.entities.push_back(std::move(entity));
  }
  return snapshot;
}

DatabaseSnapshot load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_snapshot(buffer.str(), path.string());
}

DatabaseSnapshot filter_articles(DatabaseSnapshot snapshot) {
  for (auto& entity : snapshot.entities) {
    std::vector<RawPublication> kept;
    kept.reserve(entity.publications.size());
    for (auto& pub : entity.publications) {
      if (auto doi = usable_doi(pub.doi)) {
        pub.doi = std::move(doi);
        kept.push_back(std::move(pub));
      }
    }
    entity.publications = std::move(kept);
  }
  return snapshot;
}

DatabaseSnapshot filter_citers(DatabaseSnapshot snapshot) {
  for (auto& entity : snapshot.entities) {
    for (auto& pub : entity.publications) {
      std::set<std::string> distinct;
      for (const auto& citer : pub.citers) {
        if (auto doi = usable_doi(citer.doi)) distinct.insert(std::move(*doi));
      }
      pub.citers.clear();
      for (auto& doi : distinct) pub.citers.push_back(RawCiter{doi});
    }
  }
  return snapshot;
}

std::vector<PublicationRecord> assemble(std::span<const DatabaseSnapshot> snapshots,
                                        const EntityRef& entity) {
  std::set<std::string> names;
  for (const auto& s : snapshots) {
    if (!names.insert(s.source_name).second) {
      throw DuplicateSource("source '" + s.source_name + "' given more than once");
    }
  }

  struct Merged {
    std::set<std::string> sources;
    std::map<std::string, DoiSet> citers;
  };
  std::map<DoiId, Merged> merged;
  bool found = false;

  for (const auto& snapshot : snapshots) {
    const SnapshotEntity* listed = snapshot.find(entity);
    if (listed == nullptr) continue;
    found = true;
    for (const auto& pub : listed->publications) {
      if (!pub.doi) continue;
      auto& slot = merged[DoiId::normalize(*pub.doi)];
      slot.sources.insert(snapshot.source_name);
      auto& citers = slot.citers[snapshot.source_name];
      for (const auto& citer : pub.citers) {
        if (citer.doi) citers.insert(DoiId::normalize(*citer.doi));
      }
    }
  }
  if (!found) {
    throw UnknownEntity(std::string(to_string(entity.kind)) + " '" + entity.id +
                        "' is not listed in any snapshot");
  }

  std::vector<PublicationRecord> records;
  records.reserve(merged.size());
  for (auto& [doi, m] : merged) {
    records.push_back(PublicationRecord::make(doi, std::move(m.citers), std::move(m.sources)));
  }
  return records;
}

EntityRef resolve_entity(std::span<const DatabaseSnapshot> snapshots, const EntityRef& entity) {
  std::optional<EntityRef> out;
  for (const auto& snapshot : snapshots) {
    const SnapshotEntity* listed = snapshot.find(entity);
    if (listed == nullptr) continue;
    if (!out) {
      out = listed->entity;
    } else if (!listed->entity.group.empty() &&
               (out->group.empty() || listed->entity.group < out->group)) {
      out->group = listed->entity.group;
    }
  }
  if (!out) {
    throw UnknownEntity(std::string(to_string(entity.kind)) + " '" + entity.id +
                        "' is not listed in any snapshot");
  }
  return *out;
}

std::vector<EntityRef> list_entities(std::span<const DatabaseSnapshot> snapshots) {
  std::vector<EntityRef> refs;
  for (const auto& snapshot : snapshots) {
    for (const auto& e : snapshot.entities) {
      if (std::none_of(refs.begin(), refs.end(), [&](const EntityRef& r) { return r == e.entity; })) {
        refs.push_back(resolve_entity(snapshots, e.entity));
      }
    }
  }
  std::sort(refs.begin(), refs.end(),
            [](const EntityRef& a, const EntityRef& b) { return entity_key(a) < entity_key(b); });
  return refs;
}

std::vector<DatabaseSnapshot> collect(std::span<const std::unique_ptr<SnapshotProvider>> providers) {
  std::vector<DatabaseSnapshot> out;
  out.reserve(providers.size());
  for (const auto& provider : providers) out.push_back(filter_snapshot(provider->fetch()));
  return out;
}

}  // namespace conflate
