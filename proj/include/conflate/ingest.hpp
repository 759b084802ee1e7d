#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "conflate/model.hpp"

namespace conflate {

/// Snapshot text could not be read. `line` and `column` are 1-based and
/// zero when the failure has no text position (e.g. schema errors, which
/// carry a JSON path in the message instead).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : std::runtime_error(what), line_(line), column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class DuplicateEntity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DuplicateSource : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownEntity : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RawCiter {
  std::optional<std::string> doi;
};

struct RawPublication {
  std::optional<std::string> doi;
  std::vector<RawCiter> citers;
};

struct SnapshotEntity {
  EntityRef entity;
  std::vector<RawPublication> publications;
};

/// One database's view of entities, publications and citing works.
struct DatabaseSnapshot {
  std::string source_name;
  std::vector<SnapshotEntity> entities;

  const SnapshotEntity* find(const EntityRef& ref) const;
};

/// Parses snapshot JSON. `origin` names the input in error messages.
DatabaseSnapshot parse_snapshot(std::string_view text, const std::string& origin = "<memory>");
DatabaseSnapshot load_snapshot(const std::filesystem::path& path);

/// Drops publications without a usable DOI and normalizes the rest.
DatabaseSnapshot filter_articles(DatabaseSnapshot snapshot);

/// Drops citers without a usable DOI; survivors are normalized and
/// deduplicated per publication.
DatabaseSnapshot filter_citers(DatabaseSnapshot snapshot);

/// filter_citers(filter_articles(snapshot))
inline DatabaseSnapshot filter_snapshot(DatabaseSnapshot snapshot) {
  return filter_citers(filter_articles(std::move(snapshot)));
}

/// Merges one entity's publications across filtered snapshots, keyed by DOI.
/// Throws DuplicateSource when two snapshots share a name and UnknownEntity
/// when no snapshot lists the entity. The returned records are sorted by DOI.
std::vector<PublicationRecord> assemble(std::span<const DatabaseSnapshot> snapshots,
                                        const EntityRef& entity);

/// The entity as listed in the snapshots, with a group label chosen
/// independently of snapshot order (smallest non-empty label).
EntityRef resolve_entity(std::span<const DatabaseSnapshot> snapshots, const EntityRef& entity);

/// Every distinct entity across the snapshots, sorted by (kind, id).
std::vector<EntityRef> list_entities(std::span<const DatabaseSnapshot> snapshots);

/// Source of one database's snapshot. File-backed today; live adapters can
/// implement the same interface.
class SnapshotProvider {
 public:
  virtual ~SnapshotProvider() = default;
  virtual DatabaseSnapshot fetch() = 0;
};

class FileSnapshotProvider final : public SnapshotProvider {
 public:
  explicit FileSnapshotProvider(std::filesystem::path path) : path_(std::move(path)) {}
  DatabaseSnapshot fetch() override { return load_snapshot(path_); }

 private:
  std::filesystem::path path_;
};

/// Fetches and filters every provider's snapshot.
std::vector<DatabaseSnapshot> collect(std::span<const std::unique_ptr<SnapshotProvider>> providers);

}  // namespace conflate
