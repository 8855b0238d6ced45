#pragma once

// Metadata graph for run artifacts: records with content-addressed
// artifacts, named links between records, and (nested) collections.
//
// Directory layout:
//   STORE                      header: format version and digest name
//   objects/<h[0:2]>/<hash>    artifact bytes, stored once per content
//   records/<id>.json
//   links/<sha(from,to,name)>.json
//   collections/<id>.json

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cb/types.hpp"

namespace cb::records {

struct Artifact {
  std::string name;
  std::string hash;
  std::uint64_t size = 0;
  /// Relative to the store root.
  std::string storage_path;

  bool operator==(const Artifact&) const = default;
};

struct Record {
  std::string record_id;
  std::string title;
  std::string description;
  std::map<std::string, std::string> metadata;
  std::vector<Artifact> artifacts;
  TimestampNs created_at = 0;

  bool operator==(const Record&) const = default;
};

struct RecordLink {
  std::string from_id;
  std::string to_id;
  std::string name;

  auto operator<=>(const RecordLink&) const = default;
};

struct Collection {
  std::string collection_id;
  std::string title;
  std::set<std::string> member_record_ids;
  std::optional<std::string> parent_collection_id;

  bool operator==(const Collection&) const = default;
};

/// Link names used by the pipeline.
inline constexpr const char* kLinkProducedOn = "produced-on";
inline constexpr const char* kLinkLogOf = "log-of";
inline constexpr const char* kLinkStateOf = "state-of";
inline constexpr const char* kLinkScriptOf = "script-of";
inline constexpr const char* kLinkPlotOf = "plot-of";

struct Finding {
  std::string kind;  // dangling-link, self-link, hash-mismatch, missing-object, ...
  std::string subject;
  std::string detail;

  bool operator==(const Finding&) const = default;
};

using ArtifactInput = std::pair<std::string, std::string>;  // (name, bytes)

class RecordStore {
 public:
  /// Opens or initializes the store at `root`. Throws Error(store_unavailable).
  explicit RecordStore(std::filesystem::path root);

  Record create_record(const std::string& title, const std::string& description,
                       const std::map<std::string, std::string>& metadata,
                       const std::vector<ArtifactInput>& artifacts);

  /// Throws UnknownRecord, SelfLink or DuplicateLink.
  RecordLink link_records(const std::string& from, const std::string& to, const std::string& name);

  Collection create_collection(const std::string& title,
                               const std::optional<std::string>& parent = std::nullopt);
  void add_to_collection(const std::string& collection_id, const std::string& record_id);
  /// Rejects (CollectionCycle) a parent that would close a cycle.
  void set_parent(const std::string& collection_id, const std::optional<std::string>& parent);

  std::optional<Record> record(const std::string& id) const;
  std::optional<Collection> collection(const std::string& id) const;
  std::vector<Record> all_records() const;
  std::vector<Collection> all_collections() const;
  std::vector<RecordLink> links_from(const std::string& id) const;
  std::vector<RecordLink> links_to(const std::string& id) const;
  std::vector<RecordLink> all_links() const;

  /// Artifact bytes by content hash. Throws Error(not_found).
  std::string read_artifact(const std::string& hash) const;

  /// Graph document for the collection and its descendants: nodes are the
  /// member records, edges the links between them. Deterministic.
  std::string export_graph(const std::string& collection_id) const;
  /// Writes graph.json plus one sidecar file per referenced artifact hash.
  void export_bundle(const std::string& collection_id, const std::filesystem::path& out_dir) const;
  /// Loads a bundle written by export_bundle, preserving identifiers.
  void import_bundle(const std::filesystem::path& bundle_dir);

  const std::filesystem::path& root() const noexcept { return root_; }

 private:
  std::string store_object(const std::string& bytes);
  void write_record(const Record& r);
  void write_collection(const Collection& c);
  void write_link(const RecordLink& l);
  std::string new_id(char prefix);

  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, Record> records_;
  std::map<std::string, Collection> collections_;
  std::set<RecordLink> links_;
};

/// Re-reads the store from disk and reports every violated invariant:
/// dangling or self links, duplicate links, artifact hash mismatches,
/// missing objects, missing members and parent cycles. Empty iff healthy.
std::vector<Finding> integrity_check(const std::filesystem::path& root);

}  // namespace cb::records
