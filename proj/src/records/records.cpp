#include "cb/records.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include "json.hpp"

#include "cb/digest.hpp"
#include "cb/error.hpp"

namespace cb::records {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStoreHeader = "cb-records v1";
constexpr const char* kGraphFormat = "cb-records-graph";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const fs::path& path, std::string_view data) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw Error(Errc::storage_error, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) throw Error(Errc::storage_error, "cannot rename into " + path.string());
}

std::string object_path(const std::string& hash) { return "objects/" + hash.substr(0, 2) + "/" + hash; }

json to_json(const Artifact& a) {
  return {{"name", a.name}, {"hash", a.hash}, {"size", a.size}, {"storage_path", a.storage_path}};
}

json to_json(const Record& r) {
  json artifacts = json::array();
  for (const auto& a : r.artifacts) artifacts.push_back(to_json(a));
  return {{"record_id", r.record_id}, {"title", r.title},         {"description", r.description},
          {"metadata", r.metadata},   {"artifacts", artifacts},   {"created_at", r.created_at}};
}

json to_json(const Collection& c) {
  return {{"collection_id", c.collection_id},
          {"title", c.title},
          {"member_record_ids", c.member_record_ids},
          {"parent_collection_id", c.parent_collection_id ? json(*c.parent_collection_id) : json(nullptr)}};
}

json to_json(const RecordLink& l) { return {{"from_id", l.from_id}, {"to_id", l.to_id}, {"name", l.name}}; }

Record record_from_json(const json& j) {
  Record r;
  r.record_id = j.at("record_id").get<std::string>();
  r.title = j.at("title").get<std::string>();
  r.description = j.at("description").get<std::string>();
  r.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
  r.created_at = j.at("created_at").get<TimestampNs>();
  for (const auto& a : j.at("artifacts")) {
    r.artifacts.push_back(Artifact{a.at("name").get<std::string>(), a.at("hash").get<std::string>(),
                                   a.at("size").get<std::uint64_t>(), a.at("storage_path").get<std::string>()});
  }
  return r;
}

Collection collection_from_json(const json& j) {
  Collection c;
  c.collection_id = j.at("collection_id").get<std::string>();
  c.title = j.at("title").get<std::string>();
  c.member_record_ids = j.at("member_record_ids").get<std::set<std::string>>();
  if (const auto& p = j.at("parent_collection_id"); !p.is_null()) c.parent_collection_id = p.get<std::string>();
  return c;
}

RecordLink link_from_json(const json& j) {
  return {j.at("from_id").get<std::string>(), j.at("to_id").get<std::string>(), j.at("name").get<std::string>()};
}

std::string link_file_name(const RecordLink& l) {
  return sha256_hex(l.from_id + '\0' + l.to_id + '\0' + l.name) + ".json";
}

template <typename F>
void for_each_json(const fs::path& dir, F&& f) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) f(p);
}

}  // namespace

RecordStore::RecordStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_))
    throw Error(Errc::store_unavailable, "cannot open record store " + root_.string());
  const fs::path header = root_ / "STORE";
  const std::string expected = std::string(kStoreHeader) + "\ndigest: " + std::string(kDigestName) + "\n";
  if (fs::exists(header)) {
    if (read_file(header) != expected)
      throw Error(Errc::store_unavailable, "unsupported record store header in " + root_.string());
  } else {
    write_file_atomic(header, expected);
  }
  try {
    for_each_json(root_ / "records", [&](const fs::path& p) {
      Record r = record_from_json(json::parse(read_file(p)));
      records_.emplace(r.record_id, std::move(r));
    });
    for_each_json(root_ / "collections", [&](const fs::path& p) {
      Collection c = collection_from_json(json::parse(read_file(p)));
      collections_.emplace(c.collection_id, std::move(c));
    });
    for_each_json(root_ / "links", [&](const fs::path& p) { links_.insert(link_from_json(json::parse(read_file(p)))); });
  } catch (const json::exception& e) {
    throw Error(Errc::store_unavailable, std::string("corrupt record store: ") + e.what());
  }
}

std::string RecordStore::new_id(char prefix) {
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  static constexpr char hex[] = "0123456789abcdef";
  while (true) {
    std::uint64_t v = rng();
    std::string id(1, prefix);
    for (int i = 0; i < 16; ++i, v >>= 4) id += hex[v & 0xf];
    if (!records_.count(id) && !collections_.count(id)) return id;
  }
}

std::string RecordStore::store_object(const std::string& bytes) {
  const std::string hash = sha256_hex(bytes);
  const fs::path path = root_ / object_path(hash);
  if (!fs::exists(path)) write_file_atomic(path, bytes);
  return hash;
}

void RecordStore::write_record(const Record& r) {
  write_file_atomic(root_ / "records" / (r.record_id + ".json"), to_json(r).dump(2));
}

void RecordStore::write_collection(const Collection& c) {
  write_file_atomic(root_ / "collections" / (c.collection_id + ".json"), to_json(c).dump(2));
}

void RecordStore::write_link(const RecordLink& l) {
  write_file_atomic(root_ / "links" / link_file_name(l), to_json(l).dump(2));
}

Record RecordStore::create_record(const std::string& title, const std::string& description,
                                  const std::map<std::string, std::string>& metadata,
                                  const std::vector<ArtifactInput>& artifacts) {
  if (title.empty()) throw Error(Errc::invalid_argument, "record title must not be empty");
  std::lock_guard lock(mutex_);
  Record r;
  r.record_id = new_id('r');
  r.title = title;
  r.description = description;
  r.metadata = metadata;
  r.created_at = now_ns();
  for (const auto& [name, bytes] : artifacts) {
    const std::string hash = store_object(bytes);
    r.artifacts.push_back(Artifact{name, hash, bytes.size(), object_path(hash)});
  }
  write_record(r);
  records_.emplace(r.record_id, r);
  return r;
}

RecordLink RecordStore::link_records(const std::string& from, const std::string& to, const std::string& name) {
  if (name.empty()) throw Error(Errc::invalid_argument, "link name must not be empty");
  std::lock_guard lock(mutex_);
  if (!records_.count(from)) throw Error(Errc::unknown_record, "unknown record " + from);
  if (!records_.count(to)) throw Error(Errc::unknown_record, "unknown record " + to);
  if (from == to) throw Error(Errc::self_link, "record " + from + " cannot link to itself");
  RecordLink link{from, to, name};
  if (links_.count(link)) throw Error(Errc::duplicate_link, "link " + from + " -" + name + "-> " + to + " exists");
  write_link(link);
  links_.insert(link);
  return link;
}

Collection RecordStore::create_collection(const std::string& title, const std::optional<std::string>& parent) {
  if (title.empty()) throw Error(Errc::invalid_argument, "collection title must not be empty");
  std::lock_guard lock(mutex_);
  if (parent && !collections_.count(*parent)) throw Error(Errc::unknown_collection, "unknown collection " + *parent);
  Collection c{new_id('c'), title, {}, parent};
  write_collection(c);
  collections_.emplace(c.collection_id, c);
  return c;
}

void RecordStore::add_to_collection(const std::string& collection_id, const std::string& record_id) {
  std::lock_guard lock(mutex_);
  auto it = collections_.find(collection_id);
  if (it == collections_.end()) throw Error(Errc::unknown_collection, "unknown collection " + collection_id);
  if (!records_.count(record_id)) throw Error(Errc::unknown_record, "unknown record " + record_id);
  Collection updated = it->second;
  if (!updated.member_record_ids.insert(record_id).second) return;
  write_collection(updated);
  it->second = std::move(updated);
}

void RecordStore::set_parent(const std::string& collection_id, const std::optional<std::string>& parent) {
  std::lock_guard lock(mutex_);
  auto it = collections_.find(collection_id);
  if (it == collections_.end()) throw Error(Errc::unknown_collection, "unknown collection " + collection_id);
  if (parent) {
    if (!collections_.count(*parent)) throw Error(Errc::unknown_collection, "unknown collection " + *parent);
    std::optional<std::string> cursor = parent;
    std::set<std::string> visited;
    while (cursor) {
      if (*cursor == collection_id || !visited.insert(*cursor).second)
        throw Error(Errc::collection_cycle, "parent " + *parent + " would create a cycle");
      auto p = collections_.find(*cursor);
      cursor = p == collections_.end() ? std::nullopt : p->second.parent_collection_id;
    }
  }
  Collection updated = it->second;
  updated.parent_collection_id = parent;
  write_collection(updated);
  it->second = std::move(updated);
}

std::optional<Record> RecordStore::record(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

std::optional<Collection> RecordStore::collection(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = collections_.find(id);
  if (it == collections_.end()) return std::nullopt;
  return it->second;
}

std::vector<Record> RecordStore::all_records() const {
  std::lock_guard lock(mutex_);
  std::vector<Record> out;
  for (const auto& [id, r] : records_) out.push_back(r);
  return out;
}

std::vector<Collection> RecordStore::all_collections() const {
  std::lock_guard lock(mutex_);
  std::vector<Collection> out;
  for (const auto& [id, c] : collections_) out.push_back(c);
  return out;
}

std::vector<RecordLink> RecordStore::links_from(const std::string& id) const {
  std::lock_guard lock(mutex_);
  std::vector<RecordLink> out;
  for (const auto& l : links_)
    if (l.from_id == id) out.push_back(l);
  return out;
}

std::vector<RecordLink> RecordStore::links_to(const std::string& id) const {
  std::lock_guard lock(mutex_);
  std::vector<RecordLink> out;
  for (const auto& l : links_)
    if (l.to_id == id) out.push_back(l);
  return out;
}

std::vector<RecordLink> RecordStore::all_links() const {
  std::lock_guard lock(mutex_);
  return {links_.begin(), links_.end()};
}

std::string RecordStore::read_artifact(const std::string& hash) const {
  if (hash.size() < 2) throw Error(Errc::not_found, "invalid artifact hash");
  return read_file(root_ / object_path(hash));
}

std::string RecordStore::export_graph(const std::string& collection_id) const {
  std::lock_guard lock(mutex_);
  if (!collections_.count(collection_id))
    throw Error(Errc::unknown_collection, "unknown collection " + collection_id);

  // Descendants: collections whose parent chain reaches the root.
  std::set<std::string> closure = {collection_id};
  for (bool grew = true; grew;) {
    grew = false;
    for (const auto& [id, c] : collections_) {
      if (!closure.count(id) && c.parent_collection_id && closure.count(*c.parent_collection_id)) {
        closure.insert(id);
        grew = true;
      }
    }
  }

  json collections = json::array();
  std::set<std::string> members;
  for (const auto& id : closure) {
    Collection c = collections_.at(id);
    if (id == collection_id) c.parent_collection_id.reset();
    members.insert(c.member_record_ids.begin(), c.member_record_ids.end());
    collections.push_back(to_json(c));
  }
  json nodes = json::array();
  for (const auto& id : members) {
    if (auto it = records_.find(id); it != records_.end()) nodes.push_back(to_json(it->second));
  }
  json edges = json::array();
  for (const auto& l : links_)
    if (members.count(l.from_id) && members.count(l.to_id)) edges.push_back(to_json(l));

  json doc = {{"format", kGraphFormat}, {"version", 1},        {"digest", kDigestName},
              {"collection", collection_id}, {"collections", collections}, {"nodes", nodes},
              {"edges", edges}};
  return doc.dump(2) + "\n";
}

void RecordStore::export_bundle(const std::string& collection_id, const fs::path& out_dir) const {
  const std::string doc = export_graph(collection_id);
  write_file_atomic(out_dir / "graph.json", doc);
  const json graph = json::parse(doc);
  for (const auto& node : graph.at("nodes")) {
    for (const auto& a : node.at("artifacts")) {
      const std::string hash = a.at("hash").get<std::string>();
      const fs::path target = out_dir / "objects" / hash;
      if (!fs::exists(target)) write_file_atomic(target, read_artifact(hash));
    }
  }
}

void RecordStore::import_bundle(const fs::path& bundle_dir) {
  json doc;
  try {
    doc = json::parse(read_file(bundle_dir / "graph.json"));
  } catch (const json::exception& e) {
    throw Error(Errc::storage_error, std::string("malformed graph document: ") + e.what());
  }
  if (doc.value("format", "") != kGraphFormat || doc.value("version", 0) != 1 ||
      doc.value("digest", "") != kDigestName)
    throw Error(Errc::storage_error, "unsupported graph document");

  std::lock_guard lock(mutex_);
  for (const auto& node : doc.at("nodes")) {
    Record r = record_from_json(node);
    for (const auto& a : r.artifacts) {
      const std::string bytes = read_file(bundle_dir / "objects" / a.hash);
      if (store_object(bytes) != a.hash)
        throw Error(Errc::storage_error, "artifact " + a.name + " does not match its hash");
    }
    if (auto it = records_.find(r.record_id); it != records_.end()) {
      if (it->second != r) throw Error(Errc::storage_error, "conflicting record " + r.record_id);
      continue;
    }
    write_record(r);
    records_.emplace(r.record_id, std::move(r));
  }
  for (const auto& cj : doc.at("collections")) {
    Collection c = collection_from_json(cj);
    if (auto it = collections_.find(c.collection_id); it != collections_.end()) {
      c.member_record_ids.insert(it->second.member_record_ids.begin(), it->second.member_record_ids.end());
    }
    write_collection(c);
    collections_[c.collection_id] = std::move(c);
  }
  for (const auto& ej : doc.at("edges")) {
    RecordLink l = link_from_json(ej);
    if (links_.insert(l).second) write_link(l);
  }
}

std::vector<Finding> integrity_check(const fs::path& root) {
  std::vector<Finding> findings;
  std::map<std::string, Record> records;
  std::map<std::string, Collection> collections;
  std::vector<RecordLink> links;

  auto guarded = [&](const fs::path& p, auto&& fn) {
    try {
      fn(json::parse(read_file(p)));
    } catch (const std::exception& e) {
      findings.push_back({"corrupt-file", p.filename().string(), e.what()});
    }
  };
  for_each_json(root / "records", [&](const fs::path& p) {
    guarded(p, [&](const json& j) {
      Record r = record_from_json(j);
      records.emplace(r.record_id, std::move(r));
    });
  });
  for_each_json(root / "collections", [&](const fs::path& p) {
    guarded(p, [&](const json& j) {
      Collection c = collection_from_json(j);
      collections.emplace(c.collection_id, std::move(c));
    });
  });
  for_each_json(root / "links", [&](const fs::path& p) { guarded(p, [&](const json& j) { links.push_back(link_from_json(j)); }); });

  std::map<std::string, bool> object_ok;
  for (const auto& [id, r] : records) {
    for (const auto& a : r.artifacts) {
      const fs::path path = root / object_path(a.hash);
      std::string bytes;
      try {
        bytes = read_file(path);
      } catch (const Error&) {
        findings.push_back({"missing-object", id, a.name + " -> " + a.hash});
        continue;
      }
      if (sha256_hex(bytes) != a.hash) findings.push_back({"hash-mismatch", id, a.name + " -> " + a.hash});
      else if (bytes.size() != a.size) findings.push_back({"size-mismatch", id, a.name});
    }
  }

  std::set<RecordLink> seen;
  for (const auto& l : links) {
    const std::string subject = l.from_id + " -" + l.name + "-> " + l.to_id;
    if (!records.count(l.from_id) || !records.count(l.to_id))
      findings.push_back({"dangling-link", subject, "endpoint does not exist"});
    if (l.from_id == l.to_id) findings.push_back({"self-link", subject, ""});
    if (l.name.empty()) findings.push_back({"unnamed-link", subject, ""});
    if (!seen.insert(l).second) findings.push_back({"duplicate-link", subject, ""});
  }

  for (const auto& [id, c] : collections) {
    for (const auto& m : c.member_record_ids)
      if (!records.count(m)) findings.push_back({"missing-member", id, m});
    if (c.parent_collection_id && !collections.count(*c.parent_collection_id))
      findings.push_back({"missing-parent", id, *c.parent_collection_id});
    std::set<std::string> visited = {id};
    std::optional<std::string> cursor = c.parent_collection_id;
    while (cursor) {
      if (!visited.insert(*cursor).second) {
        findings.push_back({"parent-cycle", id, *cursor});
        break;
      }
      auto p = collections.find(*cursor);
      cursor = p == collections.end() ? std::nullopt : p->second.parent_collection_id;
    }
  }
  return findings;
}

}  // namespace cb::records
