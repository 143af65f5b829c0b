#include "semcomp/corpus.hpp"

#include <set>

#include <json.hpp>

#include "semcomp/error.hpp"
#include "semcomp/file_io.hpp"
#include "semcomp/utf8.hpp"

namespace semcomp::corpus {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string required_string(const json& obj, const char* key, std::size_t index) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw Error(ErrorCode::ManifestInvalid,
                "entry " + std::to_string(index) + ": missing or empty '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

CorpusManifest parse_manifest(const fs::path& manifest_path) {
  std::string text;
  try {
    text = io::read_file(manifest_path);
  } catch (const Error&) {
    throw Error(ErrorCode::MissingFile, manifest_path.string());
  }

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ManifestInvalid, manifest_path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array()) {
    throw Error(ErrorCode::ManifestInvalid, manifest_path.string() + ": expected {corpus_name, entries:[...]}");
  }

  CorpusManifest manifest;
  manifest.corpus_name = doc.value("corpus_name", "");
  std::set<std::string> seen;
  std::size_t index = 0;
  for (const auto& e : doc["entries"]) {
    if (!e.is_object()) throw Error(ErrorCode::ManifestInvalid, "entry " + std::to_string(index) + " is not an object");
    ManifestEntry entry;
    entry.text_id = required_string(e, "id", index);
    entry.title = e.value("title", "");
    entry.author_or_source = e.value("source", "");
    entry.path = required_string(e, "path", index);
    if (e.contains("byte_len")) {
      if (!e["byte_len"].is_number_unsigned()) {
        throw Error(ErrorCode::ManifestInvalid, "entry " + entry.text_id + ": byte_len must be a non-negative integer");
      }
      entry.byte_len = e["byte_len"].get<std::uint64_t>();
    }
    if (!seen.insert(entry.text_id).second) {
      throw Error(ErrorCode::ManifestInvalid, "duplicate text id '" + entry.text_id + "'");
    }
    manifest.entries.push_back(std::move(entry));
    ++index;
  }
  if (manifest.entries.empty()) throw Error(ErrorCode::ManifestInvalid, "manifest lists no entries");
  return manifest;
}

std::vector<TextRecord> load_corpus(const fs::path& manifest_path) {
  const CorpusManifest manifest = parse_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();

  std::vector<TextRecord> records;
  records.reserve(manifest.entries.size());
  for (const auto& entry : manifest.entries) {
    const fs::path file = base / entry.path;
    if (!fs::is_regular_file(file)) throw Error(ErrorCode::MissingFile, file.string());
    TextRecord rec{entry.text_id, entry.title, entry.author_or_source, io::read_file(file), 0};
    rec.byte_len = rec.content.size();
    if (rec.content.empty()) throw Error(ErrorCode::ManifestInvalid, file.string() + " is empty");
    if (!utf8::is_valid(rec.content)) throw Error(ErrorCode::NotUtf8, file.string());
    if (entry.byte_len && *entry.byte_len != rec.byte_len) {
      throw Error(ErrorCode::ManifestInvalid, file.string() + ": declared byte_len " +
                                                  std::to_string(*entry.byte_len) + ", found " +
                                                  std::to_string(rec.byte_len));
    }
    records.push_back(std::move(rec));
  }
  return records;
}

fs::path export_corpus(const std::vector<TextRecord>& records, const std::string& corpus_name,
                       const fs::path& dir) {
  json entries = json::array();
  for (const auto& rec : records) {
    const std::string file = rec.text_id + ".txt";
    io::write_file(dir / file, rec.content);
    entries.push_back({{"id", rec.text_id},
                       {"title", rec.title},
                       {"source", rec.author_or_source},
                       {"path", file},
                       {"byte_len", rec.byte_len}});
  }
  const json doc = {{"corpus_name", corpus_name}, {"entries", entries}};
  const fs::path manifest = dir / "manifest.json";
  io::write_file(manifest, doc.dump(2) + "\n");
  return manifest;
}

}  // namespace semcomp::corpus
