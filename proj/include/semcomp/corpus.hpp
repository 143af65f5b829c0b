#pragma once

// Evaluation corpora addressed through a JSON manifest:
//   {"corpus_name": ..., "entries": [{"id", "title", "source", "path"}, ...]}
// Paths are relative to the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace semcomp::corpus {

struct TextRecord {
  std::string text_id;
  std::string title;
  std::string author_or_source;
  std::string content;  // raw bytes, validated as UTF-8
  std::uint64_t byte_len = 0;

  friend bool operator==(const TextRecord&, const TextRecord&) = default;
};

struct ManifestEntry {
  std::string text_id;
  std::string title;
  std::string author_or_source;
  std::string path;
  std::optional<std::uint64_t> byte_len;  // declared size, checked when present
};

struct CorpusManifest {
  std::string corpus_name;
  std::vector<ManifestEntry> entries;
};

CorpusManifest parse_manifest(const std::filesystem::path& manifest_path);

/// Records in manifest order. Throws ManifestInvalid, MissingFile or NotUtf8.
std::vector<TextRecord> load_corpus(const std::filesystem::path& manifest_path);

/// Write one file per record plus manifest.json into `dir`.
std::filesystem::path export_corpus(const std::vector<TextRecord>& records,
                                    const std::string& corpus_name,
                                    const std::filesystem::path& dir);

}  // namespace semcomp::corpus
