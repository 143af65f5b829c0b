#pragma once

// Registry of the compression, decompression and code-generation prompt
// templates. Template texts ship as resource files under prompts/ with a
// checksummed manifest; the same files are embedded into the library at build
// time and verified when the built-in catalog is first constructed.

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semcomp::prompts {

inline constexpr std::string_view kPlaceholder = "{{PAYLOAD}}";

enum class Strategy {
  Base,
  Lossless,
  Semantic,
  CodegenDescribe,
  CodegenCompressDesc,
  CodegenReconstructBase,
  CodegenReconstructCompressed,
  CodegenJudge,
};

enum class Direction { Compress, Decompress, Generate };

enum class Style { Chat, SystemAction };

std::string_view to_string(Strategy s) noexcept;
std::string_view to_string(Direction d) noexcept;
std::string_view to_string(Style s) noexcept;
Strategy parse_strategy(std::string_view s);
Direction parse_direction(std::string_view s);
Style parse_style(std::string_view s);

struct PromptTemplate {
  std::string id;
  std::optional<std::string> system_text;
  std::string action_text;  // contains kPlaceholder exactly once
  Strategy strategy = Strategy::Base;
  Direction direction = Direction::Compress;
  Style style = Style::Chat;
  std::string provenance;  // "published" or "harness-defined"
};

enum class Role { System, User };
std::string_view to_string(Role r) noexcept;

struct ChatMessage {
  Role role = Role::User;
  std::string text;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct RenderedPrompt {
  std::vector<ChatMessage> messages;

  /// Concatenation of every message text, for leakage scans.
  std::string joined_text() const;
  friend bool operator==(const RenderedPrompt&, const RenderedPrompt&) = default;
};

class PromptCatalog {
 public:
  /// The catalog compiled into the library. Verified once; throws
  /// Error(CatalogCorrupt) if an embedded file disagrees with its checksum.
  static const PromptCatalog& builtin();

  /// Load and verify a manifest.json plus template files from disk.
  static PromptCatalog load_directory(const std::filesystem::path& dir);

  const PromptTemplate& get(std::string_view id) const;
  bool contains(std::string_view id) const;
  std::vector<std::string> ids() const;

  /// Template for a compression strategy. Falls back to the chat style when
  /// the requested style has no template (the base strategy is chat only).
  const PromptTemplate& resolve(Strategy strategy, Direction direction, Style style) const;

 private:
  using FileReader = std::string (*)(const void* ctx, const std::string& path);
  static PromptCatalog parse(std::string_view manifest_json, const void* ctx, FileReader read);

  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

/// Substitute the payload for the placeholder. The payload is inserted raw,
/// once, and never re-scanned.
RenderedPrompt render(const PromptTemplate& tmpl, std::string_view payload);

}  // namespace semcomp::prompts
