#include "semcomp/prompt_catalog.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "embedded_files.hpp"
#include "semcomp/digest.hpp"
#include "semcomp/error.hpp"

namespace semcomp::prompts {

using nlohmann::json;

namespace {

template <typename E, std::size_t N>
E parse_enum(std::string_view text, const std::pair<std::string_view, E> (&table)[N],
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == text) return value;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown " + std::string(what) + " '" + std::string(text) + "'");
}

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::pair<std::string_view, E> (&table)[N]) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::pair<std::string_view, Strategy> kStrategies[] = {
    {"base", Strategy::Base},
    {"lossless", Strategy::Lossless},
    {"semantic", Strategy::Semantic},
    {"codegen.describe", Strategy::CodegenDescribe},
    {"codegen.compress_desc", Strategy::CodegenCompressDesc},
    {"codegen.reconstruct_base", Strategy::CodegenReconstructBase},
    {"codegen.reconstruct_compressed", Strategy::CodegenReconstructCompressed},
    {"codegen.judge", Strategy::CodegenJudge},
};
constexpr std::pair<std::string_view, Direction> kDirections[] = {
    {"compress", Direction::Compress},
    {"decompress", Direction::Decompress},
    {"generate", Direction::Generate},
};
constexpr std::pair<std::string_view, Style> kStyles[] = {
    {"chat", Style::Chat},
    {"system_action", Style::SystemAction},
};

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

std::string read_embedded(const void*, const std::string& path) {
  for (const auto& f : detail::embedded_files()) {
    if (f.name == path) return std::string(f.bytes);
  }
  throw Error(ErrorCode::CatalogCorrupt, "embedded resource missing: " + path);
}

std::string read_from_dir(const void* ctx, const std::string& path) {
  const auto& dir = *static_cast<const std::filesystem::path*>(ctx);
  std::ifstream in(dir / path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, (dir / path).string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string_view to_string(Strategy s) noexcept { return enum_name(s, kStrategies); }
std::string_view to_string(Direction d) noexcept { return enum_name(d, kDirections); }
std::string_view to_string(Style s) noexcept { return enum_name(s, kStyles); }
std::string_view to_string(Role r) noexcept { return r == Role::System ? "system" : "user"; }

Strategy parse_strategy(std::string_view s) { return parse_enum(s, kStrategies, "strategy"); }
Direction parse_direction(std::string_view s) { return parse_enum(s, kDirections, "direction"); }
Style parse_style(std::string_view s) { return parse_enum(s, kStyles, "prompt style"); }

std::string RenderedPrompt::joined_text() const {
  std::string out;
  for (const auto& m : messages) {
    out += m.text;
    out += '\n';
  }
  return out;
}

PromptCatalog PromptCatalog::parse(std::string_view manifest_json, const void* ctx, FileReader read) {
  json manifest;
  try {
    manifest = json::parse(manifest_json);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CatalogCorrupt, std::string("manifest: ") + e.what());
  }
  if (manifest.value("placeholder", "") != kPlaceholder) {
    throw Error(ErrorCode::CatalogCorrupt, "manifest placeholder does not match the library's");
  }

  auto load_checked = [&](const json& ref, const std::string& id) {
    const std::string path = ref.at("path").get<std::string>();
    std::string text = read(ctx, path);
    if (digest::sha256_hex(text) != ref.at("sha256").get<std::string>()) {
      throw Error(ErrorCode::CatalogCorrupt, "checksum mismatch for " + id + " (" + path + ")");
    }
    return text;
  };

  PromptCatalog catalog;
  try {
    for (const auto& entry : manifest.at("templates")) {
      PromptTemplate t;
      t.id = entry.at("id").get<std::string>();
      t.strategy = parse_strategy(entry.at("strategy").get<std::string>());
      t.direction = parse_direction(entry.at("direction").get<std::string>());
      t.style = parse_style(entry.at("style").get<std::string>());
      t.provenance = entry.value("provenance", "");
      if (entry.contains("system")) t.system_text = load_checked(entry.at("system"), t.id);
      t.action_text = load_checked(entry.at("action"), t.id);

      if (count_occurrences(t.action_text, kPlaceholder) != 1) {
        throw Error(ErrorCode::CatalogCorrupt, t.id + ": action text must hold exactly one placeholder");
      }
      if (t.system_text && t.system_text->find(kPlaceholder) != std::string::npos) {
        throw Error(ErrorCode::CatalogCorrupt, t.id + ": system text must not hold a placeholder");
      }
      if (t.system_text.has_value() != (t.style == Style::SystemAction)) {
        throw Error(ErrorCode::CatalogCorrupt, t.id + ": style disagrees with presence of system text");
      }
      const std::string id = t.id;
      if (!catalog.templates_.emplace(id, std::move(t)).second) {
        throw Error(ErrorCode::CatalogCorrupt, "duplicate template id " + id);
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CatalogCorrupt, std::string("manifest: ") + e.what());
  }
  return catalog;
}

const PromptCatalog& PromptCatalog::builtin() {
  static const PromptCatalog catalog = parse(read_embedded(nullptr, "manifest.json"), nullptr, read_embedded);
  return catalog;
}

PromptCatalog PromptCatalog::load_directory(const std::filesystem::path& dir) {
  return parse(read_from_dir(&dir, "manifest.json"), &dir, read_from_dir);
}

const PromptTemplate& PromptCatalog::get(std::string_view id) const {
  const auto it = templates_.find(id);
  if (it == templates_.end()) throw Error(ErrorCode::UnknownTemplate, std::string(id));
  return it->second;
}

bool PromptCatalog::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

std::vector<std::string> PromptCatalog::ids() const {
  std::vector<std::string> out;
  out.reserve(templates_.size());
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

const PromptTemplate& PromptCatalog::resolve(Strategy strategy, Direction direction, Style style) const {
  const PromptTemplate* fallback = nullptr;
  for (const auto& [id, t] : templates_) {
    if (t.strategy != strategy || t.direction != direction) continue;
    if (t.style == style) return t;
    if (t.style == Style::Chat) fallback = &t;
  }
  if (fallback) return *fallback;
  throw Error(ErrorCode::UnknownTemplate, std::string(to_string(strategy)) + "/" +
                                              std::string(to_string(direction)));
}

RenderedPrompt render(const PromptTemplate& tmpl, std::string_view payload) {
  if (payload.empty()) throw Error(ErrorCode::EmptyPayload, "template " + tmpl.id);
  const std::size_t at = tmpl.action_text.find(kPlaceholder);
  std::string user;
  user.reserve(tmpl.action_text.size() + payload.size());
  user.append(tmpl.action_text, 0, at);
  user.append(payload);
  user.append(tmpl.action_text, at + kPlaceholder.size());

  RenderedPrompt out;
  if (tmpl.system_text) out.messages.push_back({Role::System, *tmpl.system_text});
  out.messages.push_back({Role::User, std::move(user)});
  return out;
}

}  // namespace semcomp::prompts
