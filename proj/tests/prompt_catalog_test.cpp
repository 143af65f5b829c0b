#include "semcomp/prompt_catalog.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>
#include <string>

#include "oracles.hpp"
#include "semcomp/file_io.hpp"
#include "test_util.hpp"

namespace semcomp::prompts {
namespace {

using semcomp::testing::kSourceDir;
using semcomp::testing::TempDir;

const PromptCatalog& cat() { return PromptCatalog::builtin(); }

bool starts_with(const std::string& s, std::string_view p) { return s.rfind(p, 0) == 0; }
bool ends_with(const std::string& s, std::string_view p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

TEST(PromptCatalog, BaseCompressWording) {
  const auto r = render(cat().get("base.compress"), "hello");
  ASSERT_EQ(r.messages.size(), 1u);
  EXPECT_EQ(r.messages[0].role, Role::User);
  EXPECT_TRUE(starts_with(r.messages[0].text,
                          "Compress the following text into the smallest possible character representation"));
  EXPECT_TRUE(ends_with(r.messages[0].text, "\n\nhello"));
}

TEST(PromptCatalog, LosslessChatWording) {
  const auto& t = cat().resolve(Strategy::Lossless, Direction::Compress, Style::Chat);
  EXPECT_EQ(t.id, "lossless.compress.chat");
  EXPECT_FALSE(t.system_text.has_value());
  EXPECT_NE(t.action_text.find("perfectly reconstruct the original text from the compressed representation"),
            std::string::npos);
}

TEST(PromptCatalog, SemanticSystemActionLayout) {
  const auto& t = cat().resolve(Strategy::Semantic, Direction::Compress, Style::SystemAction);
  const auto r = render(t, "hello");
  ASSERT_EQ(r.messages.size(), 2u);
  EXPECT_EQ(r.messages[0].role, Role::System);
  EXPECT_EQ(r.messages[1].role, Role::User);
  EXPECT_TRUE(starts_with(r.messages[0].text, "You are a ChatGPT LLM trained by OpenAI to compress text"));
  EXPECT_TRUE(ends_with(r.messages[1].text, "Text to compress: hello"));
}

TEST(PromptCatalog, BaseFallsBackToChat) {
  EXPECT_EQ(cat().resolve(Strategy::Base, Direction::Compress, Style::SystemAction).id, "base.compress");
  EXPECT_EQ(cat().resolve(Strategy::Base, Direction::Decompress, Style::SystemAction).id, "base.decompress");
}

TEST(PromptCatalog, DecompressChatTemplatesQuoteTheirCompressPrompt) {
  const auto& lossless = cat().get("lossless.decompress.chat").action_text;
  EXPECT_NE(lossless.find("\xE2\x80\x9CPlease compress the following text into a latent representation"),
            std::string::npos);
  // The wording slip in the quoted prompt is kept as published.
  EXPECT_NE(lossless.find("should be must be lossless"), std::string::npos);
  const auto& semantic = cat().get("semantic.decompress.chat").action_text;
  EXPECT_NE(semantic.find("different ChatGPT4 model"), std::string::npos);
}

TEST(PromptCatalog, PayloadInsertedLiterally) {
  const auto& t = cat().get("base.compress");
  const std::string payload = "x {{PAYLOAD}} y {{PAYLOAD}}";
  const auto r = render(t, payload);
  const std::string prefix = t.action_text.substr(0, t.action_text.find(kPlaceholder));
  EXPECT_EQ(r.messages[0].text, prefix + payload);
}

TEST(PromptCatalog, RenderIsInjectiveInPayload) {
  std::mt19937_64 rng(42);
  for (const auto& id : cat().ids()) {
    const auto& t = cat().get(id);
    std::set<std::string> seen_payloads;
    std::set<std::string> seen_renders;
    for (int i = 0; i < 50; ++i) {
      const std::string p = oracle::random_string(rng, 1 + rng() % 12, "ab{}P\n ");
      if (!seen_payloads.insert(p).second) continue;
      EXPECT_TRUE(seen_renders.insert(render(t, p).joined_text()).second) << id << " payload " << p;
    }
  }
}

TEST(PromptCatalog, Errors) {
  EXPECT_SEMCOMP_ERROR(cat().get("no.such.template"), ErrorCode::UnknownTemplate);
  EXPECT_SEMCOMP_ERROR(render(cat().get("base.compress"), ""), ErrorCode::EmptyPayload);
  EXPECT_FALSE(cat().contains("no.such.template"));
  EXPECT_SEMCOMP_ERROR(parse_strategy("fancy"), ErrorCode::ConfigInvalid);
}

TEST(PromptCatalog, EveryTemplateHasOnePlaceholder) {
  EXPECT_EQ(cat().ids().size(), 15u);
  for (const auto& id : cat().ids()) {
    const auto& t = cat().get(id);
    const auto first = t.action_text.find(kPlaceholder);
    ASSERT_NE(first, std::string::npos) << id;
    EXPECT_EQ(t.action_text.find(kPlaceholder, first + 1), std::string::npos) << id;
    EXPECT_EQ(t.system_text.has_value(), t.style == Style::SystemAction) << id;
  }
}

TEST(PromptCatalog, DirectoryMatchesEmbeddedCopy) {
  const auto disk = PromptCatalog::load_directory(kSourceDir / "prompts");
  ASSERT_EQ(disk.ids(), cat().ids());
  for (const auto& id : disk.ids()) {
    EXPECT_EQ(disk.get(id).action_text, cat().get(id).action_text) << id;
    EXPECT_EQ(disk.get(id).system_text, cat().get(id).system_text) << id;
    EXPECT_EQ(disk.get(id).provenance, cat().get(id).provenance) << id;
  }
}

TEST(PromptCatalog, TamperedFileIsRejected) {
  TempDir tmp;
  std::filesystem::copy(kSourceDir / "prompts", tmp.path(), std::filesystem::copy_options::recursive);
  const auto victim = tmp / "base.compress.action.txt";
  io::write_file(victim, io::read_file(victim) + " ");
  EXPECT_SEMCOMP_ERROR(PromptCatalog::load_directory(tmp.path()), ErrorCode::CatalogCorrupt);
}

TEST(PromptCatalog, MissingManifestIsRejected) {
  TempDir tmp;
  try {
    PromptCatalog::load_directory(tmp.path());
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_TRUE(e.code() == ErrorCode::CatalogCorrupt || e.code() == ErrorCode::MissingFile) << e.what();
  }
}

}  // namespace
}  // namespace semcomp::prompts
