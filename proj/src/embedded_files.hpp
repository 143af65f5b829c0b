#pragma once

#include <span>
#include <string_view>

namespace semcomp::prompts::detail {

struct EmbeddedFile {
  std::string_view name;
  std::string_view bytes;
};

std::span<const EmbeddedFile> embedded_files();

}  // namespace semcomp::prompts::detail
