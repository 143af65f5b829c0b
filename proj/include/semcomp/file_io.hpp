#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace semcomp::io {

/// Whole-file binary read. Throws Error(MissingFile) if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Whole-file binary write, creating parent directories. Throws Error(IoFailure).
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace semcomp::io
