#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace fusionkit::detail {

/// Whole-file read; throws kIoError.
std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`; throws kIoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fusionkit::detail
