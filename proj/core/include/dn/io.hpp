#pragma once

#include <filesystem>
#include <string>

namespace dn::io {

std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file followed by an atomic rename, so a
/// half-written file is never observable at `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace dn::io
