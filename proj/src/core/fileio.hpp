#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace r2u3d {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
/// Creates missing parent directories, writes to a sibling temporary file and renames it over `path`.
void write_file_bytes(const std::filesystem::path& path, const void* data, size_t size);
void write_file_text(const std::filesystem::path& path, const std::string& text);

}  // namespace r2u3d
