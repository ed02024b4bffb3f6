#pragma once

#include <cstdint>
#include <string>

namespace mesa {

/// FNV-1a 64 over a file's bytes, hex-encoded. Non-cryptographic: detects
/// accidental dataset drift between runs, nothing more.
std::string file_content_hash(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace mesa
