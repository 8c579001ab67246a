#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace voltstab {

/// Shortest round-trip-stable rendering used in every CSV: 12 significant digits.
std::string format_real(double value);

/// Hex SHA-256 of `content`.
std::string content_hash(std::string_view content);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

}  // namespace voltstab
