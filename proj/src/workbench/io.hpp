#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace topicbench::workbench::detail {

/// Writes through a sibling temp file and renames, so readers never see a
/// partial file.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& value);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// `path` relative to `root` in generic (forward slash) form.
std::string relative_to(const std::filesystem::path& path, const std::filesystem::path& root);

}  // namespace topicbench::workbench::detail
