#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json_fwd.hpp>

namespace lawsim {

nlohmann::json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

// Extracts the first JSON object from free-form model output: tolerates
// ```json fences and surrounding prose. Throws nlohmann::json::parse_error
// when no parseable object is present.
nlohmann::json extract_json_object(const std::string& text);

// FNV-1a over the file bytes; used for manifest data-file fingerprints.
std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::uint64_t fnv1a(const std::string& bytes);

} // namespace lawsim
