#include "lawsim/json_util.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "lawsim/errors.hpp"

namespace lawsim {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open file: " + path.string());
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    return nlohmann::json::parse(read_text_file(path));
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw ConfigError("cannot write file: " + path.string());
    }
    out << content;
}

nlohmann::json extract_json_object(const std::string& text) {
    // Scan for the first balanced {...} span and parse it. Braces inside
    // string literals are skipped.
    const std::size_t start = text.find('{');
    if (start == std::string::npos) {
        throw nlohmann::json::parse_error::create(101, 0, "no JSON object in text", nullptr);
    }
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
            if (depth == 0) {
                return nlohmann::json::parse(text.substr(start, i - start + 1));
            }
        }
    }
    throw nlohmann::json::parse_error::create(101, 0, "unbalanced JSON object in text", nullptr);
}

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
    return fnv1a(read_text_file(path));
}

} // namespace lawsim
