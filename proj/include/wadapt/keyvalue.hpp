#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

namespace wadapt {

/// Line-oriented `key = value` text with `#` comments. Used for config files,
/// dataset manifests and run manifests.
class KeyValues {
   public:
    static KeyValues parse(std::istream& in, const std::string& source_name);
    static KeyValues load(const std::filesystem::path& path);

    void set(const std::string& key, std::string value) { entries_[key] = std::move(value); }
    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const { return entries_; }

    // Typed getters throw ConfigError naming the key on a missing or malformed value.
    std::string get_string(const std::string& key) const;
    double get_double(const std::string& key) const;
    std::int64_t get_int(const std::string& key) const;
    std::uint64_t get_uint(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void write(std::ostream& out) const;
    void save(const std::filesystem::path& path) const;

   private:
    std::map<std::string, std::string> entries_;
};

// Shortest decimal text that reads back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& text);

}  // namespace wadapt
