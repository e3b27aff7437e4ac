#include "wadapt/keyvalue.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "wadapt/errors.hpp"

namespace wadapt {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last || first == last) {
        throw ParseError("not a number: '" + text + "'");
    }
    return v;
}

KeyValues KeyValues::parse(std::istream& in, const std::string& source_name) {
    KeyValues kv;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(source_name + ":" + std::to_string(line_no) +
                             ": expected key=value, got '" + line + "'");
        }
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) {
            throw ParseError(source_name + ":" + std::to_string(line_no) + ": empty key");
        }
        kv.entries_[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingInputError("cannot open " + path.string());
    return parse(in, path.string());
}

std::string KeyValues::get_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing key '" + key + "'");
    return it->second;
}

double KeyValues::get_double(const std::string& key) const {
    const std::string s = get_string(key);
    try {
        return parse_double(s);
    } catch (const ParseError&) {
        throw ConfigError("key '" + key + "': expected a real number, got '" + s + "'");
    }
}

std::int64_t KeyValues::get_int(const std::string& key) const {
    const std::string s = get_string(key);
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("key '" + key + "': expected an integer, got '" + s + "'");
    }
    return v;
}

std::uint64_t KeyValues::get_uint(const std::string& key) const {
    const std::string s = get_string(key);
    std::uint64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty()) {
        throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool KeyValues::get_bool(const std::string& key) const {
    const std::string s = get_string(key);
    if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
    if (s == "0" || s == "false" || s == "no" || s == "off") return false;
    throw ConfigError("key '" + key + "': expected a boolean, got '" + s + "'");
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
    return has(key) ? get_string(key) : fallback;
}
double KeyValues::get_double(const std::string& key, double fallback) const {
    return has(key) ? get_double(key) : fallback;
}
std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
    return has(key) ? get_int(key) : fallback;
}
std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? get_uint(key) : fallback;
}
bool KeyValues::get_bool(const std::string& key, bool fallback) const {
    return has(key) ? get_bool(key) : fallback;
}

void KeyValues::write(std::ostream& out) const {
    for (const auto& [k, v] : entries_) out << k << " = " << v << '\n';
}

void KeyValues::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw MissingInputError("cannot write " + path.string());
    write(out);
}

}  // namespace wadapt
