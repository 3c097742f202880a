#pragma once

// Plain-text `key = value` files shared by prior sets and study configs.
//
//   # comment
//   key = value      (whitespace around '=' and at line ends is ignored)
//
// Keys are unique; blank lines and lines starting with '#' are skipped.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include <fmt/format.h>

#include "dynbin/errors.hpp"

namespace dynbin {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

struct KeyValueEntry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
};

class KeyValueFile {
public:
    static KeyValueFile parse(std::istream& in, std::string source) {
        KeyValueFile f;
        f.source_ = std::move(source);
        std::string raw;
        std::size_t line = 0;
        while (std::getline(in, raw)) {
            ++line;
            const auto text = trim(raw);
            if (text.empty() || text.front() == '#') continue;
            const auto eq = text.find('=');
            if (eq == std::string_view::npos) {
                throw LineError(f.source_, line, "expected 'key = value'");
            }
            const auto key = std::string(trim(text.substr(0, eq)));
            const auto value = std::string(trim(text.substr(eq + 1)));
            if (key.empty()) throw LineError(f.source_, line, "empty key");
            if (value.empty()) throw LineError(f.source_, line, "empty value for '" + key + "'");
            if (f.entries_.count(key)) throw LineError(f.source_, line, "duplicate key '" + key + "'");
            f.entries_[key] = KeyValueEntry{value, line, false};
        }
        return f;
    }

    static KeyValueFile load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw InputError("cannot open " + path);
        return parse(in, path);
    }

    bool contains(const std::string& key) const { return entries_.count(key) != 0; }

    const std::string& source() const noexcept { return source_; }

    std::size_t line_of(const std::string& key) const {
        auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    [[noreturn]] void fail(const std::string& key, const std::string& what) const {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw InputError(source_ + ": " + key + ": " + what);
        throw LineError(source_, it->second.line, key + ": " + what);
    }

    std::string get_string(const std::string& key) {
        return entry(key).value;
    }

    double get_double(const std::string& key) {
        auto& e = entry(key);
        double v = 0.0;
        const auto* first = e.value.data();
        const auto* last = first + e.value.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) fail(key, "'" + e.value + "' is not a number");
        return v;
    }

    std::int64_t get_int(const std::string& key) {
        auto& e = entry(key);
        std::int64_t v = 0;
        const auto* first = e.value.data();
        const auto* last = first + e.value.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) fail(key, "'" + e.value + "' is not an integer");
        return v;
    }

    std::uint64_t get_uint(const std::string& key) {
        auto& e = entry(key);
        std::uint64_t v = 0;
        const auto* first = e.value.data();
        const auto* last = first + e.value.size();
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || ptr != last) fail(key, "'" + e.value + "' is not a non-negative integer");
        return v;
    }

    /// Rejects keys that no getter consumed.
    void require_all_used() const {
        for (const auto& [key, e] : entries_) {
            if (!e.used) throw LineError(source_, e.line, "unknown key '" + key + "'");
        }
    }

private:
    KeyValueEntry& entry(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) throw InputError(source_ + ": missing key '" + key + "'");
        it->second.used = true;
        return it->second;
    }

    std::string source_;
    std::map<std::string, KeyValueEntry> entries_;
};

/// Shortest text that parses back to the same double.
inline std::string format_exact(double v) { return fmt::format("{}", v); }

}  // namespace dynbin
