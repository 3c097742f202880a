#pragma once

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "dynbin/errors.hpp"
#include "dynbin/keyvalue.hpp"
#include "dynbin/model.hpp"

namespace dynbin {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return fields;
}

/// Reads a headed CSV with the exact column list `header`; every parse
/// failure names the source, line and column.
class CsvReader {
public:
    CsvReader(std::istream& in, std::string source, std::vector<std::string> header)
        : in_(in), source_(std::move(source)), header_(std::move(header)) {
        std::string first;
        if (!std::getline(in_, first)) throw InputError(source_ + ": empty file");
        line_ = 1;
        const auto got = split_csv_line(trim(first));
        bool ok = got.size() == header_.size();
        for (std::size_t c = 0; ok && c < got.size(); ++c) ok = got[c] == header_[c];
        if (!ok) {
            std::string expected;
            for (const auto& h : header_) expected += (expected.empty() ? "" : ",") + h;
            throw LineError(source_, 1, "expected header '" + expected + "'");
        }
    }

    /// Advances to the next non-blank row; false at end of input.
    bool next() {
        while (std::getline(in_, raw_)) {
            ++line_;
            if (trim(raw_).empty()) continue;
            fields_ = split_csv_line(trim(raw_));
            if (fields_.size() != header_.size()) {
                throw LineError(source_, line_,
                                fmt::format("expected {} columns, found {}", header_.size(), fields_.size()));
            }
            return true;
        }
        return false;
    }

    template <class T>
    T get(std::size_t column) const {
        const auto text = fields_.at(column);
        T v{};
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
        if (ec != std::errc{} || ptr != text.data() + text.size()) {
            throw LineError(source_, line_, "column '" + header_[column] + "': cannot parse '" + std::string(text) + "'");
        }
        return v;
    }

    [[noreturn]] void fail(std::size_t column, const std::string& what) const {
        throw LineError(source_, line_, "column '" + header_[column] + "': " + what);
    }

    [[noreturn]] void fail(const std::string& what) const { throw LineError(source_, line_, what); }

    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::string source_;
    std::vector<std::string> header_;
    std::string raw_;
    std::vector<std::string_view> fields_;
    std::size_t line_ = 0;
};

inline void write_panel_csv(std::ostream& out, const PanelDataset& data) {
    out << "individual,time,y,x1,x2\n";
    for (std::size_t k = 0; k < data.individuals(); ++k) {
        for (const auto& o : data.rows(k)) {
            out << fmt::format("{},{},{},{},{}\n", data.id(k), o.time, static_cast<int>(o.y), o.x1, o.x2);
        }
    }
}

/// Individuals appear in order of first occurrence; their rows need not be
/// contiguous but their times must increase.
inline PanelDataset read_panel_csv(std::istream& in, const std::string& source = "<panel>") {
    CsvReader csv(in, source, {"individual", "time", "y", "x1", "x2"});
    std::vector<int> order;
    std::map<int, std::vector<Observation>> rows;
    while (csv.next()) {
        const int id = csv.get<int>(0);
        Observation o;
        o.time = csv.get<int>(1);
        if (o.time < 1) csv.fail(1, "time index must be >= 1");
        const int y = csv.get<int>(2);
        if (y != 0 && y != 1) csv.fail(2, "response must be 0 or 1");
        o.y = static_cast<std::uint8_t>(y);
        o.x1 = csv.get<double>(3);
        o.x2 = csv.get<double>(4);
        auto& bucket = rows[id];
        if (bucket.empty()) order.push_back(id);
        if (!bucket.empty() && bucket.back().time >= o.time) csv.fail(1, "time indices must increase within an individual");
        bucket.push_back(o);
    }
    PanelDataset data;
    for (int id : order) data.add_individual(id, std::move(rows[id]));
    return data;
}

inline PanelDataset load_panel_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    return read_panel_csv(in, path);
}

}  // namespace dynbin
