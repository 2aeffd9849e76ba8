#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "siot/error.hpp"

namespace siot::csv {

std::vector<std::string_view> split(std::string_view line, char sep = ',');

double parse_double(std::string_view field, std::size_t line_no, std::string_view name);
long long parse_int(std::string_view field, std::size_t line_no, std::string_view name);

/// Reads a header-first CSV; verifies the header and hands each data row to `on_row`.
template <typename OnRow>
void read(const std::filesystem::path& path, std::string_view expected_header, OnRow&& on_row) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedRow, path.string() + ": missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header) {
        throw Error(ErrorCode::MalformedRow, path.string() + " line 1: unexpected header '" + line + "'");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        on_row(split(line), line_no);
    }
}

std::ofstream open_for_write(const std::filesystem::path& path);

}  // namespace siot::csv
