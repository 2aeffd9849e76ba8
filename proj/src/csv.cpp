#include "csv.hpp"

#include <charconv>

#include <fmt/format.h>

namespace siot::csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

double parse_double(std::string_view field, std::size_t line_no, std::string_view name) {
    // std::from_chars for double is available in libstdc++ 11
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw Error(ErrorCode::MalformedRow,
                    fmt::format("line {}: field '{}' is not a number: '{}'", line_no, name, field));
    }
    return v;
}

long long parse_int(std::string_view field, std::size_t line_no, std::string_view name) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
        throw Error(ErrorCode::MalformedRow,
                    fmt::format("line {}: field '{}' is not an integer: '{}'", line_no, name, field));
    }
    return v;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
    return out;
}

}  // namespace siot::csv
