#include "shotfactor/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <zlib.h>

namespace shotfactor::io {

namespace fs = std::filesystem;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view context) {
    text = trim(text);
    double v = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw Error(ErrorCode::kParse, "cannot parse number '" + std::string(text) + "' in " + std::string(context));
    }
    return v;
}

std::int64_t parse_int(std::string_view text, std::string_view context) {
    text = trim(text);
    std::int64_t v = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw Error(ErrorCode::kParse, "cannot parse integer '" + std::string(text) + "' in " + std::string(context));
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::string& path, std::string_view content) {
    const fs::path target(path);
    if (target.has_parent_path()) ensure_directory(target.parent_path().string());
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::kIo, "cannot open '" + tmp + "' for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::kIo, "write failed for '" + tmp + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

void ensure_directory(const std::string& path) {
    if (path.empty()) return;
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create directory '" + path + "': " + ec.message());
}

bool exists(const std::string& path) { return fs::exists(path); }

std::string grid_header(const CourtGrid& grid) {
    std::string h = "# grid " + format_double(grid.width()) + " " + format_double(grid.length()) + " " +
                    format_double(grid.tile_width());
    if (!grid.square_tiles()) h += " " + format_double(grid.tile_length());
    return h;
}

CourtGrid parse_grid_header(std::string_view line, std::string_view context) {
    auto parts = split(trim(line), ' ');
    std::erase_if(parts, [](std::string_view p) { return p.empty(); });
    if (parts.size() < 5 || parts.size() > 6 || parts[0] != "#" || parts[1] != "grid") {
        throw Error(ErrorCode::kParse, "bad grid header in " + std::string(context) + ": '" + std::string(line) + "'");
    }
    const double w = parse_double(parts[2], context);
    const double l = parse_double(parts[3], context);
    const double tw = parse_double(parts[4], context);
    const double tl = parts.size() == 6 ? parse_double(parts[5], context) : tw;
    return CourtGrid(w, l, tw, tl);
}

void write_labelled_matrix(const std::string& path, std::span<const std::string> ids, const Eigen::MatrixXd& values,
                           const CourtGrid* grid) {
    if (static_cast<Eigen::Index>(ids.size()) != values.rows()) {
        throw Error(ErrorCode::kInvalidArgument, "row label count does not match matrix rows for '" + path + "'");
    }
    std::string out;
    if (grid) out += grid_header(*grid) + "\n";
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        out += ids[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            out += ',';
            out += format_double(values(r, c));
        }
        out += '\n';
    }
    write_text(path, out);
}

LabelledMatrix read_labelled_matrix(const std::string& path) {
    LabelledMatrix m;
    std::vector<std::vector<double>> rows;
    for (const auto& line : read_lines(path)) {
        if (trim(line).empty()) continue;
        if (line.starts_with("#")) {
            m.grid = parse_grid_header(line, path);
            m.has_grid = true;
            continue;
        }
        auto cells = split(line, ',');
        m.ids.emplace_back(trim(cells[0]));
        std::vector<double> row;
        row.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) row.push_back(parse_double(cells[c], path));
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw Error(ErrorCode::kParse, "ragged rows in '" + path + "'");
        }
        rows.push_back(std::move(row));
    }
    const auto cols = rows.empty() ? 0 : rows.front().size();
    m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols; ++c)
            m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    if (m.has_grid && cols != 0 && static_cast<int>(cols) != m.grid.size()) {
        throw Error(ErrorCode::kParse, "'" + path + "' has " + std::to_string(cols) + " columns but grid has " +
                                           std::to_string(m.grid.size()) + " tiles");
    }
    return m;
}

std::string file_checksum(const std::string& path) {
    const std::string bytes = read_text(path);
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

}  // namespace shotfactor::io
