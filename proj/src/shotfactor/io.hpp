#pragma once

// Text persistence helpers shared by every stage.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/court.hpp"

namespace shotfactor::io {

// Shortest round-trip decimal representation.
std::string format_double(double v);
double parse_double(std::string_view text, std::string_view context);
std::int64_t parse_int(std::string_view text, std::string_view context);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::vector<std::string> read_lines(const std::string& path);
// Writes to a sibling temp file and renames over the target.
void write_text(const std::string& path, std::string_view content);
std::string read_text(const std::string& path);
void ensure_directory(const std::string& path);
bool exists(const std::string& path);

std::string grid_header(const CourtGrid& grid);
CourtGrid parse_grid_header(std::string_view line, std::string_view context);

// Labelled real matrix: optional grid header, then `id,v_0,...`.
struct LabelledMatrix {
    std::vector<std::string> ids;
    Eigen::MatrixXd values;
    bool has_grid = false;
    CourtGrid grid;
};

void write_labelled_matrix(const std::string& path, std::span<const std::string> ids,
                           const Eigen::MatrixXd& values, const CourtGrid* grid = nullptr);
LabelledMatrix read_labelled_matrix(const std::string& path);

// CRC-32 of the file bytes, rendered as 8 hex digits.
std::string file_checksum(const std::string& path);

}  // namespace shotfactor::io
