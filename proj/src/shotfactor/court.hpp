#pragma once

// Half-court discretization, shot records and count matrices.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "shotfactor/common.hpp"

namespace shotfactor {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

// One field goal attempt. x runs across the court width, y away from the baseline.
struct ShotEvent {
    std::string player;
    double x = 0.0;
    double y = 0.0;
    bool made = false;
};

// Rectangular tiling of the half court. Tiles are half-open [a, a + size) on
// each axis; points on the far edges fold into the last tile. Tile ids are
// row-major with x varying fastest.
class CourtGrid {
public:
    CourtGrid() : CourtGrid(35.0, 50.0, 1.0) {}
    CourtGrid(double width, double length, double tile_size)
        : CourtGrid(width, length, tile_size, tile_size) {}
    // Anisotropic tiles; tile_width along x, tile_length along y.
    CourtGrid(double width, double length, double tile_width, double tile_length);

    double width() const { return width_; }
    double length() const { return length_; }
    double tile_width() const { return tile_width_; }
    double tile_length() const { return tile_length_; }
    bool square_tiles() const { return tile_width_ == tile_length_; }

    int cols() const { return cols_; }
    int rows() const { return rows_; }
    int size() const { return cols_ * rows_; }
    double tile_area() const { return tile_width_ * tile_length_; }

    bool contains(double x, double y) const;
    // Throws Error(kInvalidArgument) naming the coordinates when off court.
    int tile_index(double x, double y) const;
    int tile_index(Point p) const { return tile_index(p.x, p.y); }
    int col_of(int tile) const { return tile % cols_; }
    int row_of(int tile) const { return tile / cols_; }
    Point center(int tile) const;

    // Lower-left corner and extent of a tile, clipped to the court.
    Point tile_origin(int tile) const;
    Point tile_extent(int tile) const;

    friend bool operator==(const CourtGrid& a, const CourtGrid& b) {
        return a.width_ == b.width_ && a.length_ == b.length_ && a.tile_width_ == b.tile_width_ &&
               a.tile_length_ == b.tile_length_;
    }

private:
    double width_;
    double length_;
    double tile_width_;
    double tile_length_;
    int cols_;
    int rows_;
};

using CountArray = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// N x V tile counts, rows aligned with `players`.
struct CountMatrix {
    std::vector<std::string> players;
    CourtGrid grid;
    CountArray counts;

    int num_players() const { return static_cast<int>(counts.rows()); }
    std::int64_t row_total(int n) const { return counts.row(n).sum(); }
    Eigen::MatrixXd as_real() const { return counts.cast<double>(); }
};

inline constexpr int kDefaultMinAttempts = 50;

// Player ids in order of first appearance.
std::vector<std::string> players_in_order(std::span<const ShotEvent> shots);

// Players with fewer than min_attempts shots are dropped before assembly.
CountMatrix build_count_matrix(std::span<const ShotEvent> shots, const CourtGrid& grid,
                               int min_attempts = kDefaultMinAttempts);

// Assembles rows for exactly `players` (in that order); shots from other
// players are ignored, listed players without shots get zero rows.
CountMatrix build_count_matrix_for(std::span<const ShotEvent> shots, const CourtGrid& grid,
                                   std::span<const std::string> players);

struct HoldoutSplit {
    std::vector<ShotEvent> train;
    std::vector<ShotEvent> test;
};

// Number of shots held out from a player with m attempts.
int holdout_count(int m, double fraction);

// Per-player uniform split without replacement. Each player draws from its own
// stream derived from (seed, player order), so the result does not depend on
// how other players are laid out in the input. Within-player order is kept.
HoldoutSplit split_holdout(std::span<const ShotEvent> shots, double fraction, std::uint64_t seed);

// Shot CSV: header `player,x,y,made`.
std::vector<ShotEvent> read_shots_csv(const std::string& path, const CourtGrid& grid);
void write_shots_csv(const std::string& path, std::span<const ShotEvent> shots);

// `# grid width length tile_size [tile_length]` then `player,c_0,...,c_{V-1}`.
void write_count_matrix_csv(const std::string& path, const CountMatrix& m);
CountMatrix read_count_matrix_csv(const std::string& path);

}  // namespace shotfactor
