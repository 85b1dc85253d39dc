#include "shotfactor/court.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "shotfactor/io.hpp"

namespace shotfactor {

namespace {

int tiles_along(double extent, double tile) {
    // Tolerates round-off in extent/tile (e.g. 35/0.1).
    return std::max(1, static_cast<int>(std::ceil(extent / tile - 1e-9)));
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

CourtGrid::CourtGrid(double width, double length, double tile_width, double tile_length)
    : width_(width), length_(length), tile_width_(tile_width), tile_length_(tile_length) {
    if (!(width > 0.0) || !(length > 0.0) || !std::isfinite(width) || !std::isfinite(length)) {
        throw Error(ErrorCode::kInvalidArgument, "court dimensions must be positive and finite");
    }
    if (!(tile_width > 0.0) || !(tile_length > 0.0) || !std::isfinite(tile_width) || !std::isfinite(tile_length)) {
        throw Error(ErrorCode::kInvalidArgument, "tile size must be positive and finite");
    }
    cols_ = tiles_along(width, tile_width);
    rows_ = tiles_along(length, tile_length);
}

bool CourtGrid::contains(double x, double y) const {
    return x >= 0.0 && x <= width_ && y >= 0.0 && y <= length_;
}

int CourtGrid::tile_index(double x, double y) const {
    if (!contains(x, y)) {
        throw Error(ErrorCode::kInvalidArgument, "shot location (" + io::format_double(x) + ", " +
                                                     io::format_double(y) + ") lies outside the " +
                                                     io::format_double(width_) + " x " + io::format_double(length_) +
                                                     " court");
    }
    const int col = std::min(static_cast<int>(std::floor(x / tile_width_)), cols_ - 1);
    const int row = std::min(static_cast<int>(std::floor(y / tile_length_)), rows_ - 1);
    return row * cols_ + col;
}

Point CourtGrid::tile_origin(int tile) const {
    return {col_of(tile) * tile_width_, row_of(tile) * tile_length_};
}

Point CourtGrid::tile_extent(int tile) const {
    const Point o = tile_origin(tile);
    return {std::min(tile_width_, width_ - o.x), std::min(tile_length_, length_ - o.y)};
}

Point CourtGrid::center(int tile) const {
    const Point o = tile_origin(tile);
    const Point e = tile_extent(tile);
    return {o.x + 0.5 * e.x, o.y + 0.5 * e.y};
}

std::vector<std::string> players_in_order(std::span<const ShotEvent> shots) {
    std::vector<std::string> order;
    std::unordered_map<std::string, int> seen;
    for (const auto& s : shots) {
        if (seen.emplace(s.player, static_cast<int>(order.size())).second) order.push_back(s.player);
    }
    return order;
}

CountMatrix build_count_matrix_for(std::span<const ShotEvent> shots, const CourtGrid& grid,
                                   std::span<const std::string> players) {
    std::unordered_map<std::string, int> row_of;
    for (std::size_t i = 0; i < players.size(); ++i) row_of.emplace(players[i], static_cast<int>(i));
    CountMatrix m{{players.begin(), players.end()}, grid, CountArray::Zero(static_cast<Eigen::Index>(players.size()), grid.size())};
    for (const auto& s : shots) {
        auto it = row_of.find(s.player);
        if (it == row_of.end()) continue;
        m.counts(it->second, grid.tile_index(s.x, s.y)) += 1;
    }
    return m;
}

CountMatrix build_count_matrix(std::span<const ShotEvent> shots, const CourtGrid& grid, int min_attempts) {
    if (shots.empty()) throw Error(ErrorCode::kInvalidArgument, "no shots to build a count matrix from");
    std::unordered_map<std::string, int> attempts;
    for (const auto& s : shots) ++attempts[s.player];
    std::vector<std::string> kept;
    for (auto& p : players_in_order(shots)) {
        if (attempts[p] >= min_attempts) kept.push_back(std::move(p));
    }
    if (kept.empty()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "every player has fewer than " + std::to_string(min_attempts) + " attempts");
    }
    return build_count_matrix_for(shots, grid, kept);
}

int holdout_count(int m, double fraction) {
    if (m < 2) return 0;
    const auto h = static_cast<int>(std::llround(fraction * m));
    return std::clamp(h, 1, m - 1);
}

HoldoutSplit split_holdout(std::span<const ShotEvent> shots, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw Error(ErrorCode::kInvalidArgument, "holdout fraction must lie strictly between 0 and 1");
    }
    std::unordered_map<std::string, std::vector<std::size_t>> by_player;
    for (std::size_t i = 0; i < shots.size(); ++i) by_player[shots[i].player].push_back(i);

    std::vector<char> is_test(shots.size(), 0);
    for (const auto& player : players_in_order(shots)) {
        auto idx = by_player[player];
        const int h = holdout_count(static_cast<int>(idx.size()), fraction);
        if (h == 0) continue;
        Rng rng(derive_seed(seed, stream::kSplit, fnv1a(player)));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (int j = 0; j < h; ++j) is_test[idx[static_cast<std::size_t>(j)]] = 1;
    }
    HoldoutSplit split;
    for (std::size_t i = 0; i < shots.size(); ++i) (is_test[i] ? split.test : split.train).push_back(shots[i]);
    return split;
}

std::vector<ShotEvent> read_shots_csv(const std::string& path, const CourtGrid& grid) {
    const auto lines = io::read_lines(path);
    if (lines.empty() || io::trim(lines.front()) != "player,x,y,made") {
        throw Error(ErrorCode::kParse, "'" + path + "' must start with the header 'player,x,y,made'");
    }
    std::vector<ShotEvent> shots;
    shots.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) continue;
        const std::string where = path + ":" + std::to_string(i + 1);
        const auto cells = io::split(lines[i], ',');
        if (cells.size() != 4) throw Error(ErrorCode::kParse, where + ": expected 4 fields");
        ShotEvent s;
        s.player = std::string(io::trim(cells[0]));
        if (s.player.empty()) throw Error(ErrorCode::kParse, where + ": empty player id");
        s.x = io::parse_double(cells[1], where);
        s.y = io::parse_double(cells[2], where);
        const auto made = io::trim(cells[3]);
        if (made != "0" && made != "1") throw Error(ErrorCode::kParse, where + ": made must be 0 or 1");
        s.made = made == "1";
        if (!grid.contains(s.x, s.y)) {
            throw Error(ErrorCode::kInvalidArgument, where + ": shot location (" + io::format_double(s.x) + ", " +
                                                         io::format_double(s.y) + ") lies outside the court");
        }
        shots.push_back(std::move(s));
    }
    return shots;
}

void write_shots_csv(const std::string& path, std::span<const ShotEvent> shots) {
    std::string out = "player,x,y,made\n";
    for (const auto& s : shots) {
        out += s.player + "," + io::format_double(s.x) + "," + io::format_double(s.y) + "," + (s.made ? "1" : "0") + "\n";
    }
    io::write_text(path, out);
}

void write_count_matrix_csv(const std::string& path, const CountMatrix& m) {
    std::string out = io::grid_header(m.grid) + "\n";
    for (int n = 0; n < m.num_players(); ++n) {
        out += m.players[static_cast<std::size_t>(n)];
        for (Eigen::Index v = 0; v < m.counts.cols(); ++v) {
            out += ',';
            out += std::to_string(m.counts(n, v));
        }
        out += '\n';
    }
    io::write_text(path, out);
}

CountMatrix read_count_matrix_csv(const std::string& path) {
    const auto lines = io::read_lines(path);
    if (lines.empty()) throw Error(ErrorCode::kParse, "'" + path + "' is empty");
    CountMatrix m;
    m.grid = io::parse_grid_header(lines.front(), path);
    std::vector<std::vector<std::int64_t>> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (io::trim(lines[i]).empty()) continue;
        const auto cells = io::split(lines[i], ',');
        if (static_cast<int>(cells.size()) != m.grid.size() + 1) {
            throw Error(ErrorCode::kParse, path + ":" + std::to_string(i + 1) + ": expected " +
                                               std::to_string(m.grid.size()) + " counts");
        }
        m.players.emplace_back(io::trim(cells[0]));
        std::vector<std::int64_t> row;
        row.reserve(cells.size() - 1);
        for (std::size_t c = 1; c < cells.size(); ++c) {
            const auto v = io::parse_int(cells[c], path);
            if (v < 0) throw Error(ErrorCode::kParse, path + ": negative count");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    m.counts.resize(static_cast<Eigen::Index>(rows.size()), m.grid.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int c = 0; c < m.grid.size(); ++c) m.counts(static_cast<Eigen::Index>(r), c) = rows[r][static_cast<std::size_t>(c)];
    return m;
}

}  // namespace shotfactor
