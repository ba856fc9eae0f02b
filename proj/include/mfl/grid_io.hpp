#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "mfl/grid.hpp"

namespace mfl {

/// Flat binary layout: int32 d, int32 m, float64 L, then m^d float64 values
/// in row-major order (native little-endian).
void write_grid_binary(std::ostream& out, GridField const& f);
GridField read_grid_binary(std::istream& in);

/// CSV layout: first line "d,m,L", then one value per line. Every number is
/// written in shortest round-trip form, so reading back is bit-exact.
void write_grid_csv(std::ostream& out, GridField const& f);
GridField read_grid_csv(std::istream& in);

void save_grid(std::filesystem::path const& path, GridField const& f);
GridField load_grid(std::filesystem::path const& path);

/// Shortest decimal that parses back to the same double; "nan"/"inf" for
/// non-finite values.
std::string format_double(double v);
double parse_double(std::string const& text);

}  // namespace mfl
