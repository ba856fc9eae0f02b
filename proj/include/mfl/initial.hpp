#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mfl/grid.hpp"

namespace mfl {

enum class BlobKind { gaussian, bump };

/// One component of an initial-density mixture.
struct Blob {
    BlobKind kind = BlobKind::gaussian;
    double weight = 1.0;
    double width = 1.0;
    Point center{0.0, 0.0};

    bool operator==(Blob const&) const = default;
};

/// Periodized mixture sampled on the grid and normalized to unit mass.
GridField make_density(std::vector<Blob> const& blobs, GridSpec const& grid);

/// "gaussian 1.0 0.35 2.89 | bump 0.5 1.0 3.1": kind weight width center...
std::vector<Blob> parse_blobs(std::string_view text, int dim);
std::string format_blobs(std::vector<Blob> const& blobs, int dim);

}  // namespace mfl
