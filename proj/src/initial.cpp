#include "mfl/initial.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mfl/grid_io.hpp"

namespace mfl {

namespace {

double profile(BlobKind kind, double r2, double width)
{
    double q = r2 / (width * width);
    if (kind == BlobKind::gaussian)
        return std::exp(-0.5 * q);
    if (q >= 1.0)
        return 0.0;
    double t = 1.0 - q;
    return t * t * t;
}

}  // namespace

GridField make_density(std::vector<Blob> const& blobs, GridSpec const& grid)
{
    if (blobs.empty())
        throw std::invalid_argument("initial density: no components");
    GridField f(grid);
    double L = grid.length;
    // enough periodic images for the widest component
    int images = 1;
    for (auto const& b : blobs) {
        if (!(b.width > 0.0) || !(b.weight >= 0.0))
            throw std::invalid_argument(
                "initial density: width must be > 0 and weight >= 0");
        double reach = b.kind == BlobKind::gaussian ? 12.0 * b.width : b.width;
        images = std::max(images, static_cast<int>(std::ceil(reach / L)) + 1);
    }
    int lo1 = grid.dim == 2 ? -images : 0;
    int hi1 = grid.dim == 2 ? images : 0;
    for (std::size_t flat = 0; flat < f.values.size(); ++flat) {
        Point x = grid.node_point(flat);
        double v = 0.0;
        for (auto const& b : blobs) {
            for (int a = -images; a <= images; ++a) {
                for (int c = lo1; c <= hi1; ++c) {
                    double dx = x[0] - b.center[0] + a * L;
                    double dy = grid.dim == 2 ? x[1] - b.center[1] + c * L : 0.0;
                    v += b.weight * profile(b.kind, dx * dx + dy * dy, b.width);
                }
            }
        }
        f.values[flat] = v;
    }
    double mass = f.mass();
    if (!(mass > 0.0))
        throw std::invalid_argument("initial density: zero mass on grid");
    for (auto& v : f.values)
        v /= mass;
    return f;
}

std::vector<Blob> parse_blobs(std::string_view text, int dim)
{
    std::vector<Blob> out;
    std::string s(text);
    std::size_t start = 0;
    while (start <= s.size()) {
        auto bar = s.find('|', start);
        std::string part = s.substr(start, bar == std::string::npos ? std::string::npos
                                                                    : bar - start);
        std::istringstream in(part);
        std::string kind;
        std::vector<std::string> nums;
        in >> kind;
        for (std::string tok; in >> tok;)
            nums.push_back(tok);
        if (kind.empty())
            throw std::invalid_argument("empty mixture component");
        Blob b;
        if (kind == "gaussian")
            b.kind = BlobKind::gaussian;
        else if (kind == "bump")
            b.kind = BlobKind::bump;
        else
            throw std::invalid_argument("unknown component kind '" + kind + "'");
        if (nums.size() != static_cast<std::size_t>(2 + dim))
            throw std::invalid_argument("component '" + kind + "' needs weight, width and "
                                        + std::to_string(dim) + " center coordinate(s)");
        b.weight = parse_double(nums[0]);
        b.width = parse_double(nums[1]);
        if (!(b.width > 0.0) || !(b.weight >= 0.0))
            throw std::invalid_argument("component '" + kind
                                        + "': width must be > 0 and weight >= 0");
        b.center[0] = parse_double(nums[2]);
        if (dim == 2)
            b.center[1] = parse_double(nums[3]);
        out.push_back(b);
        if (bar == std::string::npos)
            break;
        start = bar + 1;
    }
    return out;
}

std::string format_blobs(std::vector<Blob> const& blobs, int dim)
{
    std::string out;
    for (std::size_t i = 0; i < blobs.size(); ++i) {
        auto const& b = blobs[i];
        if (i)
            out += " | ";
        out += b.kind == BlobKind::gaussian ? "gaussian" : "bump";
        out += ' ' + format_double(b.weight) + ' ' + format_double(b.width) + ' '
               + format_double(b.center[0]);
        if (dim == 2)
            out += ' ' + format_double(b.center[1]);
    }
    return out;
}

}  // namespace mfl
