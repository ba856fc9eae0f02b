#include "mfl/grid_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

namespace mfl {

std::string format_double(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string const& text)
{
    if (text == "nan")
        return std::numeric_limits<double>::quiet_NaN();
    if (text == "inf")
        return std::numeric_limits<double>::infinity();
    if (text == "-inf")
        return -std::numeric_limits<double>::infinity();
    double v = 0.0;
    auto const* first = text.data();
    auto const* last = text.data() + text.size();
    if (first != last && *first == '+')
        ++first;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw std::invalid_argument("not a number: '" + text + "'");
    return v;
}

void write_grid_binary(std::ostream& out, GridField const& f)
{
    std::int32_t d = f.spec.dim;
    std::int32_t m = f.spec.points;
    double L = f.spec.length;
    out.write(reinterpret_cast<char const*>(&d), sizeof d);
    out.write(reinterpret_cast<char const*>(&m), sizeof m);
    out.write(reinterpret_cast<char const*>(&L), sizeof L);
    out.write(reinterpret_cast<char const*>(f.values.data()),
              static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!out)
        throw std::runtime_error("grid write failed");
}

GridField read_grid_binary(std::istream& in)
{
    std::int32_t d = 0;
    std::int32_t m = 0;
    double L = 0.0;
    in.read(reinterpret_cast<char*>(&d), sizeof d);
    in.read(reinterpret_cast<char*>(&m), sizeof m);
    in.read(reinterpret_cast<char*>(&L), sizeof L);
    if (!in)
        throw std::runtime_error("grid read: truncated header");
    GridField f(GridSpec::make(d, L, m));
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(double)));
    if (!in)
        throw std::runtime_error("grid read: truncated values");
    return f;
}

void write_grid_csv(std::ostream& out, GridField const& f)
{
    out << f.spec.dim << ',' << f.spec.points << ',' << format_double(f.spec.length)
        << '\n';
    for (double v : f.values)
        out << format_double(v) << '\n';
    if (!out)
        throw std::runtime_error("grid write failed");
}

GridField read_grid_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("grid csv: missing header");
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw std::runtime_error("grid csv: malformed header");
    int d = std::stoi(line.substr(0, c1));
    int m = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
    double L = parse_double(line.substr(c2 + 1));
    GridField f(GridSpec::make(d, L, m));
    for (auto& v : f.values) {
        if (!std::getline(in, line))
            throw std::runtime_error("grid csv: truncated values");
        v = parse_double(line);
    }
    return f;
}

void save_grid(std::filesystem::path const& path, GridField const& f)
{
    if (path.extension() == ".csv") {
        std::ofstream out(path);
        write_grid_csv(out, f);
    } else {
        std::ofstream out(path, std::ios::binary);
        write_grid_binary(out, f);
    }
}

GridField load_grid(std::filesystem::path const& path)
{
    if (path.extension() == ".csv") {
        std::ifstream in(path);
        return read_grid_csv(in);
    }
    std::ifstream in(path, std::ios::binary);
    return read_grid_binary(in);
}

}  // namespace mfl
