#include "sargen/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "sargen/errors.hpp"

namespace sargen {

namespace {

// Linear-interpolation percentile over a sorted copy.
double percentile(std::vector<double> sorted, double pct) {
    const double pos = pct / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

}  // namespace

Raster normalize_to_8bit(const RealRaster& raster, double lo_pct, double hi_pct) {
    if (raster.v.empty()) throw InputError("normalize_to_8bit: empty raster");
    if (!(hi_pct > lo_pct)) throw InputError("normalize_to_8bit: hi_pct must exceed lo_pct");

    std::vector<double> sorted(raster.v);
    std::sort(sorted.begin(), sorted.end());
    const double lo = percentile(sorted, lo_pct);
    const double hi = percentile(sorted, hi_pct);

    Raster out;
    out.width = raster.width;
    out.height = raster.height;
    out.geo_id = raster.geo_id;
    out.px.resize(raster.v.size());
    if (hi <= lo) {
        // constant (or near-constant) input: everything clips to zero
        std::fill(out.px.begin(), out.px.end(), std::uint8_t{0});
        return out;
    }
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < raster.v.size(); ++i) {
        const double t = (raster.v[i] - lo) * scale;
        const double clipped = std::min(255.0, std::max(0.0, t));
        out.px[i] = static_cast<std::uint8_t>(std::floor(clipped + 0.5));
    }
    return out;
}

Raster read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw IoError("read_pgm: " + path + " is not binary PGM (P5)");
    auto next_token = [&in, &path]() {
        // PGM allows '#' comment lines between header tokens
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw IoError("read_pgm: truncated header in " + path);
    };
    Raster r;
    r.width = std::stoi(next_token());
    r.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (maxval != 255) throw IoError("read_pgm: " + path + " maxval must be 255");
    if (r.width <= 0 || r.height <= 0) throw IoError("read_pgm: bad dimensions in " + path);
    in.get();  // single whitespace after maxval
    r.px.resize(static_cast<std::size_t>(r.width) * r.height);
    in.read(reinterpret_cast<char*>(r.px.data()), static_cast<std::streamsize>(r.px.size()));
    if (!in) throw IoError("read_pgm: truncated pixel data in " + path);
    r.geo_id = path;
    return r;
}

void write_pgm(const Raster& raster, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path);
    out << "P5\n" << raster.width << " " << raster.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.px.data()),
              static_cast<std::streamsize>(raster.px.size()));
    if (!out) throw IoError("write_pgm: write failed for " + path);
}

}  // namespace sargen
