#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sargen {

/// Single-channel 8-bit raster with an optional binary flood mask.
/// geo_id is opaque provenance (no geodetic meaning attached).
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> px;    // row-major, height*width
    std::vector<std::uint8_t> mask;  // empty, or same shape with values {0,1}
    std::string geo_id;

    bool has_mask() const { return !mask.empty(); }
    std::uint8_t at(int r, int c) const { return px[static_cast<std::size_t>(r) * width + c]; }
    std::uint8_t& at(int r, int c) { return px[static_cast<std::size_t>(r) * width + c]; }
};

/// Real-valued raster, the shape raw sensor data arrives in before 8-bit
/// compression.
struct RealRaster {
    int width = 0;
    int height = 0;
    std::vector<double> v;  // row-major
    std::string geo_id;
};

/// Percentile-clipping 8-bit compression: values at/below the lo_pct
/// percentile map to 0, at/above hi_pct to 255, linear in between.
/// A constant raster maps to all zeros (documented degenerate case).
Raster normalize_to_8bit(const RealRaster& raster, double lo_pct = 2.0, double hi_pct = 98.0);

/// Binary PGM (P5, maxval 255) IO for rasters.
Raster read_pgm(const std::string& path);
void write_pgm(const Raster& raster, const std::string& path);

}  // namespace sargen
