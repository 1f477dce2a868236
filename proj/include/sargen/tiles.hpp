#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sargen/raster.hpp"

namespace sargen {

enum class Split { train, val, test };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct TileOrigin {
    std::string geo_id;
    int row = 0;  // pixel offset into the source raster
    int col = 0;
};

/// Square single-channel 8-bit patch with optional flood mask.
struct Tile {
    int size = 0;
    std::vector<std::uint8_t> px;    // size*size, row-major
    std::vector<std::uint8_t> mask;  // empty or size*size with values {0,1}
    TileOrigin origin;
    Split split = Split::train;

    bool has_mask() const { return !mask.empty(); }
    bool has_flood() const;
    std::uint8_t at(int r, int c) const { return px[static_cast<std::size_t>(r) * size + c]; }
    std::uint64_t checksum() const;
};

struct ManifestEntry {
    std::string id;
    TileOrigin origin;
    Split split = Split::train;
    bool has_flood = false;
    std::uint64_t checksum = 0;
};

/// Index over a tile dataset; entries align 1:1 with the tile list.
struct TileManifest {
    int tile_size = 0;
    std::vector<ManifestEntry> entries;

    std::array<std::size_t, 3> split_counts() const;  // train, val, test
    static TileManifest from_tiles(const std::vector<Tile>& tiles, int tile_size);
};

struct Dataset {
    std::vector<Tile> tiles;
    TileManifest manifest;
};

/// Regular-grid tiling; windows that do not fit whole are dropped.
/// Count is floor((H-S)/stride+1) * floor((W-S)/stride+1).
Dataset tile_raster(const Raster& raster, int tile_size, int stride,
                    Split split = Split::train);

/// Keeps exactly the tiles whose mask has at least one nonzero pixel.
/// Every input tile must carry a mask.
std::vector<Tile> filter_flood_tiles(const std::vector<Tile>& tiles);

struct Quadrants {
    Tile tl, tr, bl, br;
};

/// Splits into four half-size quadrants; masks split identically.
Quadrants quadrant_split(const Tile& tile);

/// Inverse of quadrant_split: places four equal tiles canonically into a
/// double-size tile.
Tile assemble_quadrants(const Tile& tl, const Tile& tr, const Tile& bl, const Tile& br);

/// Block-mean (area) downscale; target must divide the size and be a power
/// of two. Each output pixel is the rounded mean of its block.
Tile downscale(const Tile& tile, int target);

/// Quarter-turn rotations; k counts counter-clockwise turns (k in 0..3).
Tile rotate_tile(const Tile& tile, int k);

bool is_power_of_two(int v);

}  // namespace sargen
