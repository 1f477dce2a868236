#include "sargen/tiles.hpp"

#include <cmath>
#include <cstdio>

#include "sargen/errors.hpp"
#include "sargen/rng.hpp"

namespace sargen {

bool is_power_of_two(int v) { return v > 0 && (v & (v - 1)) == 0; }

const char* to_string(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::val: return "val";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "val") return Split::val;
    if (s == "test") return Split::test;
    throw InputError("unknown split: " + s);
}

bool Tile::has_flood() const {
    for (const auto m : mask)
        if (m) return true;
    return false;
}

std::uint64_t Tile::checksum() const {
    std::uint64_t h = fnv1a64(px.data(), px.size());
    if (!mask.empty()) h = fnv1a64(mask.data(), mask.size(), h);
    return h;
}

std::array<std::size_t, 3> TileManifest::split_counts() const {
    std::array<std::size_t, 3> c{0, 0, 0};
    for (const auto& e : entries) c[static_cast<int>(e.split)]++;
    return c;
}

TileManifest TileManifest::from_tiles(const std::vector<Tile>& tiles, int tile_size) {
    TileManifest m;
    m.tile_size = tile_size;
    m.entries.reserve(tiles.size());
    char buf[16];
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "t%06zu", i);
        m.entries.push_back({buf, tiles[i].origin, tiles[i].split, tiles[i].has_flood(),
                             tiles[i].checksum()});
    }
    return m;
}

Dataset tile_raster(const Raster& raster, int tile_size, int stride, Split split) {
    if (!is_power_of_two(tile_size)) throw InputError("tile_raster: tile_size must be a power of two");
    if (stride < 1) throw InputError("tile_raster: stride must be >= 1");
    if (raster.width < tile_size || raster.height < tile_size)
        throw InputError("tile_raster: raster smaller than tile_size");

    Dataset out;
    const int rows = (raster.height - tile_size) / stride + 1;
    const int cols = (raster.width - tile_size) / stride + 1;
    out.tiles.reserve(static_cast<std::size_t>(rows) * cols);
    for (int tr = 0; tr < rows; ++tr) {
        for (int tc = 0; tc < cols; ++tc) {
            const int r0 = tr * stride;
            const int c0 = tc * stride;
            Tile t;
            t.size = tile_size;
            t.origin = {raster.geo_id, r0, c0};
            t.split = split;
            t.px.resize(static_cast<std::size_t>(tile_size) * tile_size);
            if (raster.has_mask()) t.mask.resize(t.px.size());
            for (int r = 0; r < tile_size; ++r) {
                const std::size_t src = static_cast<std::size_t>(r0 + r) * raster.width + c0;
                const std::size_t dst = static_cast<std::size_t>(r) * tile_size;
                std::copy_n(raster.px.begin() + src, tile_size, t.px.begin() + dst);
                if (raster.has_mask())
                    std::copy_n(raster.mask.begin() + src, tile_size, t.mask.begin() + dst);
            }
            out.tiles.push_back(std::move(t));
        }
    }
    out.manifest = TileManifest::from_tiles(out.tiles, tile_size);
    return out;
}

std::vector<Tile> filter_flood_tiles(const std::vector<Tile>& tiles) {
    std::vector<Tile> kept;
    for (const auto& t : tiles) {
        if (!t.has_mask()) throw InputError("filter_flood_tiles: tile without mask");
        if (t.has_flood()) kept.push_back(t);
    }
    return kept;
}

namespace {

Tile crop(const Tile& t, int r0, int c0, int s) {
    Tile out;
    out.size = s;
    out.origin = {t.origin.geo_id, t.origin.row + r0, t.origin.col + c0};
    out.split = t.split;
    out.px.resize(static_cast<std::size_t>(s) * s);
    if (t.has_mask()) out.mask.resize(out.px.size());
    for (int r = 0; r < s; ++r) {
        const std::size_t src = static_cast<std::size_t>(r0 + r) * t.size + c0;
        std::copy_n(t.px.begin() + src, s, out.px.begin() + static_cast<std::size_t>(r) * s);
        if (t.has_mask())
            std::copy_n(t.mask.begin() + src, s, out.mask.begin() + static_cast<std::size_t>(r) * s);
    }
    return out;
}

}  // namespace

Quadrants quadrant_split(const Tile& tile) {
    if (tile.size % 2 != 0) throw InputError("quadrant_split: tile size must be even");
    const int h = tile.size / 2;
    return {crop(tile, 0, 0, h), crop(tile, 0, h, h), crop(tile, h, 0, h), crop(tile, h, h, h)};
}

Tile assemble_quadrants(const Tile& tl, const Tile& tr, const Tile& bl, const Tile& br) {
    const int s = tl.size;
    if (tr.size != s || bl.size != s || br.size != s)
        throw InputError("assemble_quadrants: quadrant sizes differ");
    Tile out;
    out.size = 2 * s;
    out.origin = tl.origin;
    out.split = tl.split;
    out.px.resize(static_cast<std::size_t>(out.size) * out.size);
    const bool masks = tl.has_mask() && tr.has_mask() && bl.has_mask() && br.has_mask();
    if (masks) out.mask.resize(out.px.size());
    auto blit = [&](const Tile& q, int r0, int c0) {
        for (int r = 0; r < s; ++r) {
            const std::size_t dst = static_cast<std::size_t>(r0 + r) * out.size + c0;
            std::copy_n(q.px.begin() + static_cast<std::size_t>(r) * s, s, out.px.begin() + dst);
            if (masks)
                std::copy_n(q.mask.begin() + static_cast<std::size_t>(r) * s, s,
                            out.mask.begin() + dst);
        }
    };
    blit(tl, 0, 0);
    blit(tr, 0, s);
    blit(bl, s, 0);
    blit(br, s, s);
    return out;
}

Tile downscale(const Tile& tile, int target) {
    if (!is_power_of_two(target) || tile.size % target != 0)
        throw InputError("downscale: target must be a power of two dividing the tile size");
    if (target == tile.size) return tile;
    const int block = tile.size / target;
    Tile out;
    out.size = target;
    out.origin = tile.origin;
    out.split = tile.split;
    out.px.resize(static_cast<std::size_t>(target) * target);
    if (tile.has_mask()) out.mask.resize(out.px.size());
    const double inv = 1.0 / (static_cast<double>(block) * block);
    for (int r = 0; r < target; ++r) {
        for (int c = 0; c < target; ++c) {
            long sum = 0;
            long msum = 0;
            for (int br = 0; br < block; ++br) {
                const std::size_t row = static_cast<std::size_t>(r * block + br) * tile.size +
                                        static_cast<std::size_t>(c) * block;
                for (int bc = 0; bc < block; ++bc) {
                    sum += tile.px[row + bc];
                    if (tile.has_mask()) msum += tile.mask[row + bc];
                }
            }
            out.px[static_cast<std::size_t>(r) * target + c] =
                static_cast<std::uint8_t>(std::floor(static_cast<double>(sum) * inv + 0.5));
            if (tile.has_mask())
                out.mask[static_cast<std::size_t>(r) * target + c] =
                    msum * 2 >= block * block ? 1 : 0;
        }
    }
    return out;
}

Tile rotate_tile(const Tile& tile, int k) {
    k = ((k % 4) + 4) % 4;
    if (k == 0) return tile;
    const int s = tile.size;
    Tile out;
    out.size = s;
    out.origin = tile.origin;
    out.split = tile.split;
    out.px.resize(tile.px.size());
    if (tile.has_mask()) out.mask.resize(tile.mask.size());
    for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
            int nr = r, nc = c;
            switch (k) {  // counter-clockwise quarter turns
                case 1: nr = s - 1 - c; nc = r; break;
                case 2: nr = s - 1 - r; nc = s - 1 - c; break;
                case 3: nr = c; nc = s - 1 - r; break;
            }
            out.px[static_cast<std::size_t>(nr) * s + nc] = tile.at(r, c);
            if (tile.has_mask())
                out.mask[static_cast<std::size_t>(nr) * s + nc] =
                    tile.mask[static_cast<std::size_t>(r) * s + c];
        }
    }
    return out;
}

}  // namespace sargen
