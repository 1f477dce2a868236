#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sargen/gan.hpp"
#include "sargen/tiles.hpp"
#include "sargen/wae.hpp"

namespace sargen {

enum class Corner { TL, TR, BL, BR };

const char* to_string(Corner c);
Corner corner_from_string(const std::string& s);

struct GridCoord {
    int r = 0, c = 0;
    bool operator==(const GridCoord&) const = default;
};

/// One completion step: the target cell, the three filled cells supplying
/// the canonical TL/TR/BL contexts, and the rotation (counter-clockwise
/// quarter turns) that brings them into canonical orientation. Cells on the
/// two bands beside the seed corner have no full 2x2 window available when
/// their turn comes; there one context slot reuses the nearest filled cell
/// (flagged `substituted`).
struct PlanEntry {
    GridCoord target;
    GridCoord ctx_tl, ctx_tr, ctx_bl;
    int rotation = 0;
    bool substituted = false;
};

struct TraversalPlan {
    int rows = 0, cols = 0;
    Corner seed_corner = Corner::TR;
    std::vector<GridCoord> seeds;  // the 2x2 corner block minus its inward diagonal
    std::vector<PlanEntry> entries;
};

/// Plans a deterministic fill of an RxC grid from 3 seed cells at the given
/// corner. Every empty cell appears exactly once and every entry's context
/// cells precede it.
TraversalPlan plan_traversal(int rows, int cols, Corner seed_corner);

enum class CellKind { empty, real, generated };

struct Cell {
    CellKind kind = CellKind::empty;
    Tile tile;
    int step_index = -1;          // fill order, strictly increasing
    std::uint64_t noise_seed = 0;
};

struct SceneGrid {
    int rows = 0, cols = 0, tile_size = 0;
    std::vector<Cell> cells;

    SceneGrid() = default;
    SceneGrid(int rows_, int cols_, int tile_size_);
    Cell& at(int r, int c) { return cells[static_cast<std::size_t>(r) * cols + c]; }
    const Cell& at(int r, int c) const { return cells[static_cast<std::size_t>(r) * cols + c]; }
    bool complete() const;
};

/// Anything that can complete the bottom-right quadrant of a 2x2 block.
class QuadrantGenerator {
  public:
    virtual ~QuadrantGenerator() = default;
    virtual int resolution() const = 0;
    virtual Tile generate(const Tile& tl, const Tile& tr, const Tile& bl,
                          std::uint64_t noise_seed) const = 0;
};

/// Production generator: contexts encoded by the final-resolution WAE, noise
/// drawn from the seed, quadrant produced by the trained GAN at alpha = 1.
class GanQuadrantGenerator : public QuadrantGenerator {
  public:
    GanQuadrantGenerator(const GanModel& model, const WaeModel& wae);
    int resolution() const override { return resolution_; }
    Tile generate(const Tile& tl, const Tile& tr, const Tile& bl,
                  std::uint64_t noise_seed) const override;

  private:
    const GanModel& model_;
    const WaeModel& wae_;
    int resolution_;
};

/// Executes one plan entry in place; only the target cell changes.
void complete_cell(SceneGrid& grid, const PlanEntry& entry, const QuadrantGenerator& generator,
                   std::uint64_t noise_seed);

/// Fills every empty cell of the grid along the plan. Per-cell noise seeds
/// derive from (rng_seed, cell coordinates) so results are order-independent
/// and replayable.
void grow_grid(SceneGrid& grid, const TraversalPlan& plan, const QuadrantGenerator& generator,
               std::uint64_t rng_seed);

/// Seeds a fresh RxC grid with 3 tiles at the corner and fills the rest.
SceneGrid grow_scene(const Tile& seed_a, const Tile& seed_b, const Tile& seed_c, int rows,
                     int cols, Corner seed_corner, const QuadrantGenerator& generator,
                     std::uint64_t rng_seed);

/// Mosaics a complete grid into one raster.
Raster assemble_grid(const SceneGrid& grid);

/// Mean absolute pixel step across tile seams relative to the interior.
/// 1.0 means seamless; 0/0 (constant image) is defined as 1.
struct SeamMetric {
    std::vector<double> horizontal_ratios;  // one per internal row boundary
    std::vector<double> vertical_ratios;    // one per internal column boundary
    double seam_gradient = 0.0;
    double interior_gradient = 0.0;
    double ratio = 1.0;
};

SeamMetric seam_metric(const SceneGrid& grid);

}  // namespace sargen
