#include "sargen/complete.hpp"

#include <cmath>

#include "sargen/errors.hpp"
#include "sargen/rng.hpp"

namespace sargen {

const char* to_string(Corner c) {
    switch (c) {
        case Corner::TL: return "TL";
        case Corner::TR: return "TR";
        case Corner::BL: return "BL";
        case Corner::BR: return "BR";
    }
    return "TR";
}

Corner corner_from_string(const std::string& s) {
    if (s == "TL") return Corner::TL;
    if (s == "TR") return Corner::TR;
    if (s == "BL") return Corner::BL;
    if (s == "BR") return Corner::BR;
    throw InputError("unknown corner: " + s);
}

namespace {

// Plan in canonical orientation: seeds at top-left, i.e. (0,0),(0,1),(1,0).
// Interior cells use their true toward-seed window. On the two bands next to
// the seed, each column/row pair is filled inner-cell-first with one context
// slot substituted, then the outer cell from its now-complete window via a
// quarter-turn rotation.
TraversalPlan plan_canonical(int rows, int cols) {
    TraversalPlan plan;
    plan.rows = rows;
    plan.cols = cols;
    plan.seed_corner = Corner::TL;
    plan.seeds = {{0, 0}, {0, 1}, {1, 0}};

    auto push = [&plan](GridCoord target, GridCoord tl, GridCoord tr, GridCoord bl, int rot,
                        bool subst) {
        plan.entries.push_back({target, tl, tr, bl, rot, subst});
    };

    push({1, 1}, {0, 0}, {0, 1}, {1, 0}, 0, false);
    for (int c = 2; c < cols; ++c) {
        // (1,c): true window needs (0,c); reuse the window's TL cell instead
        push({1, c}, {0, c - 1}, {0, c - 1}, {1, c - 1}, 0, true);
        // (0,c): window rows {0,1} x cols {c-1,c}, target at its TR; one
        // clockwise turn (3 CCW) brings the target to the BR slot
        push({0, c}, {1, c - 1}, {0, c - 1}, {1, c}, 3, false);
    }
    for (int r = 2; r < rows; ++r) {
        push({r, 1}, {r - 1, 0}, {r - 1, 1}, {r - 1, 0}, 0, true);
        // (r,0): target at the window's BL; one CCW turn brings it to BR
        push({r, 0}, {r - 1, 1}, {r, 1}, {r - 1, 0}, 1, false);
    }
    for (int r = 2; r < rows; ++r)
        for (int c = 2; c < cols; ++c)
            push({r, c}, {r - 1, c - 1}, {r - 1, c}, {r, c - 1}, 0, false);
    return plan;
}

// Whole-scene rotation (grid cells plus tile content) by k CCW quarter
// turns maps the seed corner onto TL.
int turns_to_canonical(Corner corner) {
    switch (corner) {
        case Corner::TL: return 0;
        case Corner::TR: return 1;
        case Corner::BR: return 2;
        case Corner::BL: return 3;
    }
    return 0;
}

// Inverse map of a k-CCW-turn grid rotation: canonical (a,b) back to the
// actual grid with `rows` x `cols` actual shape.
GridCoord from_canonical(GridCoord p, int k, int rows, int cols) {
    switch (k) {
        case 0: return p;
        case 1: return {p.c, cols - 1 - p.r};      // canonical grid is cols x rows
        case 2: return {rows - 1 - p.r, cols - 1 - p.c};
        case 3: return {rows - 1 - p.c, p.r};
    }
    return p;
}

}  // namespace

TraversalPlan plan_traversal(int rows, int cols, Corner seed_corner) {
    if (rows < 2 || cols < 2) throw InputError("plan_traversal: grid must be at least 2x2");
    const int k = turns_to_canonical(seed_corner);
    const bool swap_dims = k % 2 == 1;
    const TraversalPlan canon =
        plan_canonical(swap_dims ? cols : rows, swap_dims ? rows : cols);

    TraversalPlan plan;
    plan.rows = rows;
    plan.cols = cols;
    plan.seed_corner = seed_corner;
    for (const auto& s : canon.seeds) plan.seeds.push_back(from_canonical(s, k, rows, cols));
    for (const auto& e : canon.entries) {
        PlanEntry out;
        out.target = from_canonical(e.target, k, rows, cols);
        out.ctx_tl = from_canonical(e.ctx_tl, k, rows, cols);
        out.ctx_tr = from_canonical(e.ctx_tr, k, rows, cols);
        out.ctx_bl = from_canonical(e.ctx_bl, k, rows, cols);
        out.rotation = (e.rotation + k) % 4;
        out.substituted = e.substituted;
        plan.entries.push_back(out);
    }
    return plan;
}

SceneGrid::SceneGrid(int rows_, int cols_, int tile_size_)
    : rows(rows_), cols(cols_), tile_size(tile_size_),
      cells(static_cast<std::size_t>(rows_) * cols_) {}

bool SceneGrid::complete() const {
    for (const auto& c : cells)
        if (c.kind == CellKind::empty) return false;
    return true;
}

GanQuadrantGenerator::GanQuadrantGenerator(const GanModel& model, const WaeModel& wae)
    : model_(model), wae_(wae),
      resolution_(model.config().schedule.steps[model.current_step()].resolution) {
    if (wae.config().resolution != resolution_)
        throw ConfigError("completion: WAE resolution " +
                          std::to_string(wae.config().resolution) +
                          " does not match generator resolution " + std::to_string(resolution_));
}

Tile GanQuadrantGenerator::generate(const Tile& tl, const Tile& tr, const Tile& bl,
                                    std::uint64_t noise_seed) const {
    ConditioningInput cond;
    cond.z_tl = wae_.encode(tl);
    cond.z_tr = wae_.encode(tr);
    cond.z_bl = wae_.encode(bl);
    Rng rng(noise_seed);
    cond.noise.resize(model_.config().noise_dim);
    for (auto& v : cond.noise) v = rng.normal();
    return model_.generate_quadrant(cond, resolution_, 1.0);
}

void complete_cell(SceneGrid& grid, const PlanEntry& entry, const QuadrantGenerator& generator,
                   std::uint64_t noise_seed) {
    auto& target = grid.at(entry.target.r, entry.target.c);
    if (target.kind != CellKind::empty)
        throw StateError("complete_cell: target cell is not empty");
    const auto& ctl = grid.at(entry.ctx_tl.r, entry.ctx_tl.c);
    const auto& ctr = grid.at(entry.ctx_tr.r, entry.ctx_tr.c);
    const auto& cbl = grid.at(entry.ctx_bl.r, entry.ctx_bl.c);
    if (ctl.kind == CellKind::empty || ctr.kind == CellKind::empty ||
        cbl.kind == CellKind::empty)
        throw StateError("complete_cell: context cell is empty");

    const Tile generated =
        generator.generate(rotate_tile(ctl.tile, entry.rotation),
                           rotate_tile(ctr.tile, entry.rotation),
                           rotate_tile(cbl.tile, entry.rotation), noise_seed);
    if (generated.size != grid.tile_size)
        throw InputError("complete_cell: generator produced a wrong-size tile");

    int max_step = -1;
    for (const auto& c : grid.cells) max_step = std::max(max_step, c.step_index);
    target.kind = CellKind::generated;
    target.tile = rotate_tile(generated, (4 - entry.rotation) % 4);
    target.step_index = max_step + 1;
    target.noise_seed = noise_seed;
}

void grow_grid(SceneGrid& grid, const TraversalPlan& plan, const QuadrantGenerator& generator,
               std::uint64_t rng_seed) {
    if (plan.rows != grid.rows || plan.cols != grid.cols)
        throw InputError("grow_grid: plan does not match grid dimensions");
    for (const auto& entry : plan.entries) {
        if (grid.at(entry.target.r, entry.target.c).kind != CellKind::empty) continue;
        const std::uint64_t noise =
            sub_seed(rng_seed, static_cast<std::uint64_t>(entry.target.r),
                     static_cast<std::uint64_t>(entry.target.c));
        complete_cell(grid, entry, generator, noise);
    }
}

SceneGrid grow_scene(const Tile& seed_a, const Tile& seed_b, const Tile& seed_c, int rows,
                     int cols, Corner seed_corner, const QuadrantGenerator& generator,
                     std::uint64_t rng_seed) {
    const int s = generator.resolution();
    if (seed_a.size != s || seed_b.size != s || seed_c.size != s)
        throw InputError("grow_scene: seed tiles must match the generator resolution");
    const TraversalPlan plan = plan_traversal(rows, cols, seed_corner);
    SceneGrid grid(rows, cols, s);
    const Tile* seeds[3] = {&seed_a, &seed_b, &seed_c};
    for (int i = 0; i < 3; ++i) {
        auto& cell = grid.at(plan.seeds[i].r, plan.seeds[i].c);
        cell.kind = CellKind::real;
        cell.tile = *seeds[i];
        cell.step_index = i;
    }
    grow_grid(grid, plan, generator, rng_seed);
    return grid;
}

Raster assemble_grid(const SceneGrid& grid) {
    if (!grid.complete()) throw StateError("assemble_grid: grid has empty cells");
    Raster out;
    out.width = grid.cols * grid.tile_size;
    out.height = grid.rows * grid.tile_size;
    out.geo_id = "grown";
    out.px.resize(static_cast<std::size_t>(out.width) * out.height);
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            const Tile& t = grid.at(r, c).tile;
            for (int y = 0; y < grid.tile_size; ++y) {
                const std::size_t dst =
                    (static_cast<std::size_t>(r) * grid.tile_size + y) * out.width +
                    static_cast<std::size_t>(c) * grid.tile_size;
                std::copy_n(t.px.begin() + static_cast<std::size_t>(y) * grid.tile_size,
                            grid.tile_size, out.px.begin() + dst);
            }
        }
    }
    return out;
}

SeamMetric seam_metric(const SceneGrid& grid) {
    if (!grid.complete()) throw StateError("seam_metric: grid has empty cells");
    const Raster img = assemble_grid(grid);
    const int s = grid.tile_size;

    auto ratio_of = [](double seam, double interior) {
        if (seam == 0.0 && interior == 0.0) return 1.0;
        if (interior == 0.0) return std::numeric_limits<double>::infinity();
        return seam / interior;
    };

    double interior_h = 0.0, interior_v = 0.0;
    std::size_t nh = 0, nv = 0;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c + 1 < img.width; ++c) {
            if ((c + 1) % s == 0) continue;
            interior_h += std::abs(int(img.at(r, c)) - int(img.at(r, c + 1)));
            nh++;
        }
    for (int r = 0; r + 1 < img.height; ++r) {
        if ((r + 1) % s == 0) continue;
        for (int c = 0; c < img.width; ++c) {
            interior_v += std::abs(int(img.at(r, c)) - int(img.at(r + 1, c)));
            nv++;
        }
    }
    const double interior_h_mean = nh ? interior_h / static_cast<double>(nh) : 0.0;
    const double interior_v_mean = nv ? interior_v / static_cast<double>(nv) : 0.0;

    SeamMetric out;
    double seam_sum = 0.0;
    std::size_t seam_n = 0;
    for (int b = 1; b < grid.cols; ++b) {
        double sum = 0.0;
        for (int r = 0; r < img.height; ++r)
            sum += std::abs(int(img.at(r, b * s - 1)) - int(img.at(r, b * s)));
        const double mean = sum / static_cast<double>(img.height);
        out.vertical_ratios.push_back(ratio_of(mean, interior_h_mean));
        seam_sum += sum;
        seam_n += static_cast<std::size_t>(img.height);
    }
    for (int b = 1; b < grid.rows; ++b) {
        double sum = 0.0;
        for (int c = 0; c < img.width; ++c)
            sum += std::abs(int(img.at(b * s - 1, c)) - int(img.at(b * s, c)));
        const double mean = sum / static_cast<double>(img.width);
        out.horizontal_ratios.push_back(ratio_of(mean, interior_v_mean));
        seam_sum += sum;
        seam_n += static_cast<std::size_t>(img.width);
    }
    out.seam_gradient = seam_n ? seam_sum / static_cast<double>(seam_n) : 0.0;
    const double interior_all =
        (nh + nv) ? (interior_h + interior_v) / static_cast<double>(nh + nv) : 0.0;
    out.interior_gradient = interior_all;
    out.ratio = ratio_of(out.seam_gradient, interior_all);
    return out;
}

}  // namespace sargen
