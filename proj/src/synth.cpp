#include "sargen/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sargen/errors.hpp"
#include "sargen/rng.hpp"

namespace sargen {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Smooth value noise in [0,1]: random lattice, bilinear interpolation. The
/// lattice carries a random phase offset so its lines never align with
/// power-of-two tile boundaries (aligned lattices flatten cross-boundary
/// gradients and bias seam statistics).
class ValueNoise {
  public:
    ValueNoise(Rng& rng, int cells)
        : cells_(cells), lattice_((cells + 2) * (cells + 2)) {
        for (auto& v : lattice_) v = rng.uniform();
        off_x_ = rng.uniform();
        off_y_ = rng.uniform();
    }

    double at(double u, double v) const {  // u,v in [0,1]
        const double x = u * cells_ + off_x_;
        const double y = v * cells_ + off_y_;
        const int x0 = std::min(cells_, static_cast<int>(x));
        const int y0 = std::min(cells_, static_cast<int>(y));
        const double fx = smooth(x - x0);
        const double fy = smooth(y - y0);
        const double a = lat(x0, y0), b = lat(x0 + 1, y0);
        const double c = lat(x0, y0 + 1), d = lat(x0 + 1, y0 + 1);
        return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
    }

  private:
    static double smooth(double t) { return t * t * (3 - 2 * t); }
    double lat(int x, int y) const {
        return lattice_[static_cast<std::size_t>(y) * (cells_ + 2) + x];
    }
    int cells_;
    double off_x_ = 0, off_y_ = 0;
    std::vector<double> lattice_;
};

std::vector<double> noise_field(Rng& rng, int size, int base_cells, int octaves) {
    std::vector<double> field(static_cast<std::size_t>(size) * size, 0.0);
    double amp = 1.0, total = 0.0;
    int cells = base_cells;
    for (int o = 0; o < octaves; ++o) {
        ValueNoise vn(rng, cells);
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c)
                field[static_cast<std::size_t>(r) * size + c] +=
                    amp * vn.at((c + 0.5) / size, (r + 0.5) / size);
        total += amp;
        amp *= 0.5;
        cells *= 2;
    }
    for (auto& v : field) v /= total;
    return field;
}

/// Threshold a field at the quantile that leaves `fraction` of pixels above
/// it; marks those as water.
std::vector<std::uint8_t> threshold_fraction(const std::vector<double>& field, double fraction) {
    std::vector<double> sorted(field);
    std::sort(sorted.begin(), sorted.end());
    const auto idx = static_cast<std::size_t>(
        std::min<double>(static_cast<double>(sorted.size() - 1),
                         std::floor((1.0 - fraction) * static_cast<double>(sorted.size()))));
    const double thr = sorted[idx];
    std::vector<std::uint8_t> mask(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) mask[i] = field[i] >= thr ? 1 : 0;
    return mask;
}

std::vector<std::uint8_t> make_patches(Rng& rng, int size, double lo_frac, double hi_frac) {
    const auto field = noise_field(rng, size, 4, 2);
    const double frac = rng.uniform(lo_frac, hi_frac);
    return threshold_fraction(field, frac);
}

std::vector<std::uint8_t> make_strips(Rng& rng, int size) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
    const double theta = rng.uniform(0.0, kPi);
    const double nx = -std::sin(theta), ny = std::cos(theta);  // strip normal
    const double dx = std::cos(theta), dy = std::sin(theta);
    const int n_strips = 1 + static_cast<int>(rng.below(2));
    const double cx = size / 2.0, cy = size / 2.0;
    for (int s = 0; s < n_strips; ++s) {
        // offsets spaced >= size/4 so parallel strips never merge
        const double offset = (n_strips == 1 ? 0.0 : (s == 0 ? -1.0 : 1.0) * size / 4.0) +
                              rng.uniform(-size / 16.0, size / 16.0);
        const double half_w = rng.uniform(1.0, size / 48.0 + 1.5);
        const double amp = rng.uniform(0.0, size / 32.0);
        const double freq = rng.uniform(1.0, 2.5);
        const double phase = rng.uniform(0.0, 2 * kPi);
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                const double px = c + 0.5 - cx, py = r + 0.5 - cy;
                const double along = px * dx + py * dy;
                const double across = px * nx + py * ny - offset -
                                      amp * std::sin(freq * 2 * kPi * along / size + phase);
                if (std::abs(across) <= half_w)
                    mask[static_cast<std::size_t>(r) * size + c] = 1;
            }
        }
    }
    return mask;
}

std::vector<std::uint8_t> make_lake(Rng& rng, int size) {
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(size) * size, 0);
    const double r0 = 0.40 * size;  // pi*r0^2 ~ 0.50*size^2, lower bound pi*r0^2 >= 0.4 holds
    const double a = rng.uniform(0.04, 0.09);
    const double b = rng.uniform(0.02, 0.06);
    const int na = 2 + static_cast<int>(rng.below(3));
    const int nb = 5 + static_cast<int>(rng.below(4));
    const double pa = rng.uniform(0.0, 2 * kPi), pb = rng.uniform(0.0, 2 * kPi);
    const double cx = size / 2.0, cy = size / 2.0;
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const double px = c + 0.5 - cx, py = r + 0.5 - cy;
            const double rad = std::sqrt(px * px + py * py);
            const double ang = std::atan2(py, px);
            const double rho =
                r0 * (1.0 + a * std::sin(na * ang + pa) + b * std::sin(nb * ang + pb));
            if (rad <= rho) mask[static_cast<std::size_t>(r) * size + c] = 1;
        }
    }
    return mask;
}

}  // namespace

const char* to_string(Archetype a) {
    switch (a) {
        case Archetype::water_patches: return "water_patches";
        case Archetype::dry_patches: return "dry_patches";
        case Archetype::water_strips: return "water_strips";
        case Archetype::lake: return "lake";
    }
    return "water_patches";
}

Archetype archetype_from_string(const std::string& s) {
    if (s == "water_patches") return Archetype::water_patches;
    if (s == "dry_patches") return Archetype::dry_patches;
    if (s == "water_strips") return Archetype::water_strips;
    if (s == "lake") return Archetype::lake;
    throw InputError("unknown archetype: " + s);
}

Raster generate_scene(const SceneSpec& spec) {
    if (!is_power_of_two(spec.size) || spec.size < 32)
        throw InputError("generate_scene: size must be a power of two >= 32");
    if (spec.noise_level < 0.0 || spec.noise_level >= 1.0)
        throw InputError("generate_scene: noise_level must be in [0,1)");

    Rng rng(spec.rng_seed);
    std::vector<std::uint8_t> water;
    switch (spec.archetype) {
        case Archetype::water_patches: water = make_patches(rng, spec.size, 0.08, 0.18); break;
        case Archetype::dry_patches: water = make_patches(rng, spec.size, 0.005, 0.03); break;
        case Archetype::water_strips: water = make_strips(rng, spec.size); break;
        case Archetype::lake: water = make_lake(rng, spec.size); break;
        default: throw InputError("generate_scene: unknown archetype");
    }

    // Water dark, land bright, both textured; speckle is multiplicative.
    const auto texture = noise_field(rng, spec.size, 8, 2);
    Raster out;
    out.width = out.height = spec.size;
    out.geo_id = std::string("synthetic/") + to_string(spec.archetype);
    out.px.resize(water.size());
    out.mask = water;
    for (std::size_t i = 0; i < water.size(); ++i) {
        const double base = water[i] ? 35.0 + 25.0 * texture[i] : 150.0 + 40.0 * texture[i];
        const double speckle = 1.0 + spec.noise_level * (2.0 * rng.uniform() - 1.0);
        const double v = std::min(255.0, std::max(0.0, base * speckle));
        out.px[i] = static_cast<std::uint8_t>(std::floor(v + 0.5));
    }
    return out;
}

Dataset generate_corpus(const CorpusSpec& spec) {
    double mix_sum = std::accumulate(spec.mix.begin(), spec.mix.end(), 0.0);
    if (std::abs(mix_sum - 1.0) > 1e-9)
        throw InputError("generate_corpus: archetype mix must sum to 1");
    if (spec.n_scenes < 0) throw InputError("generate_corpus: negative scene count");

    // Largest-remainder apportionment: counts match proportions within +-1.
    std::array<int, 4> counts{};
    std::array<double, 4> remainders{};
    int assigned = 0;
    for (int a = 0; a < 4; ++a) {
        const double exact = spec.mix[a] * spec.n_scenes;
        counts[a] = static_cast<int>(std::floor(exact));
        remainders[a] = exact - counts[a];
        assigned += counts[a];
    }
    while (assigned < spec.n_scenes) {
        int best = 0;
        for (int a = 1; a < 4; ++a)
            if (remainders[a] > remainders[best]) best = a;
        counts[best]++;
        remainders[best] = -1.0;
        assigned++;
    }

    std::vector<Archetype> order;
    order.reserve(spec.n_scenes);
    for (int a = 0; a < 4; ++a)
        for (int i = 0; i < counts[a]; ++i) order.push_back(static_cast<Archetype>(a));
    Rng shuffle_rng(sub_seed(spec.rng_seed, 0xC0DE));
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    Dataset ds;
    ds.tiles.reserve(order.size());
    const double train_end = spec.split_fractions[0];
    const double val_end = train_end + spec.split_fractions[1];
    for (std::size_t i = 0; i < order.size(); ++i) {
        SceneSpec s;
        s.archetype = order[i];
        s.size = spec.scene_size;
        s.noise_level = spec.noise_level;
        s.rng_seed = sub_seed(spec.rng_seed, i + 1);
        Raster scene = generate_scene(s);

        Tile t;
        t.size = scene.width;
        t.px = std::move(scene.px);
        t.mask = std::move(scene.mask);
        t.origin = {scene.geo_id + "/" + std::to_string(i), 0, 0};
        const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(order.size());
        // deterministic per-scene split; archetypes are pre-shuffled so every
        // split sees the full mix
        t.split = u < train_end ? Split::train : (u < val_end ? Split::val : Split::test);
        ds.tiles.push_back(std::move(t));
    }
    ds.manifest = TileManifest::from_tiles(ds.tiles, spec.scene_size);
    return ds;
}

Archetype archetype_from_geo_id(const std::string& geo_id) {
    const std::string prefix = "synthetic/";
    if (geo_id.rfind(prefix, 0) != 0)
        throw InputError("archetype_from_geo_id: not a synthetic geo_id: " + geo_id);
    const auto rest = geo_id.substr(prefix.size());
    const auto slash = rest.find('/');
    return archetype_from_string(rest.substr(0, slash));
}

}  // namespace sargen
