#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "sargen/tiles.hpp"

namespace sargen {

/// The four scene archetypes the synthetic corpus is built from: mixed small
/// water patches, mostly-dry patches, elongated water strips, and lake-like
/// scenes dominated by one large water body.
enum class Archetype { water_patches, dry_patches, water_strips, lake };

const char* to_string(Archetype a);
Archetype archetype_from_string(const std::string& s);

struct SceneSpec {
    Archetype archetype = Archetype::water_patches;
    int size = 64;               // power of two, >= 32
    std::uint64_t rng_seed = 0;
    double noise_level = 0.08;   // multiplicative speckle amplitude, in [0,1)
};

/// Deterministic SAR-like scene with ground-truth water mask (water renders
/// dark, land bright, both speckled). Guarantees per archetype:
///   water_patches  water fraction in [0.02, 0.2]
///   dry_patches    water fraction <= 0.05
///   water_strips   every water component has elongation >= 4
///   lake           a single water component covering >= 0.4 of the scene
Raster generate_scene(const SceneSpec& spec);

/// Archetype proportions in the order of the Archetype enum; must sum to 1.
using ArchetypeMix = std::array<double, 4>;

/// Proportions matching the measured composition of the real corpus.
constexpr ArchetypeMix default_mix{0.29, 0.41, 0.19, 0.11};

struct CorpusSpec {
    int n_scenes = 400;
    ArchetypeMix mix = default_mix;
    std::uint64_t rng_seed = 0;
    int scene_size = 64;
    double noise_level = 0.08;
    // per-scene split fractions (train, val, test)
    std::array<double, 3> split_fractions{0.8, 0.1, 0.1};
};

/// Generates n scenes with archetype counts apportioned by largest remainder
/// (exact to +-1), shuffled deterministically. Each scene becomes one tile;
/// geo_id records "synthetic/<archetype>/<index>".
Dataset generate_corpus(const CorpusSpec& spec);

/// Archetype recovered from a corpus geo_id (for purity bookkeeping).
Archetype archetype_from_geo_id(const std::string& geo_id);

}  // namespace sargen
