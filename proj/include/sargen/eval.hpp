#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sargen/tiles.hpp"

namespace sargen {

/// Feature recipes for clustering:
///   "bm16"   16x16 block-mean intensities (256 values, 0..255)
///   "bm16w1" bm16 plus scaled water-proxy statistics (dark fraction,
///            largest dark component share, component count, elongation)
std::vector<double> extract_features(const Tile& tile, const std::string& recipe = "bm16w1");

struct ClusterModel {
    int k = 4;
    std::vector<std::vector<double>> centroids;
    std::string feature_recipe = "bm16w1";
    std::uint64_t rng_seed = 0;
};

/// Lloyd iterations with k-means++ seeding; converges when assignments are
/// stable or after the iteration cap. wss_trace, when given, records the
/// within-cluster sum of squares after every update (non-increasing).
ClusterModel fit_kmeans_features(const std::vector<std::vector<double>>& features, int k,
                                 std::uint64_t seed, std::vector<double>* wss_trace = nullptr);
ClusterModel fit_kmeans(const std::vector<Tile>& tiles, int k, std::uint64_t seed,
                        const std::string& recipe = "bm16w1");

int assign_one(const ClusterModel& model, const std::vector<double>& feature);

struct Assignment {
    std::vector<int> labels;
    std::vector<double> composition;  // percent per cluster, sums to 100
};

Assignment assign_and_compose(const ClusterModel& model, const std::vector<Tile>& tiles);

/// Majority-archetype purity of a clustering against ground-truth labels;
/// ties inside a cluster break toward the globally more frequent label.
double cluster_purity(const std::vector<int>& cluster_labels, const std::vector<int>& truth,
                      int k);

/// Mean local structural similarity over all stride-1 windows, standard
/// stabilizers C1=(k1*L)^2, C2=(k2*L)^2 with L=255. Exactly 1 for a==b.
double ssim(const Tile& a, const Tile& b, int window = 8, double k1 = 0.01, double k2 = 0.03);

struct SsimCell {
    double value = 0.0;
    std::size_t pairs = 0;
    bool available = false;
};

/// One table block for a given cluster model: per-cluster mean SSIM over
/// sampled pairs for the three pair classes, plus both composition rows.
struct SsimTable {
    int k = 0;
    std::vector<SsimCell> real_real, fake_fake, real_fake;
    std::vector<double> composition_real, composition_fake;
    std::size_t pairs_per_cell = 0;
    std::uint64_t rng_seed = 0;
};

/// Pure function of (sets, model, pairs_per_cell, seed). The two within-set
/// rows share one index stream per cluster, so identical real and fake sets
/// produce identical Real/Real and Fake/Fake rows; cross pairs skip
/// index-equal pairs. Clusters with too few members mark cells unavailable.
SsimTable ssim_table(const std::vector<Tile>& real_set, const std::vector<Tile>& fake_set,
                     const ClusterModel& model, std::size_t pairs_per_cell, std::uint64_t seed,
                     int window = 8);

/// Fraction of items on which two labelings agree after the optimal
/// (exhaustive Hungarian-style) cluster matching.
double matched_agreement(const std::vector<int>& labels_a, const std::vector<int>& labels_b,
                         int k, std::vector<int>* matching = nullptr);

struct RobustnessReport {
    double agreement = 0.0;          // after optimal cluster matching
    std::vector<int> matching;       // fake-model label -> real-model label
    ClusterModel model_real, model_fake;
};

/// Fits Kmeans separately on the real and fake sets, labels the union under
/// both models and reports agreement after Hungarian-optimal matching.
RobustnessReport cluster_robustness(const std::vector<Tile>& real_set,
                                    const std::vector<Tile>& fake_set, int k, std::uint64_t seed,
                                    const std::string& recipe = "bm16w1");

/// Pixel classifier contract: binary water mask, same shape as the tile.
using SegmentationOracle = std::function<std::vector<std::uint8_t>(const Tile&)>;

/// Shipped stand-in: water where intensity is below the threshold.
SegmentationOracle threshold_oracle(int threshold = 80);

std::vector<std::vector<std::uint8_t>> oracle_masks(const std::vector<Tile>& tiles,
                                                    const SegmentationOracle& oracle);

struct OracleSummary {
    std::vector<double> real_fractions, fake_fractions;  // water fraction per tile
    double distribution_distance = 0.0;  // two-sample Kolmogorov-Smirnov statistic
};

OracleSummary run_oracle(const std::vector<Tile>& real_set, const std::vector<Tile>& fake_set,
                         const SegmentationOracle& oracle);

/// Aligned plain-text table in the two-block layout (clusters fitted on real
/// data | clusters fitted on fake data); each block's "% images" row is the
/// composition of the set its model was fitted on.
std::string render_ssim_tables(const SsimTable& real_model_block,
                               const SsimTable& fake_model_block);

/// Line-delimited machine-readable records for the same data.
std::string render_ssim_records(const SsimTable& real_model_block,
                                const SsimTable& fake_model_block);

}  // namespace sargen
