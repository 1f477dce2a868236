#include "sargen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sargen/errors.hpp"
#include "sargen/morphology.hpp"
#include "sargen/rng.hpp"

namespace sargen {

namespace {

constexpr int kDarkThreshold = 80;

void block_means(const Tile& tile, std::vector<double>& out) {
    const int s = tile.size;
    for (int br = 0; br < 16; ++br) {
        for (int bc = 0; bc < 16; ++bc) {
            // block bounds cover the tile evenly; tiles below 16px fall back
            // to nearest-pixel sampling
            int r0 = br * s / 16, r1 = std::max(r0 + 1, (br + 1) * s / 16);
            int c0 = bc * s / 16, c1 = std::max(c0 + 1, (bc + 1) * s / 16);
            r0 = std::min(r0, s - 1);
            c0 = std::min(c0, s - 1);
            r1 = std::min(r1, s);
            c1 = std::min(c1, s);
            double sum = 0.0;
            for (int r = r0; r < r1; ++r)
                for (int c = c0; c < c1; ++c) sum += tile.at(r, c);
            out.push_back(sum / (static_cast<double>(r1 - r0) * (c1 - c0)));
        }
    }
}

void water_proxies(const Tile& tile, std::vector<double>& out) {
    std::vector<std::uint8_t> dark(tile.px.size());
    std::size_t n_dark = 0;
    for (std::size_t i = 0; i < tile.px.size(); ++i) {
        dark[i] = tile.px[i] < kDarkThreshold ? 1 : 0;
        n_dark += dark[i];
    }
    const double frac = static_cast<double>(n_dark) / static_cast<double>(tile.px.size());
    const auto stats = component_stats(dark, tile.size, tile.size);
    double largest_share = 0.0, mean_elong = 0.0;
    std::size_t counted = 0;
    for (const auto& s : stats) {
        largest_share = std::max(
            largest_share, n_dark ? static_cast<double>(s.pixels) / static_cast<double>(n_dark)
                                  : 0.0);
        if (s.pixels >= 8) {
            mean_elong += s.elongation;
            counted++;
        }
    }
    if (counted) mean_elong /= static_cast<double>(counted);
    // scaled so archetype margins in proxy space dominate the block-mean
    // layout noise (patch positions are random within an archetype)
    out.push_back(65536.0 * frac);
    out.push_back(8192.0 * largest_share);
    out.push_back(4096.0 * std::min(1.0, static_cast<double>(stats.size()) / 16.0));
    out.push_back(16384.0 * std::min(1.0, mean_elong / 16.0));
}

}  // namespace

std::vector<double> extract_features(const Tile& tile, const std::string& recipe) {
    if (tile.px.empty()) throw InputError("extract_features: empty tile");
    std::vector<double> out;
    out.reserve(260);
    if (recipe == "bm16") {
        block_means(tile, out);
    } else if (recipe == "bm16w1") {
        block_means(tile, out);
        water_proxies(tile, out);
    } else {
        throw InputError("extract_features: unknown recipe " + recipe);
    }
    return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

int nearest_centroid(const std::vector<std::vector<double>>& centroids,
                     const std::vector<double>& f) {
    int best = 0;
    double best_d = sq_dist(centroids[0], f);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = sq_dist(centroids[c], f);
        if (d < best_d) {  // ties keep the lowest index
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

namespace {

ClusterModel lloyd_once(const std::vector<std::vector<double>>& features, int k,
                        std::uint64_t seed, std::vector<double>* wss_trace) {
    const std::size_t n = features.size();
    Rng rng(sub_seed(seed, 0x4B3A));

    ClusterModel model;
    model.k = k;
    model.rng_seed = seed;

    // k-means++ seeding
    model.centroids.push_back(features[rng.below(n)]);
    std::vector<double> d2(n);
    while (model.centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = sq_dist(model.centroids[0], features[i]);
            for (std::size_t c = 1; c < model.centroids.size(); ++c)
                best = std::min(best, sq_dist(model.centroids[c], features[i]));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);  // all points identical
        }
        model.centroids.push_back(features[pick]);
    }

    std::vector<int> labels(n, -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            const int l = nearest_centroid(model.centroids, features[i]);
            if (l != labels[i]) changed = true;
            labels[i] = l;
        }
        // update step
        const std::size_t dim = features[0].size();
        std::vector<std::vector<double>> sums(k, std::vector<double>(dim, 0.0));
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[labels[i]]++;
            for (std::size_t d = 0; d < dim; ++d) sums[labels[i]][d] += features[i][d];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                // reseed an empty cluster at the point farthest from its centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_dist(model.centroids[labels[i]], features[i]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                model.centroids[c] = features[far];
                labels[far] = c;
                changed = true;
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d)
                model.centroids[c][d] = sums[c][d] / static_cast<double>(counts[c]);
        }
        if (wss_trace) {
            double wss = 0.0;
            for (std::size_t i = 0; i < n; ++i)
                wss += sq_dist(model.centroids[nearest_centroid(model.centroids, features[i])],
                               features[i]);
            wss_trace->push_back(wss);
        }
        if (!changed && iter > 0) break;
    }
    return model;
}

double final_wss(const std::vector<std::vector<double>>& features, const ClusterModel& model) {
    double wss = 0.0;
    for (const auto& f : features)
        wss += sq_dist(model.centroids[nearest_centroid(model.centroids, f)], f);
    return wss;
}

}  // namespace

ClusterModel fit_kmeans_features(const std::vector<std::vector<double>>& features, int k,
                                 std::uint64_t seed, std::vector<double>* wss_trace) {
    if (k < 1) throw InputError("fit_kmeans: k must be >= 1");
    if (features.size() < static_cast<std::size_t>(k))
        throw InputError("fit_kmeans: need at least k samples (" + std::to_string(k) + ")");
    // restarts guard against a bad k-means++ draw; the lowest-objective run wins
    constexpr int kRestarts = 8;
    ClusterModel best;
    std::vector<double> best_trace;
    double best_wss = 0.0;
    for (int init = 0; init < kRestarts; ++init) {
        std::vector<double> trace;
        ClusterModel candidate =
            lloyd_once(features, k, sub_seed(seed, 0x1417, init), &trace);
        const double wss = final_wss(features, candidate);
        if (init == 0 || wss < best_wss) {
            best_wss = wss;
            best = std::move(candidate);
            best_trace = std::move(trace);
        }
    }
    best.rng_seed = seed;
    if (wss_trace) *wss_trace = best_trace;
    return best;
}

ClusterModel fit_kmeans(const std::vector<Tile>& tiles, int k, std::uint64_t seed,
                        const std::string& recipe) {
    std::vector<std::vector<double>> features;
    features.reserve(tiles.size());
    for (const auto& t : tiles) features.push_back(extract_features(t, recipe));
    ClusterModel model = fit_kmeans_features(features, k, seed);
    model.feature_recipe = recipe;
    return model;
}

int assign_one(const ClusterModel& model, const std::vector<double>& feature) {
    if (model.centroids.empty()) throw StateError("assign: model not fitted");
    return nearest_centroid(model.centroids, feature);
}

Assignment assign_and_compose(const ClusterModel& model, const std::vector<Tile>& tiles) {
    Assignment out;
    out.labels.reserve(tiles.size());
    std::vector<std::size_t> counts(model.k, 0);
    for (const auto& t : tiles) {
        const int l = assign_one(model, extract_features(t, model.feature_recipe));
        out.labels.push_back(l);
        counts[l]++;
    }
    out.composition.resize(model.k, 0.0);
    if (!tiles.empty())
        for (int c = 0; c < model.k; ++c)
            out.composition[c] =
                100.0 * static_cast<double>(counts[c]) / static_cast<double>(tiles.size());
    return out;
}

double cluster_purity(const std::vector<int>& cluster_labels, const std::vector<int>& truth,
                      int k) {
    if (cluster_labels.size() != truth.size() || cluster_labels.empty())
        throw InputError("cluster_purity: label vectors must be nonempty and equal length");
    const int n_truth = 1 + *std::max_element(truth.begin(), truth.end());
    std::vector<std::size_t> global(n_truth, 0);
    for (const int t : truth) global[t]++;
    std::size_t agree = 0;
    for (int c = 0; c < k; ++c) {
        std::vector<std::size_t> counts(n_truth, 0);
        std::size_t members = 0;
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (cluster_labels[i] == c) {
                counts[truth[i]]++;
                members++;
            }
        if (members == 0) continue;
        int best = 0;
        for (int t = 1; t < n_truth; ++t) {
            if (counts[t] > counts[best] ||
                (counts[t] == counts[best] && global[t] > global[best]))
                best = t;
        }
        agree += counts[best];
    }
    return static_cast<double>(agree) / static_cast<double>(truth.size());
}

double ssim(const Tile& a, const Tile& b, int window, double k1, double k2) {
    if (a.size != b.size || a.px.size() != b.px.size())
        throw InputError("ssim: tile shapes differ");
    if (window < 1 || window > a.size) throw InputError("ssim: window must fit inside the tile");
    const int s = a.size;
    const int stride = s + 1;

    // integral images; all sums are integers below 2^53, so they are exact
    std::vector<double> ia(static_cast<std::size_t>(stride) * stride, 0.0);
    std::vector<double> ib = ia, iaa = ia, ibb = ia, iab = ia;
    for (int r = 0; r < s; ++r) {
        for (int c = 0; c < s; ++c) {
            const double va = a.px[static_cast<std::size_t>(r) * s + c];
            const double vb = b.px[static_cast<std::size_t>(r) * s + c];
            const std::size_t i = static_cast<std::size_t>(r + 1) * stride + c + 1;
            const std::size_t up = i - stride, left = i - 1, diag = up - 1;
            ia[i] = va + ia[up] + ia[left] - ia[diag];
            ib[i] = vb + ib[up] + ib[left] - ib[diag];
            iaa[i] = va * va + iaa[up] + iaa[left] - iaa[diag];
            ibb[i] = vb * vb + ibb[up] + ibb[left] - ibb[diag];
            iab[i] = va * vb + iab[up] + iab[left] - iab[diag];
        }
    }
    auto win_sum = [stride, window](const std::vector<double>& ii, int r, int c) {
        const std::size_t tl = static_cast<std::size_t>(r) * stride + c;
        const std::size_t br = static_cast<std::size_t>(r + window) * stride + c + window;
        const std::size_t tr = static_cast<std::size_t>(r) * stride + c + window;
        const std::size_t bl = static_cast<std::size_t>(r + window) * stride + c;
        return ii[br] - ii[tr] - ii[bl] + ii[tl];
    };

    const double L = 255.0;
    const double C1 = (k1 * L) * (k1 * L);
    const double C2 = (k2 * L) * (k2 * L);
    const double N = static_cast<double>(window) * window;
    double total = 0.0;
    std::size_t windows = 0;
    for (int r = 0; r + window <= s; ++r) {
        for (int c = 0; c + window <= s; ++c) {
            const double mu_a = win_sum(ia, r, c) / N;
            const double mu_b = win_sum(ib, r, c) / N;
            const double var_a = win_sum(iaa, r, c) / N - mu_a * mu_a;
            const double var_b = win_sum(ibb, r, c) / N - mu_b * mu_b;
            const double cov = win_sum(iab, r, c) / N - mu_a * mu_b;
            const double num = (2.0 * (mu_a * mu_b) + C1) * (2.0 * cov + C2);
            const double den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2);
            total += num / den;
            windows++;
        }
    }
    return total / static_cast<double>(windows);
}

namespace {

SsimCell sample_within(const std::vector<Tile>& set, const std::vector<std::size_t>& members,
                       std::size_t pairs, std::uint64_t stream_seed, int window) {
    SsimCell cell;
    cell.pairs = pairs;
    if (members.size() < 2) return cell;  // unavailable, never fabricated
    Rng rng(stream_seed);
    double sum = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        const std::size_t i = rng.below(members.size());
        std::size_t j = rng.below(members.size() - 1);
        if (j >= i) j++;
        sum += ssim(set[members[i]], set[members[j]], window);
    }
    cell.value = sum / static_cast<double>(pairs);
    cell.available = true;
    return cell;
}

SsimCell sample_cross(const std::vector<Tile>& real_set, const std::vector<Tile>& fake_set,
                      const std::vector<std::size_t>& mr, const std::vector<std::size_t>& mf,
                      std::size_t pairs, std::uint64_t stream_seed, int window) {
    SsimCell cell;
    cell.pairs = pairs;
    if (mr.empty() || mf.empty() || (mr.size() == 1 && mf.size() == 1)) return cell;
    Rng rng(stream_seed);
    double sum = 0.0;
    for (std::size_t p = 0; p < pairs; ++p) {
        std::size_t i, j;
        do {
            i = rng.below(mr.size());
            j = rng.below(mf.size());
        } while (i == j);  // index-equal pairs skipped (self-pairs when fake == real)
        sum += ssim(real_set[mr[i]], fake_set[mf[j]], window);
    }
    cell.value = sum / static_cast<double>(pairs);
    cell.available = true;
    return cell;
}

}  // namespace

SsimTable ssim_table(const std::vector<Tile>& real_set, const std::vector<Tile>& fake_set,
                     const ClusterModel& model, std::size_t pairs_per_cell, std::uint64_t seed,
                     int window) {
    if (pairs_per_cell < 1) throw InputError("ssim_table: pairs_per_cell must be >= 1");
    const Assignment real_assign = assign_and_compose(model, real_set);
    const Assignment fake_assign = assign_and_compose(model, fake_set);

    SsimTable table;
    table.k = model.k;
    table.pairs_per_cell = pairs_per_cell;
    table.rng_seed = seed;
    table.composition_real = real_assign.composition;
    table.composition_fake = fake_assign.composition;

    for (int c = 0; c < model.k; ++c) {
        std::vector<std::size_t> mr, mf;
        for (std::size_t i = 0; i < real_set.size(); ++i)
            if (real_assign.labels[i] == c) mr.push_back(i);
        for (std::size_t i = 0; i < fake_set.size(); ++i)
            if (fake_assign.labels[i] == c) mf.push_back(i);
        // the two within-set rows share one index stream per cluster, so
        // identical sets give identical rows
        const std::uint64_t within = sub_seed(seed, 0x11, static_cast<std::uint64_t>(c));
        const std::uint64_t cross = sub_seed(seed, 0x22, static_cast<std::uint64_t>(c));
        table.real_real.push_back(sample_within(real_set, mr, pairs_per_cell, within, window));
        table.fake_fake.push_back(sample_within(fake_set, mf, pairs_per_cell, within, window));
        table.real_fake.push_back(
            sample_cross(real_set, fake_set, mr, mf, pairs_per_cell, cross, window));
    }
    return table;
}

double matched_agreement(const std::vector<int>& labels_a, const std::vector<int>& labels_b,
                         int k, std::vector<int>* matching) {
    if (labels_a.size() != labels_b.size() || labels_a.empty())
        throw InputError("matched_agreement: label vectors must be nonempty and equal length");
    if (k < 1 || k > 8) throw InputError("matched_agreement: k must lie in [1,8]");
    std::vector<std::vector<std::size_t>> confusion(k, std::vector<std::size_t>(k, 0));
    for (std::size_t i = 0; i < labels_a.size(); ++i) confusion[labels_b[i]][labels_a[i]]++;

    // optimal matching; k is small so permutations are exhaustive
    std::vector<int> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::size_t best = 0;
    std::vector<int> best_perm = perm;
    do {
        std::size_t agree = 0;
        for (int c = 0; c < k; ++c) agree += confusion[c][perm[c]];
        if (agree > best) {
            best = agree;
            best_perm = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (matching) *matching = best_perm;
    return static_cast<double>(best) / static_cast<double>(labels_a.size());
}

RobustnessReport cluster_robustness(const std::vector<Tile>& real_set,
                                    const std::vector<Tile>& fake_set, int k, std::uint64_t seed,
                                    const std::string& recipe) {
    if (real_set.empty() || fake_set.empty())
        throw InputError("cluster_robustness: both sets must be nonempty");
    RobustnessReport report;
    report.model_real = fit_kmeans(real_set, k, sub_seed(seed, 0xA), recipe);
    report.model_fake = fit_kmeans(fake_set, k, sub_seed(seed, 0xA), recipe);

    // label the union under both models
    std::vector<int> lr, lf;
    for (const auto* set : {&real_set, &fake_set}) {
        for (const auto& t : *set) {
            const auto f = extract_features(t, recipe);
            lr.push_back(assign_one(report.model_real, f));
            lf.push_back(assign_one(report.model_fake, f));
        }
    }
    report.agreement = matched_agreement(lr, lf, k, &report.matching);
    return report;
}

SegmentationOracle threshold_oracle(int threshold) {
    return [threshold](const Tile& tile) {
        std::vector<std::uint8_t> mask(tile.px.size());
        for (std::size_t i = 0; i < tile.px.size(); ++i)
            mask[i] = tile.px[i] < threshold ? 1 : 0;
        return mask;
    };
}

std::vector<std::vector<std::uint8_t>> oracle_masks(const std::vector<Tile>& tiles,
                                                    const SegmentationOracle& oracle) {
    if (!oracle) throw InputError("run_oracle: no oracle provided");
    std::vector<std::vector<std::uint8_t>> masks;
    masks.reserve(tiles.size());
    for (const auto& t : tiles) {
        auto m = oracle(t);
        if (m.size() != t.px.size())
            throw InputError("run_oracle: oracle mask shape mismatch");
        for (const auto v : m)
            if (v > 1) throw InputError("run_oracle: oracle mask must be binary");
        masks.push_back(std::move(m));
    }
    return masks;
}

OracleSummary run_oracle(const std::vector<Tile>& real_set, const std::vector<Tile>& fake_set,
                         const SegmentationOracle& oracle) {
    OracleSummary out;
    auto fractions = [&oracle](const std::vector<Tile>& tiles) {
        std::vector<double> fr;
        for (const auto& mask : oracle_masks(tiles, oracle)) {
            std::size_t n = 0;
            for (const auto v : mask) n += v;
            fr.push_back(static_cast<double>(n) / static_cast<double>(mask.size()));
        }
        return fr;
    };
    out.real_fractions = fractions(real_set);
    out.fake_fractions = fractions(fake_set);

    // two-sample Kolmogorov-Smirnov statistic; ties consume both sides
    // before the gap is measured
    auto a = out.real_fractions;
    auto b = out.fake_fractions;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() || j < b.size()) {
        double x;
        if (i == a.size())
            x = b[j];
        else if (j == b.size())
            x = a[i];
        else
            x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        const double fa = static_cast<double>(i) / static_cast<double>(a.size());
        const double fb = static_cast<double>(j) / static_cast<double>(b.size());
        d = std::max(d, std::abs(fa - fb));
    }
    out.distribution_distance = a.empty() || b.empty() ? 0.0 : d;
    return out;
}

namespace {

std::string fmt_cell(const SsimCell& c) {
    if (!c.available) return "  n/a";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%5.2f", c.value);
    return buf;
}

std::string fmt_pct(double v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%5.1f", v);
    return buf;
}

void render_row(std::ostringstream& os, const std::string& label,
                const std::vector<SsimCell>& left, const std::vector<SsimCell>& right) {
    os << label;
    for (const auto& c : left) os << "  " << fmt_cell(c);
    os << "    |";
    for (const auto& c : right) os << "  " << fmt_cell(c);
    os << "\n";
}

}  // namespace

std::string render_ssim_tables(const SsimTable& real_model_block,
                               const SsimTable& fake_model_block) {
    const int k = real_model_block.k;
    std::ostringstream os;
    os << "            Real Data with " << k << " clusters";
    const int pad = std::max(1, 7 * k - 18);
    os << std::string(pad, ' ') << "|  Fake Data with " << k << " clusters\n";
    render_row(os, "Real/Real ", real_model_block.real_real, fake_model_block.real_real);
    render_row(os, "Fake/Fake ", real_model_block.fake_fake, fake_model_block.fake_fake);
    render_row(os, "Real/Fake ", real_model_block.real_fake, fake_model_block.real_fake);
    os << "% images  ";
    for (const double v : real_model_block.composition_real) os << "  " << fmt_pct(v);
    os << "    |";
    for (const double v : fake_model_block.composition_fake) os << "  " << fmt_pct(v);
    os << "\n";
    return os.str();
}

std::string render_ssim_records(const SsimTable& real_model_block,
                                const SsimTable& fake_model_block) {
    std::ostringstream os;
    auto emit = [&os](const char* fit, const SsimTable& t) {
        const char* rows[3] = {"real_real", "fake_fake", "real_fake"};
        const std::vector<SsimCell>* cells[3] = {&t.real_real, &t.fake_fake, &t.real_fake};
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < t.k; ++c) {
                const auto& cell = (*cells[r])[c];
                os << "ssim fit=" << fit << " row=" << rows[r] << " cluster=" << c << " value=";
                if (cell.available) {
                    char buf[32];
                    std::snprintf(buf, sizeof(buf), "%.17g", cell.value);
                    os << buf;
                } else {
                    os << "n/a";
                }
                os << " pairs=" << cell.pairs << "\n";
            }
        for (int c = 0; c < t.k; ++c) {
            char bufr[32], buff[32];
            std::snprintf(bufr, sizeof(bufr), "%.17g", t.composition_real[c]);
            std::snprintf(buff, sizeof(buff), "%.17g", t.composition_fake[c]);
            os << "composition fit=" << fit << " cluster=" << c << " real_pct=" << bufr
               << " fake_pct=" << buff << "\n";
        }
    };
    emit("real", real_model_block);
    emit("fake", fake_model_block);
    return os.str();
}

}  // namespace sargen
