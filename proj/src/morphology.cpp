#include "sargen/morphology.hpp"

#include <cmath>

namespace sargen {

std::vector<int> label_components(const std::vector<std::uint8_t>& binary, int width, int height,
                                  int* n_components) {
    std::vector<int> labels(binary.size(), -1);
    std::vector<std::size_t> stack;
    int next = 0;
    for (std::size_t start = 0; start < binary.size(); ++start) {
        if (!binary[start] || labels[start] >= 0) continue;
        stack.push_back(start);
        labels[start] = next;
        while (!stack.empty()) {
            const std::size_t p = stack.back();
            stack.pop_back();
            const int r = static_cast<int>(p) / width;
            const int c = static_cast<int>(p) % width;
            const int nr[4] = {r - 1, r + 1, r, r};
            const int nc[4] = {c, c, c - 1, c + 1};
            for (int k = 0; k < 4; ++k) {
                if (nr[k] < 0 || nr[k] >= height || nc[k] < 0 || nc[k] >= width) continue;
                const std::size_t q = static_cast<std::size_t>(nr[k]) * width + nc[k];
                if (binary[q] && labels[q] < 0) {
                    labels[q] = next;
                    stack.push_back(q);
                }
            }
        }
        ++next;
    }
    if (n_components) *n_components = next;
    return labels;
}

std::vector<ComponentStats> component_stats(const std::vector<std::uint8_t>& binary, int width,
                                            int height) {
    int n = 0;
    const auto labels = label_components(binary, width, height, &n);
    std::vector<ComponentStats> stats(n);
    std::vector<double> sr(n, 0), sc(n, 0), srr(n, 0), scc(n, 0), src(n, 0);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const int l = labels[static_cast<std::size_t>(r) * width + c];
            if (l < 0) continue;
            auto& s = stats[l];
            if (s.pixels == 0) {
                s.min_r = s.max_r = r;
                s.min_c = s.max_c = c;
            } else {
                s.min_r = std::min(s.min_r, r);
                s.max_r = std::max(s.max_r, r);
                s.min_c = std::min(s.min_c, c);
                s.max_c = std::max(s.max_c, c);
            }
            s.pixels++;
            sr[l] += r;
            sc[l] += c;
            srr[l] += static_cast<double>(r) * r;
            scc[l] += static_cast<double>(c) * c;
            src[l] += static_cast<double>(r) * c;
        }
    }
    for (int l = 0; l < n; ++l) {
        const double m = static_cast<double>(stats[l].pixels);
        const double mr = sr[l] / m, mc = sc[l] / m;
        // covariance of pixel coordinates, +1/12 per axis for pixel extent
        const double vrr = srr[l] / m - mr * mr + 1.0 / 12.0;
        const double vcc = scc[l] / m - mc * mc + 1.0 / 12.0;
        const double vrc = src[l] / m - mr * mc;
        const double tr = vrr + vcc;
        const double det = vrr * vcc - vrc * vrc;
        const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
        const double l1 = tr / 2.0 + disc;
        const double l2 = std::max(1e-12, tr / 2.0 - disc);
        stats[l].elongation = std::sqrt(l1 / l2);
    }
    return stats;
}

}  // namespace sargen
