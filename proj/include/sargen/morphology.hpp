#pragma once

#include <cstdint>
#include <vector>

namespace sargen {

struct ComponentStats {
    std::size_t pixels = 0;
    int min_r = 0, max_r = 0, min_c = 0, max_c = 0;
    /// sqrt of the principal-axis eigenvalue ratio of the pixel scatter;
    /// ~1 for blobs, large for ribbons.
    double elongation = 1.0;
};

/// 4-connected labeling of a binary image. Returns labels in [0,n) per
/// foreground pixel, -1 for background.
std::vector<int> label_components(const std::vector<std::uint8_t>& binary, int width, int height,
                                  int* n_components);

std::vector<ComponentStats> component_stats(const std::vector<std::uint8_t>& binary, int width,
                                            int height);

}  // namespace sargen
