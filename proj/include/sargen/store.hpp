#pragma once

#include <string>

#include "sargen/tiles.hpp"

namespace sargen {

/// Tile dataset persistence.
///
/// Layout (diffable, no external dependencies):
///   <dir>/manifest.txt    one header block + one line per tile:
///                         "tile <id> <geo_id> <row> <col> <split> <has_flood> <checksum>"
///   <dir>/tiles/<id>.bin  row-major 8-bit pixels
///   <dir>/tiles/<id>.mask optional sibling, same shape, values {0,1}
///
/// Concurrent readers are safe; writing assumes a single writer.
void save_dataset(const Dataset& dataset, const std::string& dir);

/// Loads a dataset; verifies version, shapes and per-tile checksums and
/// names the offending record on failure.
Dataset load_dataset(const std::string& dir);

}  // namespace sargen
