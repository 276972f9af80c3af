#pragma once

#include <cstdint>
#include <vector>

#include "streamdcim/cim.hpp"

namespace streamdcim::sched {

enum class Orientation : uint8_t { RowWise, ColumnWise };

struct PlacedTile {
  cim::TileDescriptor tile;
  int macro = 0;  // 0 .. macros_per_core-1
  int pass = 0;   // reload round for multi-pass plans
};

// Exact partition of one matrix across a core's macros.
struct TilePlan {
  int matrix_id = -1;
  Orientation orientation = Orientation::RowWise;
  std::vector<PlacedTile> tiles;

  int64_t total_bits() const {
    int64_t b = 0;
    for (const auto& t : tiles) b += t.tile.bits();
    return b;
  }
  int pass_count() const {
    int p = 0;
    for (const auto& t : tiles) p = std::max(p, t.pass + 1);
    return p;
  }
};

// Cross-forwarding residency plan: row-wise plans split the matrix into
// (macro-count) row bands, column-wise into column bands; bands larger than a
// region are chunked along the other axis in row-major order (multi-pass),
// band t always mapping to macro t.
TilePlan tile_partition(int rows, int cols, fx::Precision precision, Orientation orientation,
                        const cim::MacroGeometry& geom, int macro_count, int64_t region_bits);

// Weight-stationary grid: vector-unit x column-unit tiles in row-major order,
// tile t on macro t mod macro_count; every macro_count tiles form one pass.
TilePlan weight_grid(int rows, int cols, fx::Precision precision, const cim::MacroGeometry& geom,
                     int macro_count);

// Row range [begin, end) of band `index` when `total` rows split into `parts`
// contiguous bands of ceil(total/parts); trailing bands may be empty.
struct BandRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool empty() const { return begin >= end; }
};
BandRange band_range(int total, int index, int parts);

}  // namespace streamdcim::sched
