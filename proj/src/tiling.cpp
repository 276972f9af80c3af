#include "streamdcim/tiling.hpp"

#include "streamdcim/errors.hpp"

namespace streamdcim::sched {

BandRange band_range(int total, int index, int parts) {
  const int width = (total + parts - 1) / parts;
  const int begin = std::min(total, index * width);
  const int end = std::min(total, begin + width);
  return {begin, end};
}

TilePlan tile_partition(int rows, int cols, fx::Precision precision, Orientation orientation,
                        const cim::MacroGeometry& geom, int macro_count, int64_t region_bits) {
  if (rows <= 0 || cols <= 0) throw ShapeError("tile_partition on zero-dimension matrix");
  if (macro_count <= 0) throw ConfigError("macro_count must be positive");
  (void)geom;
  TilePlan plan;
  plan.orientation = orientation;
  const int bw = fx::bit_width(precision);
  const int band_axis_total = orientation == Orientation::RowWise ? rows : cols;
  const int other_total = orientation == Orientation::RowWise ? cols : rows;

  for (int b = 0; b < macro_count; ++b) {
    const BandRange band = band_range(band_axis_total, b, macro_count);
    if (band.empty()) continue;
    // Chunk along the other axis so each piece fits the macro region.
    int64_t max_other = region_bits / (static_cast<int64_t>(band.size()) * bw);
    if (max_other <= 0)
      throw CapacityError("band of " + std::to_string(band.size()) +
                          " rows/cols cannot fit a macro region");
    const int chunk = static_cast<int>(std::min<int64_t>(max_other, other_total));
    int pass = 0;
    for (int o = 0; o < other_total; o += chunk, ++pass) {
      const int olen = std::min(chunk, other_total - o);
      cim::TileDescriptor t;
      t.precision = precision;
      if (orientation == Orientation::RowWise) {
        t.row0 = band.begin;
        t.rows = band.size();
        t.col0 = o;
        t.cols = olen;
      } else {
        t.row0 = o;
        t.rows = olen;
        t.col0 = band.begin;
        t.cols = band.size();
      }
      plan.tiles.push_back({t, b, pass});
    }
  }
  return plan;
}

TilePlan weight_grid(int rows, int cols, fx::Precision precision, const cim::MacroGeometry& geom,
                     int macro_count) {
  if (rows <= 0 || cols <= 0) throw ShapeError("weight_grid on zero-dimension matrix");
  TilePlan plan;
  plan.orientation = Orientation::RowWise;
  const int row_unit = geom.vector_elems(precision);
  const int col_unit = geom.cols_per_array;
  int t = 0;
  for (int r = 0; r < rows; r += row_unit)
    for (int c = 0; c < cols; c += col_unit, ++t) {
      cim::TileDescriptor tile;
      tile.precision = precision;
      tile.row0 = r;
      tile.rows = std::min(row_unit, rows - r);
      tile.col0 = c;
      tile.cols = std::min(col_unit, cols - c);
      plan.tiles.push_back({tile, t % macro_count, t / macro_count});
    }
  return plan;
}

}  // namespace streamdcim::sched
