#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "streamdcim/fixedpoint.hpp"

namespace streamdcim::cim {

// One digital CIM macro: eight 4x16b x128 SRAM-CIM arrays, 8 KB total.
struct MacroGeometry {
  int arrays_per_macro = 8;
  int rows_per_array = 4;
  int word_bits = 16;
  int cols_per_array = 128;

  int64_t capacity_bits() const {
    return static_cast<int64_t>(arrays_per_macro) * rows_per_array * cols_per_array * word_bits;
  }
  // Input-vector elements consumed per cycle by a full macro (32 at INT16;
  // INT8 packs two operands per word, doubling the effective length).
  int vector_elems(fx::Precision p) const {
    const int v = arrays_per_macro * rows_per_array;
    return p == fx::Precision::Int8 ? 2 * v : v;
  }
  int64_t macs_per_cycle(fx::Precision p) const {
    return static_cast<int64_t>(vector_elems(p)) * cols_per_array;
  }
};

enum class MacroMode : uint8_t { Hybrid, Normal };  // mode_config = 0 / 1
enum class MacroStatus : uint8_t { Idle, Computing, Rewriting };
enum class Region : uint8_t { Input, Weight };

const char* macro_mode_name(MacroMode m);
const char* macro_status_name(MacroStatus s);

struct TileDescriptor {
  int matrix_id = -1;
  int row0 = 0, rows = 0;
  int col0 = 0, cols = 0;
  fx::Precision precision = fx::Precision::Int16;

  int64_t elements() const { return static_cast<int64_t>(rows) * cols; }
  int64_t bits() const { return elements() * fx::bit_width(precision); }
};

// Mode, residency and per-cycle status of a single macro. Owned by one
// simulation instance; mutated only through the cycle loop.
class MacroState {
 public:
  explicit MacroState(MacroGeometry geom = {}, MacroMode mode = MacroMode::Normal,
                      double hybrid_input_fraction = 0.5)
      : geom_(geom), mode_(mode), hybrid_input_fraction_(hybrid_input_fraction) {}

  MacroMode mode() const { return mode_; }
  MacroStatus status() const { return status_; }
  const MacroGeometry& geometry() const { return geom_; }

  int64_t region_capacity_bits(Region r) const;

  // Reconfiguration invalidates resident tiles; costs 1 cycle, 0 if a no-op.
  // Rejects busy macros.
  int configure_mode(MacroMode m);

  // Loads a tile into a region; returns the cycle count ceil(bits / bw).
  // Rejects capacity overflow and compute/rewrite conflicts.
  int64_t write_tile(Region r, const TileDescriptor& tile, int64_t bits_per_cycle);

  // One broadcast step against the resident tile of `r`: consumes an input
  // vector per cycle for `cycles` cycles; returns the MAC count added.
  int64_t compute_step(Region r, int64_t cycles = 1);

  const std::optional<TileDescriptor>& resident(Region r) const {
    return r == Region::Input ? input_tile_ : weight_tile_;
  }
  void release(Region r) { (r == Region::Input ? input_tile_ : weight_tile_).reset(); }

  void set_status(MacroStatus s) { status_ = s; }
  int64_t mac_count() const { return macs_; }

 private:
  MacroGeometry geom_;
  MacroMode mode_;
  double hybrid_input_fraction_;
  MacroStatus status_ = MacroStatus::Idle;
  std::optional<TileDescriptor> input_tile_;
  std::optional<TileDescriptor> weight_tile_;
  int64_t macs_ = 0;
};

enum class Core : uint8_t { QCim, KCim, TbrCim };
const char* core_name(Core c);

// Three-core layout plus shared transport-channel widths.
struct CoreLayout {
  MacroGeometry geometry;
  int macros_per_core = 8;
  int64_t input_buffer_bytes = 64 * 1024;
  int64_t weight_buffer_bytes = 64 * 1024;
  int64_t output_buffer_bytes = 64 * 1024;
  int64_t bus_bits_per_cycle = 512;      // TBSN / core write ports
  int64_t offchip_bits_per_cycle = 512;  // off-chip port
  int64_t sfu_elems_per_cycle = 32;      // softmax throughput, one bus word of INT16
  int64_t dtpu_cols_per_cycle = 1;
  double hybrid_input_fraction = 0.5;

  int64_t core_capacity_bits() const { return geometry.capacity_bits() * macros_per_core; }
};

}  // namespace streamdcim::cim
