#include "streamdcim/cim.hpp"

#include <cmath>

#include "streamdcim/errors.hpp"

namespace streamdcim::cim {

const char* macro_mode_name(MacroMode m) { return m == MacroMode::Hybrid ? "hybrid" : "normal"; }

const char* macro_status_name(MacroStatus s) {
  switch (s) {
    case MacroStatus::Idle: return "idle";
    case MacroStatus::Computing: return "computing";
    case MacroStatus::Rewriting: return "rewriting";
  }
  return "?";
}

const char* core_name(Core c) {
  switch (c) {
    case Core::QCim: return "qcim";
    case Core::KCim: return "kcim";
    case Core::TbrCim: return "tbr";
  }
  return "?";
}

int64_t MacroState::region_capacity_bits(Region r) const {
  const int64_t cap = geom_.capacity_bits();
  if (mode_ == MacroMode::Normal)
    return r == Region::Weight ? cap : 0;
  const auto input_bits = static_cast<int64_t>(std::llround(cap * hybrid_input_fraction_));
  return r == Region::Input ? input_bits : cap - input_bits;
}

int MacroState::configure_mode(MacroMode m) {
  if (status_ != MacroStatus::Idle)
    throw ScheduleError(std::string("configure_mode on a ") + macro_status_name(status_) +
                        " macro");
  if (m == mode_) return 0;
  mode_ = m;
  input_tile_.reset();
  weight_tile_.reset();
  return 1;
}

int64_t MacroState::write_tile(Region r, const TileDescriptor& tile, int64_t bits_per_cycle) {
  if (status_ == MacroStatus::Computing)
    throw ScheduleError("write_tile on a computing macro");
  if (bits_per_cycle <= 0) throw ConfigError("bits_per_cycle must be positive");
  if (tile.bits() > region_capacity_bits(r))
    throw CapacityError("tile of " + std::to_string(tile.bits()) + " bits exceeds region of " +
                        std::to_string(region_capacity_bits(r)) + " bits");
  (r == Region::Input ? input_tile_ : weight_tile_) = tile;
  return (tile.bits() + bits_per_cycle - 1) / bits_per_cycle;
}

int64_t MacroState::compute_step(Region r, int64_t cycles) {
  if (status_ == MacroStatus::Rewriting)
    throw ScheduleError("compute_step on a rewriting macro");
  const auto& tile = resident(r);
  if (!tile) throw DataflowError("compute_step with no resident operand tile");
  const int64_t added =
      cycles * static_cast<int64_t>(geom_.vector_elems(tile->precision)) * geom_.cols_per_array;
  macs_ += added;
  return added;
}

}  // namespace streamdcim::cim
