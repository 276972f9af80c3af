#pragma once

#include <map>
#include <string>
#include <vector>

#include "streamdcim/schedule.hpp"

namespace streamdcim::energy {

// Per-event energy coefficients (arbitrary units). The ratios are declared
// calibration placeholders; the default ordering keeps off-chip traffic the
// dominant cost: off-chip : bus : buffer : CIM-write = 100 : 4 : 2 : 2 per
// bit, 1 unit per INT16 MAC.
struct EnergyCoefficients {
  double e_mac_int8 = 0.5;
  double e_mac_int16 = 1.0;
  double e_cim_write = 2.0;  // per bit
  double e_buffer = 2.0;     // per bit
  double e_bus = 4.0;        // per bit
  double e_offchip = 100.0;  // per bit
  double e_sfu = 2.0;        // per element
  double leakage = 64.0;     // per cycle

  double e_mac(fx::Precision p) const {
    return p == fx::Precision::Int8 ? e_mac_int8 : e_mac_int16;
  }
  // off-chip must cost more than the bus, the bus more than a buffer access
  void validate() const;
};

struct EnergyBreakdown {
  std::map<std::string, double> by_kind;  // event kind -> energy (plus "leakage")
  double total = 0.0;
};

// Event-based accounting: each event contributes its traffic and MAC counts
// times the coefficients; leakage scales with the schedule's cycle count.
// Additive over log partitions and linear in the coefficients.
EnergyBreakdown accumulate(const Schedule& schedule, const EnergyCoefficients& coeffs,
                           fx::Precision mac_precision);

// Energy of a single event (no leakage), for additivity checks.
double event_energy(const ScheduleEvent& e, const EnergyCoefficients& coeffs,
                    fx::Precision mac_precision);

struct StaticReportRow {
  std::string component;
  double area_mm2 = 0.0;
  double power_mw = 0.0;
  double area_fraction = 0.0;
  double power_fraction = 0.0;
};

// Static area/power calibration: totals anchored to the published chip
// numbers, per-component weights configurable placeholders. The CIM-core
// entries scale linearly with macro count.
struct StaticCalibration {
  double area_total_mm2 = 12.10;
  double power_total_mw = 122.77;
  // default per-component weights at 8 macros/core (fractions of the total)
  double cim_core_weight = 0.22;  // each of the three cores
  double buffer_weight = 0.18;
  double tbsn_weight = 0.06;
  double sfu_dtpu_weight = 0.06;
  double control_weight = 0.04;
};

struct StaticReport {
  std::vector<StaticReportRow> rows;
  double area_total_mm2 = 0.0;
  double power_total_mw = 0.0;
  std::string to_text() const;
};

StaticReport report_static(const cim::CoreLayout& layout, const StaticCalibration& calib = {});

}  // namespace streamdcim::energy
