#include "streamdcim/energy.hpp"

#include <cmath>
#include <sstream>

#include "streamdcim/errors.hpp"

namespace streamdcim::energy {

void EnergyCoefficients::validate() const {
  const double coeffs[] = {e_mac_int8, e_mac_int16, e_cim_write, e_buffer,
                           e_bus,      e_offchip,   e_sfu,       leakage};
  for (double c : coeffs)
    if (c < 0.0) throw ConfigError("energy coefficients must be non-negative");
  if (!(e_offchip > e_bus && e_bus > e_buffer))
    throw ConfigError("coefficient ordering violated: need e_offchip > e_bus > e_buffer");
}

double event_energy(const ScheduleEvent& e, const EnergyCoefficients& c,
                    fx::Precision mac_precision) {
  return static_cast<double>(e.macs) * c.e_mac(mac_precision) +
         static_cast<double>(e.cim_write_bits) * c.e_cim_write +
         static_cast<double>(e.buffer_bits) * c.e_buffer +
         static_cast<double>(e.bus_bits) * c.e_bus +
         static_cast<double>(e.offchip_bits) * c.e_offchip +
         static_cast<double>(e.sfu_elems) * c.e_sfu;
}

EnergyBreakdown accumulate(const Schedule& schedule, const EnergyCoefficients& coeffs,
                           fx::Precision mac_precision) {
  coeffs.validate();
  EnergyBreakdown bd;
  for (const auto& e : schedule.events) {
    const double v = event_energy(e, coeffs, mac_precision);
    bd.by_kind[event_kind_name(e.kind)] += v;
    bd.total += v;
  }
  const double leak = coeffs.leakage * static_cast<double>(schedule.total_cycles());
  bd.by_kind["leakage"] += leak;
  bd.total += leak;
  return bd;
}

std::string StaticReport::to_text() const {
  std::ostringstream os;
  char line[160];
  os << "component area_mm2 area_frac power_mw power_frac\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%s %.4f %.4f %.4f %.4f\n", r.component.c_str(), r.area_mm2,
                  r.area_fraction, r.power_mw, r.power_fraction);
    os << line;
  }
  std::snprintf(line, sizeof line, "total %.2f 1.0 %.2f 1.0\n", area_total_mm2, power_total_mw);
  os << line;
  return os.str();
}

StaticReport report_static(const cim::CoreLayout& layout, const StaticCalibration& calib) {
  const double macro_scale = static_cast<double>(layout.macros_per_core) / 8.0;
  struct Item {
    std::string name;
    double weight;
  };
  const auto make_items = [&](double scale) {
    return std::vector<Item>{
        {"qcim", calib.cim_core_weight * scale},
        {"kcim", calib.cim_core_weight * scale},
        {"tbrcim", calib.cim_core_weight * scale},
        {"buffers", calib.buffer_weight},
        {"tbsn", calib.tbsn_weight},
        {"sfu_dtpu", calib.sfu_dtpu_weight},
        {"control", calib.control_weight},
    };
  };
  const auto sum_of = [](const std::vector<Item>& v) {
    double s = 0.0;
    for (const auto& i : v) s += i.weight;
    return s;
  };
  const std::vector<Item> items = make_items(macro_scale);
  const double weight_sum = sum_of(items);
  const double default_sum = sum_of(make_items(1.0));

  StaticReport rep;
  // Totals stay anchored at the calibrated chip numbers for the default
  // geometry (ratio is exactly 1 there); scaled geometries grow them with
  // the extra CIM weight.
  rep.area_total_mm2 = calib.area_total_mm2 * (weight_sum / default_sum);
  rep.power_total_mw = calib.power_total_mw * (weight_sum / default_sum);
  for (const auto& i : items) {
    StaticReportRow row;
    row.component = i.name;
    row.area_fraction = i.weight / weight_sum;
    row.power_fraction = i.weight / weight_sum;
    row.area_mm2 = rep.area_total_mm2 * row.area_fraction;
    row.power_mw = rep.power_total_mw * row.power_fraction;
    rep.rows.push_back(row);
  }
  return rep;
}

}  // namespace streamdcim::energy
