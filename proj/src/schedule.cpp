#include "streamdcim/schedule.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include "streamdcim/errors.hpp"

namespace streamdcim::sched {

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::NonStream: return "nonstream";
    case Mode::LayerStream: return "layerstream";
    case Mode::TileStream: return "tilestream";
  }
  return "?";
}

Mode mode_from_name(const std::string& s) {
  if (s == "nonstream") return Mode::NonStream;
  if (s == "layerstream") return Mode::LayerStream;
  if (s == "tilestream") return Mode::TileStream;
  throw ConfigError("unknown mode '" + s + "'");
}

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::Compute: return "compute";
    case EventKind::Rewrite: return "rewrite";
    case EventKind::StreamIn: return "streamin";
    case EventKind::StreamOut: return "streamout";
    case EventKind::OffchipRead: return "offchip_read";
    case EventKind::OffchipWrite: return "offchip_write";
    case EventKind::SfuEval: return "sfu";
  }
  return "?";
}

std::string ResourceId::str() const {
  const auto core_str = [&] { return std::string(cim::core_name(static_cast<cim::Core>(core))); };
  switch (kind) {
    case ResKind::MacroW: return core_str() + ".m" + std::to_string(index) + ".w";
    case ResKind::MacroI: return core_str() + ".m" + std::to_string(index) + ".i";
    case ResKind::WritePort: return core_str() + ".wport";
    case ResKind::RowChannel: return core_str() + ".rowch";
    case ResKind::ColChannel: return core_str() + ".colch";
    case ResKind::Tbsn: return "tbsn";
    case ResKind::Offchip: return "offchip";
    case ResKind::Sfu: return "sfu";
    case ResKind::Dtpu: return "dtpu";
  }
  return "?";
}

ResourceId macro_w(cim::Core c, int m) {
  return {ResKind::MacroW, static_cast<uint8_t>(c), static_cast<uint8_t>(m)};
}
ResourceId macro_i(cim::Core c, int m) {
  return {ResKind::MacroI, static_cast<uint8_t>(c), static_cast<uint8_t>(m)};
}
ResourceId res_core(ResKind k, cim::Core c) { return {k, static_cast<uint8_t>(c), 0}; }
ResourceId res_global(ResKind k) { return {k, 0, 0}; }

void write_trace(std::ostream& os, const Schedule& s) {
  for (const auto& e : s.events) {
    os << e.cycle_start << ' ' << e.duration << ' ';
    for (size_t i = 0; i < e.resources.size(); ++i) {
      if (i) os << ';';
      os << e.resources[i].str();
    }
    if (e.resources.empty()) os << '-';
    os << ' ' << event_kind_name(e.kind) << ' ' << (e.payload.empty() ? "-" : e.payload)
       << " deps=";
    if (e.deps.empty()) {
      os << '-';
    } else {
      for (size_t i = 0; i < e.deps.size(); ++i) {
        if (i) os << ',';
        os << e.deps[i];
      }
    }
    os << '\n';
  }
}

std::string trace_string(const Schedule& s) {
  std::ostringstream os;
  write_trace(os, s);
  return os.str();
}

void validate_schedule(const Schedule& s) {
  for (size_t i = 0; i < s.events.size(); ++i) {
    const auto& e = s.events[i];
    if (e.id != static_cast<int>(i)) throw ValidationError("event ids must be dense and ordered");
    if (e.cycle_start < 0 || e.duration < 0)
      throw ValidationError("negative time on event " + std::to_string(e.id));
    for (int d : e.deps) {
      if (d < 0 || d >= e.id)
        throw ValidationError("event " + std::to_string(e.id) + " dep " + std::to_string(d) +
                              " does not precede it");
      if (s.events[d].end() > e.cycle_start)
        throw ValidationError("event " + std::to_string(e.id) + " starts at " +
                              std::to_string(e.cycle_start) + " before dep " + std::to_string(d) +
                              " ends at " + std::to_string(s.events[d].end()));
    }
  }
  // Per-resource exclusivity.
  std::map<uint32_t, std::vector<std::pair<int64_t, int64_t>>> intervals;
  std::map<uint32_t, std::string> names;
  for (const auto& e : s.events) {
    if (e.duration == 0) continue;
    for (const auto& r : e.resources) {
      intervals[r.packed()].emplace_back(e.cycle_start, e.end());
      names.emplace(r.packed(), r.str());
    }
  }
  for (auto& [res, iv] : intervals) {
    std::sort(iv.begin(), iv.end());
    for (size_t i = 1; i < iv.size(); ++i)
      if (iv[i].first < iv[i - 1].second)
        throw ValidationError("resource " + names[res] + " double-booked at cycle " +
                              std::to_string(iv[i].first));
  }
}

}  // namespace streamdcim::sched
