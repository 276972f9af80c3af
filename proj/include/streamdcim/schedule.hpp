#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "streamdcim/cim.hpp"
#include "streamdcim/tiling.hpp"

namespace streamdcim::sched {

enum class Mode : uint8_t { NonStream, LayerStream, TileStream };
const char* mode_name(Mode m);
Mode mode_from_name(const std::string& s);

enum class EventKind : uint8_t {
  Compute,
  Rewrite,
  StreamIn,
  StreamOut,
  OffchipRead,
  OffchipWrite,
  SfuEval,
};
const char* event_kind_name(EventKind k);

// Exclusive hardware resources. Each macro is split into its weight-region
// and input-region datapaths so the hybrid-mode cross-forwarding pair (row
// and column broadcasts) can legally share a macro while rewrites, which
// claim both halves, exclude all compute on that macro.
enum class ResKind : uint8_t {
  MacroW,      // weight-region datapath of macro (core, index)
  MacroI,      // input-region datapath of macro (core, index)
  WritePort,   // per-core CIM write port, 512 b/cycle
  RowChannel,  // per-core row broadcast channel
  ColChannel,  // per-core column broadcast channel
  Tbsn,        // inter-core pipeline bus
  Offchip,     // off-chip port
  Sfu,
  Dtpu,
};

struct ResourceId {
  ResKind kind = ResKind::Tbsn;
  uint8_t core = 0;   // cim::Core for per-core kinds
  uint8_t index = 0;  // macro index

  uint32_t packed() const {
    return (static_cast<uint32_t>(kind) << 16) | (static_cast<uint32_t>(core) << 8) | index;
  }
  bool operator==(const ResourceId& o) const { return packed() == o.packed(); }
  bool operator<(const ResourceId& o) const { return packed() < o.packed(); }
  bool is_macro() const { return kind == ResKind::MacroW || kind == ResKind::MacroI; }
  std::string str() const;
};

ResourceId macro_w(cim::Core c, int m);
ResourceId macro_i(cim::Core c, int m);
ResourceId res_core(ResKind k, cim::Core c);
ResourceId res_global(ResKind k);

// One block of integer matrix work: out[r, c] += sum_k A[r, k] * B[k, c]
// (B indexed [c, k] when the event's node streams against a transposed
// stationary operand).
struct FuncBlock {
  int r0 = 0, r1 = 0;
  int c0 = 0, c1 = 0;
  int k0 = 0, k1 = 0;
};

struct ScheduleEvent {
  int id = -1;
  int64_t cycle_start = 0;
  int64_t duration = 0;
  EventKind kind = EventKind::Compute;
  std::vector<ResourceId> resources;
  int node_id = -1;
  int head = 0;
  std::string payload;
  std::vector<int> deps;

  // traffic / work accounting
  int64_t macs = 0;
  int64_t cim_write_bits = 0;
  int64_t bus_bits = 0;
  int64_t offchip_bits = 0;
  int64_t buffer_bits = 0;
  int64_t sfu_elems = 0;

  std::vector<FuncBlock> blocks;  // Compute arithmetic
  BandRange sfu_rows;             // SfuEval row slice

  int64_t end() const { return cycle_start + duration; }
};

struct Schedule {
  Mode mode = Mode::NonStream;
  std::vector<ScheduleEvent> events;

  int64_t total_cycles() const {
    int64_t t = 0;
    for (const auto& e : events) t = std::max(t, e.end());
    return t;
  }
  int64_t total_macs() const {
    int64_t t = 0;
    for (const auto& e : events) t += e.macs;
    return t;
  }
  int64_t rewrite_cycles(int node_id = -1) const {
    int64_t t = 0;
    for (const auto& e : events)
      if (e.kind == EventKind::Rewrite && (node_id < 0 || e.node_id == node_id)) t += e.duration;
    return t;
  }
};

// Line-oriented text trace: one event per line
//   <cycle> <duration> <resource[;resource...]> <kind> <payload> deps=<i,j|->
void write_trace(std::ostream& os, const Schedule& s);
std::string trace_string(const Schedule& s);

// Checks dependency ordering (deps end before the event starts, ids point
// backwards) and per-resource exclusivity. Throws ValidationError with the
// first offending event.
void validate_schedule(const Schedule& s);

}  // namespace streamdcim::sched
