#include "streamdcim/scheduler.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "streamdcim/errors.hpp"

namespace streamdcim::sched {

namespace {

int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

// Readiness of a produced matrix, by output row range. Consumers needing a
// row range depend on every event of each intersecting entry.
struct RangeEvents {
  BandRange rows;
  std::vector<int> events;
};
using Produced = std::vector<RangeEvents>;

struct SourceInfo {
  const Produced* ranges = nullptr;  // null = available at cycle 0
  bool remote = false;               // transfers hold the TBSN
  bool row_granular = false;         // tile-stream: depend per row range
};

std::string node_tag(const wl::MatrixOp& n, int head) {
  std::ostringstream os;
  os << wl::op_kind_name(n.kind) << ".l" << n.layer << '.' << wl::stream_name(n.stream) << ".h"
     << head;
  return os.str();
}

}  // namespace

cim::Core core_of(wl::OpKind kind) {
  switch (kind) {
    case wl::OpKind::GenQ: return cim::Core::QCim;
    case wl::OpKind::GenK: return cim::Core::KCim;
    default: return cim::Core::TbrCim;
  }
}

Calibration trancim_paper_profile() { return Calibration{20, true}; }

namespace {

class Builder {
 public:
  Builder(const wl::WorkloadGraph* g, Mode mode, const cim::CoreLayout& lay,
          const SchedulerOptions& opt)
      : g_(g), mode_(mode), lay_(lay), opt_(opt) {
    sched_.mode = mode;
    for (auto& core : macro_users_) core.assign(static_cast<size_t>(lay_.macros_per_core), {});
    core_mode_.fill(cim::MacroMode::Normal);
  }

  Schedule build() {
    int current_layer = 0;
    for (const auto& n : g_->nodes) {
      if (n.layer != current_layer) {
        finish_layer(current_layer);
        current_layer = n.layer;
      }
      emit_node(n);
    }
    finish_layer(current_layer);
    return std::move(sched_);
  }

  Schedule build_ws_fragment(const wl::MatrixOp& op) {
    fragment_ = true;
    for (int h = 0; h < op.heads; ++h) emit_ws(op, h);
    return std::move(sched_);
  }

  Schedule build_cf_fragment(const wl::MatrixOp& op) {
    fragment_ = true;
    for (int h = 0; h < op.heads; ++h) emit_cf(op, h);
    return std::move(sched_);
  }

 private:
  // -- placement ------------------------------------------------------------

  int64_t scaled(int64_t raw) const {
    return std::max<int64_t>(1, ceil_div(raw, opt_.calibration.compute_throughput_scale));
  }

  int emit(ScheduleEvent ev) {
    if (mode_ == Mode::NonStream && prev_event_ >= 0 && !fragment_)
      ev.deps.push_back(prev_event_);
    std::sort(ev.deps.begin(), ev.deps.end());
    ev.deps.erase(std::unique(ev.deps.begin(), ev.deps.end()), ev.deps.end());
    ev.id = static_cast<int>(sched_.events.size());
    int64_t start = 0;
    for (int d : ev.deps) start = std::max(start, sched_.events[static_cast<size_t>(d)].end());
    for (const auto& r : ev.resources) {
      auto it = free_at_.find(r.packed());
      if (it != free_at_.end()) start = std::max(start, it->second);
    }
    ev.cycle_start = start;
    for (const auto& r : ev.resources) free_at_[r.packed()] = ev.end();
    if (mode_ == Mode::NonStream) prev_event_ = ev.id;
    sched_.events.push_back(std::move(ev));
    return sched_.events.back().id;
  }

  std::vector<int>& users(cim::Core core, int m) {
    return macro_users_[static_cast<size_t>(core)][static_cast<size_t>(m)];
  }

  static void append_deps(std::vector<int>& deps, const std::vector<int>& more) {
    deps.insert(deps.end(), more.begin(), more.end());
  }

  std::vector<int> deps_for_rows(const SourceInfo& src, BandRange need) const {
    std::vector<int> out;
    if (!src.ranges) return out;
    for (const auto& re : *src.ranges) {
      if (!src.row_granular || (re.rows.begin < need.end && need.begin < re.rows.end))
        append_deps(out, re.events);
    }
    return out;
  }

  std::vector<int> deps_for_all(const SourceInfo& src) const {
    std::vector<int> out;
    if (!src.ranges) return out;
    for (const auto& re : *src.ranges) append_deps(out, re.events);
    return out;
  }

  // -- operand sourcing -----------------------------------------------------

  int producer_of(const wl::MatrixOp& n, wl::OpKind kind) const {
    const wl::Stream s = n.stream;
    const int id = g_->find_node(n.layer, s, kind);
    if (id < 0) throw ScheduleError("missing producer for " + std::string(wl::op_kind_name(kind)));
    return id;
  }

  // Streaming operand (I, Q or P rows).
  SourceInfo resolve_streaming(const wl::MatrixOp& n, int head) {
    if (fragment_) return {};
    switch (n.kind) {
      case wl::OpKind::GenQ:
        return layer_input_source(n.layer, n.stream, core_of(n.kind), n, head);
      case wl::OpKind::GenK:
      case wl::OpKind::GenV:
        return layer_input_source(n.layer, n.token_modality, core_of(n.kind), n, head);
      case wl::OpKind::QKt:
        return produced_source(producer_of(n, wl::OpKind::GenQ), head, core_of(n.kind), n);
      case wl::OpKind::Softmax:
        return produced_source(producer_of(n, wl::OpKind::QKt), head, cim::Core::TbrCim, n);
      case wl::OpKind::PV:
        // P streams from the SFU side; always a TBSN hop outside NonStream.
        return produced_source(producer_of(n, wl::OpKind::Softmax), head, core_of(n.kind), n,
                               /*force_remote=*/true);
    }
    return {};
  }

  // Stationary operand (W, K^T or V tiles).
  SourceInfo resolve_stationary(const wl::MatrixOp& n, int head) {
    if (fragment_) return {};
    switch (n.kind) {
      case wl::OpKind::GenQ:
      case wl::OpKind::GenK:
      case wl::OpKind::GenV:
        return weight_source(n, head);
      case wl::OpKind::QKt:
        return produced_source(producer_of(n, wl::OpKind::GenK), head, core_of(n.kind), n);
      case wl::OpKind::PV:
        return produced_source(producer_of(n, wl::OpKind::GenV), head, core_of(n.kind), n);
      default:
        return {};
    }
  }

  SourceInfo produced_source(int producer, int head, cim::Core consumer_core,
                             const wl::MatrixOp& n, bool force_remote = false) {
    const auto key = std::make_pair(producer, head);
    if (mode_ == Mode::NonStream) {
      // Producer wrote its output off-chip; read it back before use.
      auto& ranges = ns_reread_[std::make_pair(key, n.op_id)];
      if (ranges.empty()) {
        const auto& p = g_->node(producer);
        ScheduleEvent ev;
        ev.kind = EventKind::OffchipRead;
        ev.node_id = n.op_id;
        ev.head = head;
        ev.resources = {res_global(ResKind::Offchip)};
        const int64_t bits = value_bits(p);
        ev.offchip_bits = bits;
        ev.buffer_bits = bits;
        ev.duration = ceil_div(bits, lay_.offchip_bits_per_cycle);
        ev.payload = "read:" + node_tag(p, head);
        append_deps(ev.deps, ns_write_[key]);
        const int id = emit(std::move(ev));
        ranges.push_back({{0, g_->node(producer).output.rows}, {id}});
      }
      SourceInfo s;
      s.ranges = &ranges;
      return s;
    }
    SourceInfo s;
    s.ranges = &produced_.at(key);
    s.remote = force_remote || core_of(g_->node(producer).kind) != consumer_core ||
               g_->node(producer).kind == wl::OpKind::Softmax;
    s.row_granular = mode_ == Mode::TileStream;
    return s;
  }

  SourceInfo weight_source(const wl::MatrixOp& n, int head) {
    if (opt_.calibration.preload_operands) return {};
    const auto key = std::make_pair(n.op_id, head);
    auto it = weight_read_.find(key);
    if (it == weight_read_.end()) {
      ScheduleEvent ev;
      ev.kind = EventKind::OffchipRead;
      ev.node_id = n.op_id;
      ev.head = head;
      ev.resources = {res_global(ResKind::Offchip)};
      const int64_t bits = static_cast<int64_t>(n.stationary.rows) * n.stationary.cols *
                           fx::bit_width(n.precision);
      ev.offchip_bits = bits;
      ev.buffer_bits = bits;
      ev.duration = ceil_div(bits, lay_.offchip_bits_per_cycle);
      ev.payload = "read:w." + node_tag(n, head);
      it = weight_read_.emplace(key, Produced{{{0, n.stationary.rows}, {emit(std::move(ev))}}})
               .first;
    }
    SourceInfo s;
    s.ranges = &it->second;
    return s;
  }

  SourceInfo layer_input_source(int layer, wl::Stream modality, cim::Core consumer_core,
                                const wl::MatrixOp& n, int head) {
    const auto key = std::make_pair(layer, modality == wl::Stream::X ? 0 : 1);
    if (layer == 0 || mode_ == Mode::NonStream) {
      auto it = input_read_.find(key);
      if (it == input_read_.end()) {
        if (layer == 0 && opt_.calibration.preload_operands) {
          it = input_read_.emplace(key, Produced{}).first;
        } else {
          ScheduleEvent ev;
          ev.kind = EventKind::OffchipRead;
          ev.node_id = n.op_id;
          ev.head = head;
          ev.resources = {res_global(ResKind::Offchip)};
          const int rows = g_->tokens_at_layer[static_cast<size_t>(layer)]
                                              [modality == wl::Stream::X ? 0 : 1];
          const int64_t bits = static_cast<int64_t>(rows) * g_->model.d_model *
                               fx::bit_width(g_->precision);
          ev.offchip_bits = bits;
          ev.buffer_bits = bits;
          ev.duration = ceil_div(bits, lay_.offchip_bits_per_cycle);
          ev.payload = std::string("read:i_") + wl::stream_name(modality) + ".l" +
                       std::to_string(layer);
          if (mode_ == Mode::NonStream && layer > 0) {
            // round-trip: written by the previous layer's PV heads
            for (wl::Stream s : {modality}) {
              const int pv = g_->find_node(layer - 1, s, wl::OpKind::PV);
              for (int h = 0; h < g_->node(pv).heads; ++h)
                append_deps(ev.deps, ns_write_[std::make_pair(pv, h)]);
            }
          }
          it = input_read_.emplace(key, Produced{{{0, rows}, {emit(std::move(ev))}}}).first;
        }
      }
      SourceInfo s;
      s.ranges = it->second.empty() ? nullptr : &it->second;
      return s;
    }
    SourceInfo s;
    s.ranges = &layer_input_.at(key);
    s.remote = consumer_core != cim::Core::TbrCim;  // produced by PV on the TBR core
    s.row_granular = mode_ == Mode::TileStream;
    return s;
  }

  int64_t value_bits(const wl::MatrixOp& producer) const {
    const int bw = producer.kind == wl::OpKind::Softmax ? 16 : fx::bit_width(producer.precision);
    return static_cast<int64_t>(producer.output.rows) * producer.output.cols * bw;
  }

  // -- mode reconfiguration --------------------------------------------------

  void ensure_core_mode(cim::Core core, cim::MacroMode m, int node_id) {
    auto& cur = core_mode_[static_cast<size_t>(core)];
    if (cur == m) return;  // reconfigure is a no-op when the mode already matches
    cur = m;
    if (fragment_) return;
    ScheduleEvent ev;
    ev.kind = EventKind::Rewrite;
    ev.node_id = node_id;
    ev.duration = 1;  // mode_config flip
    ev.payload = std::string("reconfig:") + cim::macro_mode_name(m);
    for (int i = 0; i < lay_.macros_per_core; ++i) {
      ev.resources.push_back(macro_w(core, i));
      ev.resources.push_back(macro_i(core, i));
      append_deps(ev.deps, users(core, i));
    }
    const int id = emit(std::move(ev));
    for (int i = 0; i < lay_.macros_per_core; ++i) users(core, i) = {id};
  }

  // -- node emission ----------------------------------------------------------

  void emit_node(const wl::MatrixOp& n) {
    if (n.kind == wl::OpKind::Softmax) {
      for (int h = 0; h < n.heads; ++h) emit_softmax(n, h);
      emit_dtpu(n);
      return;
    }
    const bool cf = mode_ == Mode::TileStream && n.dataflow == wl::DataflowClass::CrossForwarding;
    for (int h = 0; h < n.heads; ++h) {
      if (cf)
        emit_cf(n, h);
      else
        emit_ws(n, h);
      emit_output_write(n, h);
    }
  }

  void emit_output_write(const wl::MatrixOp& n, int head) {
    if (fragment_) return;
    const bool last_layer = n.layer == g_->model.layers - 1;
    const bool ns = mode_ == Mode::NonStream;
    if (!ns && !(last_layer && n.kind == wl::OpKind::PV)) return;
    ScheduleEvent ev;
    ev.kind = EventKind::OffchipWrite;
    ev.node_id = n.op_id;
    ev.head = head;
    ev.resources = {res_global(ResKind::Offchip)};
    const int64_t bits = value_bits(n);
    ev.offchip_bits = bits;
    ev.buffer_bits = bits;
    ev.duration = ceil_div(bits, lay_.offchip_bits_per_cycle);
    ev.payload = "write:" + node_tag(n, head);
    append_deps(ev.deps, deps_for_all(SourceInfo{&produced_.at({n.op_id, head}), false, false}));
    const int id = emit(std::move(ev));
    if (ns) ns_write_[{n.op_id, head}] = {id};
  }

  // Weight-stationary: stationary tiles pinned per pass, streaming rows
  // broadcast to all loaded macros, one band-batched compute per pass.
  void emit_ws(const wl::MatrixOp& n, int head) {
    if (n.streaming.rows == 0 || n.stationary.rows == 0 || n.stationary.cols == 0) return;
    const cim::Core core = core_of(n.kind);
    ensure_core_mode(core, cim::MacroMode::Normal, n.op_id);
    const SourceInfo stream_src = resolve_streaming(n, head);
    const SourceInfo station_src = resolve_stationary(n, head);
    const bool transposed = n.kind == wl::OpKind::QKt;
    const fx::Precision station_prec = n.precision;
    const int stream_bits =
        n.kind == wl::OpKind::PV ? 16 : fx::bit_width(n.precision);  // P is always Q1.14 INT16

    const TilePlan grid = weight_grid(n.stationary.rows, n.stationary.cols, station_prec,
                                      lay_.geometry, lay_.macros_per_core);
    const int mc = lay_.macros_per_core;
    const int passes = grid.pass_count();
    Produced out(static_cast<size_t>(mc));
    for (int b = 0; b < mc; ++b) out[static_cast<size_t>(b)].rows = band_range(n.streaming.rows, b, mc);

    for (int p = 0; p < passes; ++p) {
      std::vector<const PlacedTile*> pass_tiles;
      for (const auto& t : grid.tiles)
        if (t.pass == p) pass_tiles.push_back(&t);

      std::vector<int> pass_rewrites;
      for (const PlacedTile* pt : pass_tiles) {
        ScheduleEvent ev;
        ev.kind = EventKind::Rewrite;
        ev.node_id = n.op_id;
        ev.head = head;
        ev.resources = {macro_w(core, pt->macro), macro_i(core, pt->macro),
                        res_core(ResKind::WritePort, core)};
        if (station_src.remote) ev.resources.push_back(res_global(ResKind::Tbsn));
        const int64_t bits = pt->tile.bits();
        ev.duration = ceil_div(bits, lay_.bus_bits_per_cycle);
        ev.cim_write_bits = bits;
        ev.buffer_bits = bits;
        ev.bus_bits = station_src.remote ? bits : 0;
        ev.payload = "w." + node_tag(n, head) + ".p" + std::to_string(p) + ".m" +
                     std::to_string(pt->macro);
        const BandRange src_rows = transposed
                                       ? BandRange{pt->tile.col0, pt->tile.col0 + pt->tile.cols}
                                       : BandRange{pt->tile.row0, pt->tile.row0 + pt->tile.rows};
        append_deps(ev.deps, deps_for_rows(station_src, src_rows));
        append_deps(ev.deps, users(core, pt->macro));
        const int id = emit(std::move(ev));
        users(core, pt->macro) = {id};
        pass_rewrites.push_back(id);
      }

      // distinct stationary row slices delivered per streamed row
      std::set<int> slice_rows;
      int64_t pass_tile_elems = 0, pass_cols = 0;
      for (const PlacedTile* pt : pass_tiles) {
        slice_rows.insert(pt->tile.row0);
        pass_tile_elems += pt->tile.elements();
        pass_cols += pt->tile.cols;
      }
      int64_t slice_elems = 0;
      for (int r0 : slice_rows) {
        for (const PlacedTile* pt : pass_tiles)
          if (pt->tile.row0 == r0) {
            slice_elems += pt->tile.rows;
            break;
          }
      }
      const auto cycles_per_row = static_cast<int64_t>(slice_rows.size());

      for (int b = 0; b < mc; ++b) {
        const BandRange band = band_range(n.streaming.rows, b, mc);
        if (band.empty()) continue;
        ScheduleEvent ev;
        ev.kind = EventKind::Compute;
        ev.node_id = n.op_id;
        ev.head = head;
        for (const PlacedTile* pt : pass_tiles) ev.resources.push_back(macro_w(core, pt->macro));
        ev.resources.push_back(res_core(ResKind::RowChannel, core));
        if (stream_src.remote) ev.resources.push_back(res_global(ResKind::Tbsn));
        ev.duration = scaled(band.size() * cycles_per_row);
        ev.macs = band.size() * pass_tile_elems;
        const int64_t in_bits = static_cast<int64_t>(band.size()) * slice_elems * stream_bits;
        ev.buffer_bits = in_bits + band.size() * pass_cols * fx::bit_width(n.precision);
        ev.bus_bits = stream_src.remote ? in_bits : 0;
        ev.payload = node_tag(n, head) + ".p" + std::to_string(p) + ".b" + std::to_string(b);
        for (const PlacedTile* pt : pass_tiles) {
          FuncBlock blk;
          blk.r0 = band.begin;
          blk.r1 = band.end;
          blk.c0 = pt->tile.col0;
          blk.c1 = pt->tile.col0 + pt->tile.cols;
          blk.k0 = pt->tile.row0;
          blk.k1 = pt->tile.row0 + pt->tile.rows;
          ev.blocks.push_back(blk);
        }
        append_deps(ev.deps, pass_rewrites);
        append_deps(ev.deps, deps_for_rows(stream_src, band));
        const int id = emit(std::move(ev));
        for (const PlacedTile* pt : pass_tiles) users(core, pt->macro).push_back(id);
        if (p == passes - 1) out[static_cast<size_t>(b)].events = {id};
      }
    }
    if (!fragment_) produced_[{n.op_id, head}] = std::move(out);
  }

  // Mixed-stationary cross-forwarding: macro t holds a row chunk of the
  // streaming matrix and a column chunk of the stationary one; step t
  // broadcasts its rows to the weight halves of macros t..last (full output
  // rows) and its columns to the input halves of macros t+1..last (partial
  // columns), so both residents are reused in both orientations and macro t
  // is release-eligible after its own step.
  void emit_cf(const wl::MatrixOp& n, int head) {
    if (n.streaming.rows == 0 || n.stationary.rows == 0 || n.stationary.cols == 0) return;
    const cim::Core core = core_of(n.kind);
    ensure_core_mode(core, cim::MacroMode::Hybrid, n.op_id);
    const SourceInfo stream_src = resolve_streaming(n, head);
    const SourceInfo station_src = resolve_stationary(n, head);
    const bool transposed = n.kind == wl::OpKind::QKt;
    const int mc = lay_.macros_per_core;
    const int prec_bits = fx::bit_width(n.precision);
    const int vec = lay_.geometry.vector_elems(n.precision);

    const int64_t cap = lay_.geometry.capacity_bits();
    const auto in_region =
        static_cast<int64_t>(std::llround(cap * lay_.hybrid_input_fraction)) / prec_bits;
    const int64_t w_region = cap / prec_bits - in_region;

    const int n_rows = n.streaming.rows;   // output rows
    const int k_dim = n.streaming.cols;    // contraction length
    const int m_cols = n.stationary.cols;  // output cols

    const int band_rows = ceil_div(n_rows, mc);
    const int band_cols = ceil_div(m_cols, mc);
    const int rb = static_cast<int>(std::min<int64_t>(band_rows, std::max<int64_t>(1, in_region / vec)));
    const int cb = static_cast<int>(std::min<int64_t>(band_cols, std::max<int64_t>(1, w_region / vec)));
    const int row_subs = ceil_div(band_rows, rb);
    const int col_subs = ceil_div(band_cols, cb);
    int kc = k_dim < vec ? k_dim
                         : static_cast<int>(std::min<int64_t>(
                               k_dim, std::min(in_region / rb, w_region / cb) / vec * vec));
    if (kc <= 0)
      throw CapacityError("cross-forwarding chunk does not fit the macro regions for " +
                          node_tag(n, head));
    const int k_passes = ceil_div(k_dim, kc);

    // rows held by macro t during row-subpass rs
    const auto chunk_rows = [&](int t, int rs) {
      const BandRange band = band_range(n_rows, t, mc);
      const int begin = std::min(band.end, band.begin + rs * rb);
      return BandRange{begin, std::min(band.end, begin + rb)};
    };
    const auto chunk_cols = [&](int t, int cs) {
      const BandRange band = band_range(m_cols, t, mc);
      const int begin = std::min(band.end, band.begin + cs * cb);
      return BandRange{begin, std::min(band.end, begin + cb)};
    };

    Produced out;
    for (int rs = 0; rs < row_subs; ++rs) {
      std::vector<std::vector<int>> chunk_done(static_cast<size_t>(mc));
      for (int cs = 0; cs < col_subs; ++cs) {
        for (int kp = 0; kp < k_passes; ++kp) {
          const int k0 = kp * kc;
          const int k1 = std::min(k_dim, k0 + kc);
          const int klen = k1 - k0;
          const int64_t kvecs = ceil_div(klen, vec);

          // load this round's row chunks (input halves) and column chunks
          // (weight halves)
          std::vector<int> round_rw_i(static_cast<size_t>(mc), -1),
              round_rw_w(static_cast<size_t>(mc), -1);
          for (int t = 0; t < mc; ++t) {
            const BandRange rows = chunk_rows(t, rs);
            if (!rows.empty()) {
              ScheduleEvent ev;
              ev.kind = EventKind::Rewrite;
              ev.node_id = n.op_id;
              ev.head = head;
              ev.resources = {macro_w(core, t), macro_i(core, t),
                              res_core(ResKind::WritePort, core)};
              if (stream_src.remote) ev.resources.push_back(res_global(ResKind::Tbsn));
              const int64_t bits = static_cast<int64_t>(rows.size()) * klen * prec_bits;
              ev.duration = ceil_div(bits, lay_.bus_bits_per_cycle);
              ev.cim_write_bits = bits;
              ev.buffer_bits = bits;
              ev.bus_bits = stream_src.remote ? bits : 0;
              ev.payload = "i." + node_tag(n, head) + ".t" + std::to_string(t) + ".k" +
                           std::to_string(kp);
              append_deps(ev.deps, deps_for_rows(stream_src, rows));
              append_deps(ev.deps, users(core, t));
              const int id = emit(std::move(ev));
              users(core, t) = {id};
              round_rw_i[static_cast<size_t>(t)] = id;
            }
            const BandRange cols = chunk_cols(t, cs);
            if (!cols.empty()) {
              ScheduleEvent ev;
              ev.kind = EventKind::Rewrite;
              ev.node_id = n.op_id;
              ev.head = head;
              ev.resources = {macro_w(core, t), macro_i(core, t),
                              res_core(ResKind::WritePort, core)};
              if (station_src.remote) ev.resources.push_back(res_global(ResKind::Tbsn));
              const int64_t bits = static_cast<int64_t>(cols.size()) * klen * prec_bits;
              ev.duration = ceil_div(bits, lay_.bus_bits_per_cycle);
              ev.cim_write_bits = bits;
              ev.buffer_bits = bits;
              ev.bus_bits = station_src.remote ? bits : 0;
              ev.payload = "w." + node_tag(n, head) + ".t" + std::to_string(t) + ".k" +
                           std::to_string(kp);
              // K^T column chunks come from the producer's row range `cols`.
              append_deps(ev.deps, deps_for_rows(station_src, transposed ? cols : BandRange{k0, k1}));
              append_deps(ev.deps, users(core, t));
              const int id = emit(std::move(ev));
              users(core, t) = {id};
              round_rw_w[static_cast<size_t>(t)] = id;
            }
          }

          for (int t = 0; t < mc; ++t) {
            const BandRange rows_t = chunk_rows(t, rs);
            // row broadcast: full output rows for chunk t
            if (!rows_t.empty()) {
              ScheduleEvent ev;
              ev.kind = EventKind::Compute;
              ev.node_id = n.op_id;
              ev.head = head;
              ev.resources.push_back(res_core(ResKind::RowChannel, core));
              ev.duration = scaled(static_cast<int64_t>(rows_t.size()) * kvecs);
              ev.payload = node_tag(n, head) + ".row.t" + std::to_string(t) + ".k" +
                           std::to_string(kp);
              if (round_rw_i[static_cast<size_t>(t)] >= 0)
                ev.deps.push_back(round_rw_i[static_cast<size_t>(t)]);
              int64_t out_bits = 0;
              for (int m = t; m < mc; ++m) {
                const BandRange cols_m = chunk_cols(m, cs);
                if (cols_m.empty()) continue;
                ev.resources.push_back(macro_w(core, m));
                if (round_rw_w[static_cast<size_t>(m)] >= 0)
                  ev.deps.push_back(round_rw_w[static_cast<size_t>(m)]);
                FuncBlock blk{rows_t.begin, rows_t.end, cols_m.begin, cols_m.end, k0, k1};
                ev.blocks.push_back(blk);
                ev.macs += static_cast<int64_t>(rows_t.size()) * klen * cols_m.size();
                out_bits += static_cast<int64_t>(rows_t.size()) * cols_m.size() * prec_bits;
              }
              if (!ev.blocks.empty()) {
                ev.buffer_bits = out_bits;  // partial-sum writeback; operands stream from CIM
                const int id = emit(std::move(ev));
                for (int m = t; m < mc; ++m)
                  if (!chunk_cols(m, cs).empty()) users(core, m).push_back(id);
                users(core, t).push_back(id);  // broadcast source
                if (kp == k_passes - 1) chunk_done[static_cast<size_t>(t)].push_back(id);
              }
            }
            // column broadcast: partial columns for chunk t
            const BandRange cols_t = chunk_cols(t, cs);
            if (!cols_t.empty() && t + 1 < mc) {
              ScheduleEvent ev;
              ev.kind = EventKind::Compute;
              ev.node_id = n.op_id;
              ev.head = head;
              ev.resources.push_back(res_core(ResKind::ColChannel, core));
              ev.duration = scaled(static_cast<int64_t>(cols_t.size()) * kvecs);
              ev.payload = node_tag(n, head) + ".col.t" + std::to_string(t) + ".k" +
                           std::to_string(kp);
              if (round_rw_w[static_cast<size_t>(t)] >= 0)
                ev.deps.push_back(round_rw_w[static_cast<size_t>(t)]);
              int64_t out_bits = 0;
              for (int m = t + 1; m < mc; ++m) {
                const BandRange rows_m = chunk_rows(m, rs);
                if (rows_m.empty()) continue;
                ev.resources.push_back(macro_i(core, m));
                if (round_rw_i[static_cast<size_t>(m)] >= 0)
                  ev.deps.push_back(round_rw_i[static_cast<size_t>(m)]);
                FuncBlock blk{rows_m.begin, rows_m.end, cols_t.begin, cols_t.end, k0, k1};
                ev.blocks.push_back(blk);
                ev.macs += static_cast<int64_t>(rows_m.size()) * klen * cols_t.size();
                out_bits += static_cast<int64_t>(rows_m.size()) * cols_t.size() * prec_bits;
              }
              if (!ev.blocks.empty()) {
                ev.buffer_bits = out_bits;
                const int id = emit(std::move(ev));
                for (int m = t + 1; m < mc; ++m)
                  if (!chunk_rows(m, rs).empty()) users(core, m).push_back(id);
                users(core, t).push_back(id);  // broadcast source
                for (int m = t + 1; m < mc; ++m)
                  if (!chunk_rows(m, rs).empty() && kp == k_passes - 1)
                    chunk_done[static_cast<size_t>(m)].push_back(id);
              }
            }
          }
        }
      }
      for (int t = 0; t < mc; ++t) {
        const BandRange rows = chunk_rows(t, rs);
        if (!rows.empty()) out.push_back({rows, chunk_done[static_cast<size_t>(t)]});
      }
    }
    if (!fragment_) produced_[{n.op_id, head}] = std::move(out);
  }

  void emit_softmax(const wl::MatrixOp& n, int head) {
    const SourceInfo src = resolve_streaming(n, head);
    const int mc = lay_.macros_per_core;
    const int bands = mode_ == Mode::TileStream ? mc : 1;
    const int in_bits = fx::bit_width(n.precision);
    Produced out;
    for (int b = 0; b < bands; ++b) {
      const BandRange range = band_range(n.output.rows, b, bands);
      if (range.empty()) continue;
      ScheduleEvent ev;
      ev.kind = EventKind::SfuEval;
      ev.node_id = n.op_id;
      ev.head = head;
      ev.resources = {res_global(ResKind::Sfu)};
      if (mode_ != Mode::NonStream) ev.resources.push_back(res_global(ResKind::Tbsn));
      const int64_t elems = static_cast<int64_t>(range.size()) * n.output.cols;
      ev.duration = std::max<int64_t>(1, ceil_div(elems, lay_.sfu_elems_per_cycle));
      ev.sfu_elems = elems;
      ev.buffer_bits = elems * in_bits + elems * 16;
      ev.bus_bits = mode_ != Mode::NonStream ? elems * in_bits : 0;
      ev.sfu_rows = range;
      ev.payload = node_tag(n, head) + ".b" + std::to_string(b);
      append_deps(ev.deps, deps_for_rows(src, range));
      const int id = emit(std::move(ev));
      out.push_back({range, {id}});
    }
    if (!fragment_) produced_[{n.op_id, head}] = std::move(out);
    if (mode_ == Mode::NonStream)
      emit_output_write(n, head);
  }

  // Token-ranking latency: one column accumulated per cycle, decided once
  // per layer from that layer's full probability matrix (all heads).
  void emit_dtpu(const wl::MatrixOp& n) {
    if (!opt_.emit_dtpu_events || fragment_) return;
    ScheduleEvent ev;
    ev.kind = EventKind::SfuEval;
    ev.node_id = n.op_id;
    ev.head = n.heads - 1;
    ev.resources = {res_global(ResKind::Dtpu)};
    ev.duration = std::max<int64_t>(1, ceil_div(n.output.cols, lay_.dtpu_cols_per_cycle));
    ev.payload = "rank." + std::string(wl::op_kind_name(n.kind)) + ".l" +
                 std::to_string(n.layer) + "." + wl::stream_name(n.stream);
    for (int h = 0; h < n.heads; ++h)
      append_deps(ev.deps, deps_for_all(SourceInfo{&produced_.at({n.op_id, h}), false, false}));
    const int id = emit(std::move(ev));
    dtpu_gate_[{n.layer, n.token_modality == wl::Stream::X ? 0 : 1}] = id;
  }

  // Assemble the next layer's input readiness from this layer's PV output.
  void finish_layer(int layer) {
    if (fragment_ || layer + 1 >= g_->model.layers) return;
    for (wl::Stream s : {wl::Stream::X, wl::Stream::Y}) {
      const int m = s == wl::Stream::X ? 0 : 1;
      const int pv = g_->find_node(layer, s, wl::OpKind::PV);
      if (pv < 0) continue;
      const int next_rows = g_->tokens_at_layer[static_cast<size_t>(layer) + 1][m];
      const bool pruned = next_rows != g_->node(pv).output.rows;
      Produced ranges;
      int heads = g_->node(pv).heads;
      if (!pruned) {
        // head outputs concatenate along columns; row readiness is the
        // union across heads per band
        const auto& first = produced_.at({pv, 0});
        for (size_t i = 0; i < first.size(); ++i) {
          RangeEvents re;
          re.rows = first[i].rows;
          for (int h = 0; h < heads; ++h)
            append_deps(re.events, produced_.at({pv, h})[i].events);
          ranges.push_back(std::move(re));
        }
      } else {
        // token selection needs the whole matrix and the ranking decision
        RangeEvents re;
        re.rows = {0, next_rows};
        for (int h = 0; h < heads; ++h)
          for (const auto& r : produced_.at({pv, h})) append_deps(re.events, r.events);
        ranges.push_back(std::move(re));
      }
      const auto gate = dtpu_gate_.find({layer, m});
      if (gate != dtpu_gate_.end())
        for (auto& r : ranges) r.events.push_back(gate->second);
      layer_input_[{layer + 1, m}] = std::move(ranges);
    }
  }

  const wl::WorkloadGraph* g_;
  Mode mode_;
  cim::CoreLayout lay_;
  SchedulerOptions opt_;
  Schedule sched_;
  bool fragment_ = false;

  std::map<uint32_t, int64_t> free_at_;
  std::array<std::vector<std::vector<int>>, 3> macro_users_;
  std::array<cim::MacroMode, 3> core_mode_;
  int prev_event_ = -1;

  std::map<std::pair<int, int>, Produced> produced_;     // (node, head)
  std::map<std::pair<int, int>, Produced> weight_read_;  // (node, head)
  std::map<std::pair<int, int>, Produced> input_read_;   // (layer, modality)
  std::map<std::pair<int, int>, Produced> layer_input_;  // (layer, modality)
  std::map<std::pair<int, int>, int> dtpu_gate_;         // (layer, modality)
  std::map<std::pair<int, int>, std::vector<int>> ns_write_;  // (node, head)
  std::map<std::pair<std::pair<int, int>, int>, Produced> ns_reread_;
};

}  // namespace

Schedule schedule_workload(const wl::WorkloadGraph& graph, Mode mode,
                           const cim::CoreLayout& layout, const SchedulerOptions& opt) {
  if (!graph.is_acyclic()) throw ScheduleError("workload graph has a cycle");
  if (layout.macros_per_core < 1) throw ConfigError("macros_per_core must be >= 1");
  Builder b(&graph, mode, layout, opt);
  Schedule s = b.build();
  validate_schedule(s);
  return s;
}

Schedule schedule_weight_stationary(const wl::MatrixOp& op, const cim::CoreLayout& layout,
                                    const SchedulerOptions& opt) {
  Builder b(nullptr, Mode::LayerStream, layout, opt);
  Schedule s = b.build_ws_fragment(op);
  validate_schedule(s);
  return s;
}

Schedule schedule_cross_forwarding(const wl::MatrixOp& op, const cim::CoreLayout& layout,
                                   cim::MacroMode macro_mode, const SchedulerOptions& opt) {
  if (macro_mode != cim::MacroMode::Hybrid)
    throw ScheduleError("cross-forwarding requires hybrid-mode macros");
  Builder b(nullptr, Mode::TileStream, layout, opt);
  Schedule s = b.build_cf_fragment(op);
  validate_schedule(s);
  return s;
}

}  // namespace streamdcim::sched
