#include "streamdcim/simulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "streamdcim/errors.hpp"
#include "streamdcim/prng.hpp"
#include "streamdcim/scheduler.hpp"

namespace streamdcim::sim {

namespace {

fx::FixedMatrix synth_matrix(uint64_t seed, const std::string& tag, int rows, int cols,
                             fx::Precision prec, int magnitude) {
  SplitMix64 rng(seed ^ stable_hash(tag.c_str()));
  fx::FixedMatrix m(rows, cols, prec, 0);
  for (auto& v : m.data) v = rng.next_in(-magnitude, magnitude);
  return m;
}

std::string weight_tag(const wl::MatrixOp& n, int head) {
  std::ostringstream os;
  os << "w." << wl::op_kind_name(n.kind) << ".l" << n.layer << '.' << wl::stream_name(n.stream)
     << ".h" << head;
  return os.str();
}

double softmax_scale(const wl::WorkloadGraph& g) {
  return 1.0 / std::sqrt(static_cast<double>(g.model.d_head()));
}

// Operand roles of each node, resolved against the graph.
struct NodeSources {
  int a_node = -1;  // -1: layer input (a_layer/a_modality), else producer node
  int a_layer = 0;
  wl::Stream a_modality = wl::Stream::X;
  int b_node = -1;  // -1: weight matrix
  bool b_transposed = false;
};

NodeSources sources_of(const wl::WorkloadGraph& g, const wl::MatrixOp& n) {
  NodeSources s;
  switch (n.kind) {
    case wl::OpKind::GenQ:
      s.a_layer = n.layer;
      s.a_modality = n.stream;
      break;
    case wl::OpKind::GenK:
    case wl::OpKind::GenV:
      s.a_layer = n.layer;
      s.a_modality = n.token_modality;
      break;
    case wl::OpKind::QKt:
      s.a_node = g.find_node(n.layer, n.stream, wl::OpKind::GenQ);
      s.b_node = g.find_node(n.layer, n.stream, wl::OpKind::GenK);
      s.b_transposed = true;
      break;
    case wl::OpKind::Softmax:
      s.a_node = g.find_node(n.layer, n.stream, wl::OpKind::QKt);
      break;
    case wl::OpKind::PV:
      s.a_node = g.find_node(n.layer, n.stream, wl::OpKind::Softmax);
      s.b_node = g.find_node(n.layer, n.stream, wl::OpKind::GenV);
      break;
  }
  return s;
}

}  // namespace

OperandSet::OperandSet(const wl::WorkloadGraph& graph, uint64_t seed,
                       const wl::KeepSets* keep_sets)
    : graph_(&graph), seed_(seed), keep_sets_(keep_sets) {}

const fx::FixedMatrix& OperandSet::layer_input(int layer, wl::Stream modality) {
  const auto key = std::make_pair(layer, modality == wl::Stream::X ? 0 : 1);
  auto it = layer_inputs_.find(key);
  if (it != layer_inputs_.end()) return it->second;
  if (layer != 0)
    throw DataflowError("layer input " + std::to_string(layer) + "." +
                        wl::stream_name(modality) + " not produced yet");
  const int rows = modality == wl::Stream::X ? graph_->n_x : graph_->n_y;
  auto m = synth_matrix(seed_, std::string("i.") + wl::stream_name(modality), rows,
                        graph_->model.d_model, graph_->precision, 24);
  return layer_inputs_.emplace(key, std::move(m)).first->second;
}

bool OperandSet::has_layer_input(int layer, wl::Stream modality) const {
  return layer == 0 ||
         layer_inputs_.count({layer, modality == wl::Stream::X ? 0 : 1}) > 0;
}

void OperandSet::set_layer_input(int layer, wl::Stream modality, fx::FixedMatrix m) {
  layer_inputs_[{layer, modality == wl::Stream::X ? 0 : 1}] = std::move(m);
}

const fx::FixedMatrix& OperandSet::weight(const wl::MatrixOp& node, int head) {
  const std::string tag = weight_tag(node, head);
  auto it = weights_.find(tag);
  if (it != weights_.end()) return it->second;
  auto m = synth_matrix(seed_, tag, node.stationary.rows, node.stationary.cols, node.precision, 8);
  return weights_.emplace(tag, std::move(m)).first->second;
}

const std::vector<int>* OperandSet::keep_set(int boundary_layer, wl::Stream modality) const {
  if (!keep_sets_ || static_cast<size_t>(boundary_layer) >= keep_sets_->size()) return nullptr;
  const auto& k = (*keep_sets_)[static_cast<size_t>(boundary_layer)]
                               [modality == wl::Stream::X ? 0 : 1];
  return k.empty() ? nullptr : &k;
}

fx::FixedMatrix OperandSet::assemble_next_input(
    const wl::MatrixOp& pv, const std::vector<const fx::FixedMatrix*>& head_outputs) {
  const int rows = pv.output.rows;
  const int d_head = pv.output.cols;
  const auto* keep = keep_set(pv.layer, pv.stream);
  const int kept = keep ? static_cast<int>(keep->size()) : rows;
  fx::FixedMatrix out(kept, d_head * static_cast<int>(head_outputs.size()), pv.precision, 0);
  for (int r = 0; r < kept; ++r) {
    const int src = keep ? (*keep)[static_cast<size_t>(r)] : r;
    for (size_t h = 0; h < head_outputs.size(); ++h)
      for (int c = 0; c < d_head; ++c)
        out.at(r, static_cast<int>(h) * d_head + c) = head_outputs[h]->at(src, c);
  }
  return out;
}

std::string SimReport::to_text() const {
  std::ostringstream os;
  os << "total_cycles=" << total_cycles << '\n'
     << "mac_total=" << mac_total << '\n'
     << "overlap_cycles=" << overlap_cycles << '\n'
     << "bubble_cycles=" << bubble_cycles << '\n'
     << "rewrite_cycles=" << rewrite_cycles << '\n'
     << "offchip_bits_read=" << offchip_bits_read << '\n'
     << "offchip_bits_written=" << offchip_bits_written << '\n'
     << "sfu_elements=" << sfu_elements << '\n';
  for (const auto& [k, v] : busy_cycles) os << "busy." << k << '=' << v << '\n';
  return os.str();
}

std::string VerifyResult::describe() const {
  if (ok) return "functional check: pass";
  std::ostringstream os;
  os << "functional mismatch at node " << node << " head " << head << " element (" << row << ','
     << col << "): expected " << expected << " got " << actual;
  return os.str();
}

namespace {

// Per (node, head) in-flight accumulation state.
struct Staging {
  std::vector<int64_t> acc;           // rows x cols
  std::vector<int64_t> row_covered;   // covered (col x inner) area per row
  fx::FixedMatrix out;
  std::vector<char> row_done;
  int rows = 0, cols = 0;
  int64_t full_area = 0;
  int rows_remaining = 0;
};

}  // namespace

SimResult simulate(const sched::Schedule& schedule, const wl::WorkloadGraph& graph,
                   OperandSet& operands, const SimOptions& opt) {
  if (!opt.skip_validation) sched::validate_schedule(schedule);

  SimResult result;
  std::map<std::pair<int, int>, Staging> staging;
  std::map<std::pair<int, int>, fx::FixedMatrix> outputs;
  std::map<std::pair<int, int>, int> events_left;
  std::map<std::pair<int, int>, int> readers_left;
  std::map<int, int> heads_left;
  const double scale = softmax_scale(graph);

  for (const auto& e : schedule.events) {
    if (e.node_id < 0) continue;
    const bool works = (e.kind == sched::EventKind::Compute && !e.blocks.empty()) ||
                       (e.kind == sched::EventKind::SfuEval && !e.sfu_rows.empty());
    if (works) events_left[{e.node_id, e.head}]++;
  }
  for (const auto& n : graph.nodes) heads_left[n.op_id] = n.heads;

  // Readers per produced matrix: graph consumers plus the layer-input
  // assembly hop for PV nodes.
  for (const auto& n : graph.nodes) {
    if (n.kind == wl::OpKind::Softmax) continue;
    const NodeSources s = sources_of(graph, n);
    for (int h = 0; h < n.heads; ++h) {
      if (s.a_node >= 0) readers_left[{s.a_node, h}]++;
      if (s.b_node >= 0) readers_left[{s.b_node, h}]++;
    }
  }
  for (const auto& n : graph.nodes) {
    if (n.kind != wl::OpKind::Softmax) continue;
    const NodeSources s = sources_of(graph, n);
    for (int h = 0; h < n.heads; ++h) readers_left[{s.a_node, h}]++;
  }
  for (const auto& n : graph.nodes)
    if (n.kind == wl::OpKind::PV && n.layer + 1 < graph.model.layers)
      for (int h = 0; h < n.heads; ++h) readers_left[{n.op_id, h}]++;

  auto staging_of = [&](const wl::MatrixOp& n, int head) -> Staging& {
    auto it = staging.find({n.op_id, head});
    if (it == staging.end()) {
      Staging st;
      st.rows = n.output.rows;
      st.cols = n.output.cols;
      st.full_area = static_cast<int64_t>(st.cols) *
                     (n.kind == wl::OpKind::Softmax ? 1 : n.streaming.cols);
      st.acc.assign(static_cast<size_t>(st.rows) * st.cols, 0);
      st.row_covered.assign(static_cast<size_t>(st.rows), 0);
      st.row_done.assign(static_cast<size_t>(st.rows), 0);
      st.rows_remaining = st.rows;
      st.out = fx::FixedMatrix(st.rows, st.cols, n.kind == wl::OpKind::Softmax
                                                     ? fx::Precision::Int16
                                                     : n.precision,
                               n.out_frac_bits);
      it = staging.emplace(std::make_pair(n.op_id, head), std::move(st)).first;
    }
    return it->second;
  };

  auto release = [&](int node, int head) {
    auto it = readers_left.find({node, head});
    if (it == readers_left.end()) return;
    if (--it->second <= 0 && !opt.keep_all_outputs) outputs.erase({node, head});
  };

  auto matrix_of = [&](int node, int head) -> const fx::FixedMatrix& {
    auto it = outputs.find({node, head});
    if (it == outputs.end())
      throw DataflowError("operand of node " + std::to_string(node) +
                          " consumed before it finalized");
    return it->second;
  };

  // Finalize handling: publish, notify, assemble layer inputs and drop dead
  // operands.
  auto complete_node_head = [&](const wl::MatrixOp& n, int head) {
    auto key = std::make_pair(n.op_id, head);
    auto& st = staging.at(key);
    outputs[key] = std::move(st.out);
    staging.erase(key);
    if (opt.on_output) opt.on_output(n.op_id, head, outputs.at(key));
    const NodeSources s = sources_of(graph, n);
    if (s.a_node >= 0) release(s.a_node, head);
    if (s.b_node >= 0) release(s.b_node, head);
    // All heads of a PV node done: build the next layer's input.
    if (--heads_left.at(n.op_id) == 0 && n.kind == wl::OpKind::PV &&
        n.layer + 1 < graph.model.layers) {
      std::vector<const fx::FixedMatrix*> heads;
      for (int h = 0; h < n.heads; ++h) heads.push_back(&matrix_of(n.op_id, h));
      operands.set_layer_input(n.layer + 1, n.stream, operands.assemble_next_input(n, heads));
      for (int h = 0; h < n.heads; ++h) release(n.op_id, h);
    }
  };

  // Execute events in planned order. Deterministic: integer accumulation is
  // order-independent and ties are broken by event id.
  std::vector<int> order(schedule.events.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return schedule.events[static_cast<size_t>(a)].cycle_start <
           schedule.events[static_cast<size_t>(b)].cycle_start;
  });

  for (int idx : order) {
    const auto& e = schedule.events[static_cast<size_t>(idx)];
    if (e.node_id < 0) continue;
    const auto& n = graph.node(e.node_id);

    if (e.kind == sched::EventKind::Compute && !e.blocks.empty()) {
      const NodeSources s = sources_of(graph, n);
      const fx::FixedMatrix& a = s.a_node >= 0 ? matrix_of(s.a_node, e.head)
                                               : operands.layer_input(s.a_layer, s.a_modality);
      const fx::FixedMatrix& b =
          s.b_node >= 0 ? matrix_of(s.b_node, e.head) : operands.weight(n, e.head);
      auto& st = staging_of(n, e.head);
      for (const auto& blk : e.blocks) {
        const int64_t area = static_cast<int64_t>(blk.c1 - blk.c0) * (blk.k1 - blk.k0);
#pragma omp parallel for schedule(static) if ((blk.r1 - blk.r0) * area > 1 << 15)
        for (int r = blk.r0; r < blk.r1; ++r) {
          int64_t* acc_row = st.acc.data() + static_cast<size_t>(r) * st.cols;
          for (int c = blk.c0; c < blk.c1; ++c) {
            int64_t acc = 0;
            if (s.b_transposed) {
              for (int k = blk.k0; k < blk.k1; ++k)
                acc += static_cast<int64_t>(a.at(r, k)) * b.at(c, k);
            } else {
              for (int k = blk.k0; k < blk.k1; ++k)
                acc += static_cast<int64_t>(a.at(r, k)) * b.at(k, c);
            }
            acc_row[c] += acc;
          }
        }
        for (int r = blk.r0; r < blk.r1; ++r) st.row_covered[static_cast<size_t>(r)] += area;
      }
      // Requantize rows whose full (cols x inner) area is covered.
      for (const auto& blk : e.blocks) {
        for (int r = blk.r0; r < blk.r1; ++r) {
          auto ur = static_cast<size_t>(r);
          if (st.row_covered[ur] > st.full_area)
            throw DataflowError("double-covered output row " + std::to_string(r) + " in node " +
                                std::to_string(n.op_id));
          if (st.row_done[ur] || st.row_covered[ur] != st.full_area) continue;
          for (int c = 0; c < st.cols; ++c)
            st.out.at(r, c) = fx::requantize(st.acc[ur * st.cols + c], n.out_frac_shift,
                                             st.out.precision);
          st.row_done[ur] = 1;
          --st.rows_remaining;
        }
      }
      if (--events_left.at({e.node_id, e.head}) == 0) {
        if (staging.at({e.node_id, e.head}).rows_remaining != 0)
          throw DataflowError("node " + std::to_string(n.op_id) +
                              " finished its events with incomplete rows");
        complete_node_head(n, e.head);
      }
    } else if (e.kind == sched::EventKind::SfuEval && n.kind == wl::OpKind::Softmax &&
               !e.sfu_rows.empty()) {
      const NodeSources s = sources_of(graph, n);
      const fx::FixedMatrix& a = matrix_of(s.a_node, e.head);
      fx::FixedMatrix slice(e.sfu_rows.size(), a.cols, a.precision, a.frac_bits);
      for (int r = 0; r < slice.rows; ++r)
        for (int c = 0; c < a.cols; ++c) slice.at(r, c) = a.at(e.sfu_rows.begin + r, c);
      const fx::ProbMatrix p = fx::softmax_rows(slice, scale);
      auto& st = staging_of(n, e.head);
      for (int r = 0; r < p.rows; ++r) {
        const auto ur = static_cast<size_t>(e.sfu_rows.begin + r);
        for (int c = 0; c < p.cols; ++c) st.out.at(e.sfu_rows.begin + r, c) = p.at(r, c);
        st.row_done[ur] = 1;
        st.row_covered[ur] = st.full_area;
        --st.rows_remaining;
      }
      if (--events_left.at({e.node_id, e.head}) == 0) {
        if (staging.at({e.node_id, e.head}).rows_remaining != 0)
          throw DataflowError("softmax node finished with incomplete rows");
        complete_node_head(n, e.head);
      }
    }
  }

  // Timing statistics by boundary sweep.
  SimReport& rep = result.report;
  rep.total_cycles = schedule.total_cycles();
  rep.mac_total = schedule.total_macs();
  for (const auto& e : schedule.events) {
    if (e.duration == 0) continue;
    for (const auto& r : e.resources) rep.busy_cycles[r.str()] += e.duration;
    switch (e.kind) {
      case sched::EventKind::Rewrite: rep.rewrite_cycles += e.duration; break;
      case sched::EventKind::OffchipRead: rep.offchip_bits_read += e.offchip_bits; break;
      case sched::EventKind::OffchipWrite: rep.offchip_bits_written += e.offchip_bits; break;
      default: break;
    }
    rep.sfu_elements += e.sfu_elems;
  }
  {
    // [macro compute, macro rewrite, any compute incl. SFU]
    std::map<int64_t, std::array<int, 3>> deltas;
    for (const auto& e : schedule.events) {
      if (e.duration == 0) continue;
      bool macro_res = false;
      for (const auto& r : e.resources) macro_res |= r.is_macro();
      const bool macro_compute = e.kind == sched::EventKind::Compute && macro_res;
      const bool macro_rewrite = e.kind == sched::EventKind::Rewrite && macro_res;
      const bool any_compute =
          e.kind == sched::EventKind::Compute || e.kind == sched::EventKind::SfuEval;
      if (!macro_compute && !macro_rewrite && !any_compute) continue;
      auto& d0 = deltas[e.cycle_start];
      auto& d1 = deltas[e.end()];
      if (macro_compute) { d0[0]++; d1[0]--; }
      if (macro_rewrite) { d0[1]++; d1[1]--; }
      if (any_compute) { d0[2]++; d1[2]--; }
    }
    int mc = 0, mr = 0, ac = 0;
    int64_t prev = 0, busy_any = 0;
    for (const auto& [t, d] : deltas) {
      if (mc > 0 && mr > 0) rep.overlap_cycles += t - prev;
      if (ac > 0) busy_any += t - prev;
      prev = t;
      mc += d[0];
      mr += d[1];
      ac += d[2];
    }
    rep.bubble_cycles = rep.total_cycles - busy_any;
  }

  if (opt.keep_all_outputs) {
    result.outputs = std::move(outputs);
  } else {
    for (auto& [key, m] : outputs)
      if (graph.node(key.first).kind == wl::OpKind::PV &&
          graph.node(key.first).layer == graph.model.layers - 1)
        result.outputs.emplace(key, std::move(m));
  }
  return result;
}

ReferenceRunner::ReferenceRunner(const wl::WorkloadGraph& graph, uint64_t seed,
                                 const wl::KeepSets* keep_sets)
    : graph_(&graph), operands_(graph, seed, keep_sets) {}

void ReferenceRunner::ensure_layer_input(int layer, wl::Stream modality) {
  if (operands_.has_layer_input(layer, modality)) return;
  const int pv = graph_->find_node(layer - 1, modality, wl::OpKind::PV);
  const auto& n = graph_->node(pv);
  std::vector<const fx::FixedMatrix*> heads;
  for (int h = 0; h < n.heads; ++h) heads.push_back(&value(pv, h));
  operands_.set_layer_input(layer, modality, operands_.assemble_next_input(n, heads));
}

const fx::FixedMatrix& ReferenceRunner::value(int node, int head) {
  const auto key = std::make_pair(node, head);
  auto it = values_.find(key);
  if (it != values_.end()) return it->second;
  const auto& n = graph_->node(node);
  const fx::MatmulPolicy policy{n.precision, n.out_frac_shift, n.out_frac_bits};
  fx::FixedMatrix v;
  switch (n.kind) {
    case wl::OpKind::GenQ:
      ensure_layer_input(n.layer, n.stream);
      v = fx::ref::matmul(operands_.layer_input(n.layer, n.stream), operands_.weight(n, head),
                          policy);
      break;
    case wl::OpKind::GenK:
    case wl::OpKind::GenV:
      ensure_layer_input(n.layer, n.token_modality);
      v = fx::ref::matmul(operands_.layer_input(n.layer, n.token_modality),
                          operands_.weight(n, head), policy);
      break;
    case wl::OpKind::QKt: {
      const NodeSources s = sources_of(*graph_, n);
      v = fx::ref::matmul(value(s.a_node, head), fx::transpose(value(s.b_node, head)), policy);
      break;
    }
    case wl::OpKind::Softmax: {
      const NodeSources s = sources_of(*graph_, n);
      v = fx::softmax_rows(value(s.a_node, head), softmax_scale(*graph_));
      break;
    }
    case wl::OpKind::PV: {
      const NodeSources s = sources_of(*graph_, n);
      v = fx::ref::matmul(value(s.a_node, head), value(s.b_node, head), policy);
      break;
    }
  }
  return values_.emplace(key, std::move(v)).first->second;
}

VerifyResult verify_functional(const sched::Schedule& schedule, const wl::WorkloadGraph& graph,
                               uint64_t seed, const wl::KeepSets* keep_sets) {
  ReferenceRunner ref(graph, seed, keep_sets);
  OperandSet operands(graph, seed, keep_sets);
  VerifyResult res;
  SimOptions opt;
  opt.on_output = [&](int node, int head, const fx::FixedMatrix& got) {
    if (!res.ok) return;
    const fx::FixedMatrix& want = ref.value(node, head);
    if (!got.same_shape(want)) {
      res = {false, node, head, -1, -1, 0, 0};
      return;
    }
    for (int r = 0; r < got.rows && res.ok; ++r)
      for (int c = 0; c < got.cols; ++c)
        if (got.at(r, c) != want.at(r, c)) {
          res = {false, node, head, r, c, want.at(r, c), got.at(r, c)};
          return;
        }
  };
  simulate(schedule, graph, operands, opt);
  return res;
}

double rewrite_fraction(const sched::Schedule& schedule, const std::vector<int>& node_ids) {
  const std::set<int> stage(node_ids.begin(), node_ids.end());
  std::map<int64_t, std::array<int, 3>> deltas;  // [stage-any, stage-rewrite, global-compute]
  bool any = false;
  for (const auto& e : schedule.events) {
    if (e.duration == 0) continue;
    const bool in_stage = stage.count(e.node_id) > 0;
    const bool compute =
        e.kind == sched::EventKind::Compute || e.kind == sched::EventKind::SfuEval;
    if (in_stage) {
      any = true;
      deltas[e.cycle_start][0]++;
      deltas[e.end()][0]--;
      if (e.kind == sched::EventKind::Rewrite) {
        deltas[e.cycle_start][1]++;
        deltas[e.end()][1]--;
      }
    }
    if (compute) {
      deltas[e.cycle_start][2]++;
      deltas[e.end()][2]--;
    }
  }
  if (!any) throw ValidationError("rewrite_fraction on an empty stage");
  int64_t span = 0, rewrite_only = 0;
  int a = 0, rw = 0, cp = 0;
  int64_t prev = 0;
  for (const auto& [t, d] : deltas) {
    if (a > 0) span += t - prev;
    if (rw > 0 && cp == 0) rewrite_only += t - prev;
    prev = t;
    a += d[0];
    rw += d[1];
    cp += d[2];
  }
  if (span == 0) throw ValidationError("rewrite_fraction stage has zero span");
  return static_cast<double>(rewrite_only) / static_cast<double>(span);
}

wl::KeepSets compute_keep_sets(const wl::WorkloadGraph& graph, const wl::PruningPolicy& policy,
                               uint64_t seed) {
  wl::KeepSets keep(static_cast<size_t>(graph.model.layers), {{}, {}});
  if (!policy.enabled()) return keep;
  // Progressive: layer l is evaluated on the tokens kept so far, then its
  // probability matrices rank the key-side tokens for the next boundary.
  wl::WorkloadGraph pruned = graph;
  for (int l = 0; l < graph.model.layers; ++l) {
    pruned = wl::apply_pruning(graph, keep);
    ReferenceRunner ref(pruned, seed, &keep);
    for (wl::Stream s : {wl::Stream::X, wl::Stream::Y}) {
      const int sm = pruned.find_node(l, s, wl::OpKind::Softmax);
      if (sm < 0) continue;
      const auto& n = pruned.node(sm);
      const double ratio = policy.ratio_for_layer(l);
      if (ratio >= 1.0 || l + 1 >= graph.model.layers) continue;
      // Head-averaged column mean: per-head denominators are identical, so
      // summing numerators preserves the exact ranking.
      std::vector<fx::Rational> scores(static_cast<size_t>(n.output.cols), {0, 1});
      for (int h = 0; h < n.heads; ++h) {
        const auto cols = fx::column_mean(ref.value(sm, h));
        for (size_t j = 0; j < cols.size(); ++j) {
          scores[j].num += cols[j].num;
          scores[j].den = cols[j].den;
        }
      }
      keep[static_cast<size_t>(l)][n.token_modality == wl::Stream::X ? 0 : 1] =
          wl::select_tokens(scores, ratio);
    }
  }
  return keep;
}

}  // namespace streamdcim::sim
