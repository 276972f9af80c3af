#include "streamdcim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "streamdcim/errors.hpp"

namespace streamdcim::wl {

const char* stream_name(Stream s) { return s == Stream::X ? "x" : "y"; }

const char* op_kind_name(OpKind k) {
  switch (k) {
    case OpKind::GenQ: return "genq";
    case OpKind::GenK: return "genk";
    case OpKind::GenV: return "genv";
    case OpKind::QKt: return "qkt";
    case OpKind::Softmax: return "softmax";
    case OpKind::PV: return "pv";
  }
  return "?";
}

ModelConfig model_config_base() { return ModelConfig{"base", 768, 12, 6, {}}; }
ModelConfig model_config_large() { return ModelConfig{"large", 1024, 16, 6, {}}; }

ModelConfig model_config_by_name(const std::string& name) {
  if (name == "base") return model_config_base();
  if (name == "large") return model_config_large();
  throw ConfigError("unknown model '" + name + "' (expected base|large|custom)");
}

std::vector<int> WorkloadGraph::producers_of(int id) const {
  std::vector<int> out;
  for (const auto& [p, c] : edges)
    if (c == id) out.push_back(p);
  return out;
}

std::vector<int> WorkloadGraph::consumers_of(int id) const {
  std::vector<int> out;
  for (const auto& [p, c] : edges)
    if (p == id) out.push_back(c);
  return out;
}

int64_t WorkloadGraph::total_macs() const {
  int64_t total = 0;
  for (const auto& n : nodes) total += n.macs();
  return total;
}

bool WorkloadGraph::is_acyclic() const {
  // Edges always point from lower to higher op_id by construction; verify.
  for (const auto& [p, c] : edges)
    if (p >= c) return false;
  return true;
}

int WorkloadGraph::find_node(int layer, Stream s, OpKind k) const {
  for (const auto& n : nodes)
    if (n.layer == layer && n.stream == s && n.kind == k) return n.op_id;
  return -1;
}

namespace {

LayerKind kind_of_layer(const ModelConfig& m, int layer) {
  if (m.layer_kinds.empty()) return LayerKind::CrossModal;
  return m.layer_kinds[std::min<size_t>(layer, m.layer_kinds.size() - 1)];
}

void emit_layer_stream(WorkloadGraph& g, int layer, Stream s, int n_self, int n_other,
                       LayerKind lk) {
  const ModelConfig& m = g.model;
  const int d_head = m.d_head();
  const Stream kv_modality = lk == LayerKind::CrossModal ? other(s) : s;
  const int n_q = n_self;
  const int n_kv = lk == LayerKind::CrossModal ? n_other : n_self;

  auto add = [&](OpKind k, Stream token_mod, MatShape streaming, MatShape stationary,
                 MatShape output, DataflowClass df, int shift, int out_fb) {
    MatrixOp op;
    op.op_id = static_cast<int>(g.nodes.size());
    op.kind = k;
    op.stream = s;
    op.token_modality = token_mod;
    op.layer = layer;
    op.heads = m.heads;
    op.dataflow = df;
    op.precision = g.precision;
    op.out_frac_shift = shift;
    op.out_frac_bits = out_fb;
    op.streaming = streaming;
    op.stationary = stationary;
    op.output = output;
    g.nodes.push_back(op);
    return op.op_id;
  };

  const int genq = add(OpKind::GenQ, s, {n_q, m.d_model}, {m.d_model, d_head}, {n_q, d_head},
                       DataflowClass::WeightStationary, 0, 0);
  const int genk = add(OpKind::GenK, kv_modality, {n_kv, m.d_model}, {m.d_model, d_head},
                       {n_kv, d_head}, DataflowClass::WeightStationary, 0, 0);
  const int genv = add(OpKind::GenV, kv_modality, {n_kv, m.d_model}, {m.d_model, d_head},
                       {n_kv, d_head}, DataflowClass::CrossForwarding, 0, 0);
  // QKt streams Q rows against a resident K^T; accumulator keeps frac 0.
  const int qkt = add(OpKind::QKt, kv_modality, {n_q, d_head}, {d_head, n_kv}, {n_q, n_kv},
                      DataflowClass::CrossForwarding, 0, 0);
  const int sm = add(OpKind::Softmax, kv_modality, {n_q, n_kv}, {0, 0}, {n_q, n_kv},
                     DataflowClass::Sfu, 0, fx::kProbFracBits);
  // P (Q1.14) x V (frac 0): shift 14 restores frac 0 output.
  const int pv = add(OpKind::PV, s, {n_q, n_kv}, {n_kv, d_head}, {n_q, d_head},
                     DataflowClass::WeightStationary, fx::kProbFracBits, 0);

  g.edges.emplace_back(genq, qkt);
  g.edges.emplace_back(genk, qkt);
  g.edges.emplace_back(qkt, sm);
  g.edges.emplace_back(sm, pv);
  g.edges.emplace_back(genv, pv);
}

void wire_layer_inputs(WorkloadGraph& g, int layer) {
  if (layer == 0) return;
  // The attention output of layer l-1 stream S is the layer-l input I_S.
  for (Stream s : {Stream::X, Stream::Y}) {
    const int prev_pv = g.find_node(layer - 1, s, OpKind::PV);
    for (const auto& n : g.nodes) {
      if (n.layer != layer) continue;
      const bool consumes_s =
          (n.kind == OpKind::GenQ && n.stream == s) ||
          ((n.kind == OpKind::GenK || n.kind == OpKind::GenV) && n.token_modality == s);
      if (consumes_s) g.edges.emplace_back(prev_pv, n.op_id);
    }
  }
}

}  // namespace

WorkloadGraph build_vilbert_workload(const ModelConfig& model, int n_x, int n_y,
                                     fx::Precision precision) {
  if (n_x < 1 || n_y < 1) throw ConfigError("token counts must be >= 1");
  if (model.d_model <= 0 || model.heads <= 0 || model.layers <= 0 ||
      model.d_model % model.heads != 0)
    throw ConfigError("bad model dims: d_model must be a positive multiple of heads");

  WorkloadGraph g;
  g.model = model;
  g.n_x = n_x;
  g.n_y = n_y;
  g.precision = precision;
  g.tokens_at_layer.assign(model.layers, {n_x, n_y});
  for (int layer = 0; layer < model.layers; ++layer) {
    const LayerKind lk = kind_of_layer(model, layer);
    emit_layer_stream(g, layer, Stream::X, n_x, n_y, lk);
    emit_layer_stream(g, layer, Stream::Y, n_y, n_x, lk);
    wire_layer_inputs(g, layer);
  }
  return g;
}

WorkloadGraph build_qkt_microbench(int n, int d, fx::Precision precision) {
  if (n < 1 || d < 1) throw ConfigError("microbench dims must be >= 1");
  WorkloadGraph g;
  g.model = ModelConfig{"qkt-microbench", d, 1, 1, {LayerKind::SelfModal}};
  g.n_x = n;
  g.n_y = n;
  g.precision = precision;
  g.tokens_at_layer.assign(1, {n, n});

  auto add = [&](OpKind k, MatShape streaming, MatShape stationary, MatShape output) {
    MatrixOp op;
    op.op_id = static_cast<int>(g.nodes.size());
    op.kind = k;
    op.stream = Stream::X;
    op.token_modality = Stream::X;
    op.layer = 0;
    op.heads = 1;
    op.dataflow =
        k == OpKind::QKt ? DataflowClass::CrossForwarding : DataflowClass::WeightStationary;
    op.precision = precision;
    op.streaming = streaming;
    op.stationary = stationary;
    op.output = output;
    g.nodes.push_back(op);
    return op.op_id;
  };
  const int genq = add(OpKind::GenQ, {n, d}, {d, d}, {n, d});
  const int genk = add(OpKind::GenK, {n, d}, {d, d}, {n, d});
  const int qkt = add(OpKind::QKt, {n, d}, {d, n}, {n, n});
  g.edges.emplace_back(genq, qkt);
  g.edges.emplace_back(genk, qkt);
  return g;
}

std::vector<int> select_tokens(const std::vector<fx::Rational>& scores, double keep_ratio) {
  if (scores.empty()) throw ShapeError("select_tokens on empty score vector");
  if (keep_ratio <= 0.0 || keep_ratio > 1.0)
    throw ConfigError("keep_ratio must be in (0, 1]");
  const int n = static_cast<int>(scores.size());
  const int k = std::max<int>(1, static_cast<int>(std::ceil(keep_ratio * n)));
  std::vector<int> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (!fx::rat_equal(scores[a], scores[b])) return fx::rat_less(scores[b], scores[a]);
    return a < b;  // lowest index wins ties
  });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

WorkloadGraph apply_pruning(const WorkloadGraph& graph, const KeepSets& keep_sets) {
  WorkloadGraph g = graph;
  const int layers = graph.model.layers;
  // Token counts entering each layer after applying keep sets at boundaries.
  std::vector<std::vector<int>> counts(layers, {graph.n_x, graph.n_y});
  for (int l = 1; l < layers; ++l) {
    counts[l] = counts[l - 1];
    if (static_cast<size_t>(l - 1) >= keep_sets.size()) continue;
    for (int m = 0; m < 2; ++m) {
      const auto& keep = keep_sets[l - 1][m];
      if (keep.empty()) continue;
      for (int idx : keep)
        if (idx < 0 || idx >= counts[l - 1][m])
          throw ValidationError("keep set index " + std::to_string(idx) +
                                " out of range for layer " + std::to_string(l - 1));
      counts[l][m] = static_cast<int>(keep.size());
    }
  }
  g.tokens_at_layer = counts;

  for (auto& n : g.nodes) {
    const int nq = counts[n.layer][n.stream == Stream::X ? 0 : 1];
    const int nkv = counts[n.layer][n.token_modality == Stream::X ? 0 : 1];
    switch (n.kind) {
      case OpKind::GenQ:
        n.streaming.rows = nq;
        n.output.rows = nq;
        break;
      case OpKind::GenK:
      case OpKind::GenV:
        n.streaming.rows = nkv;
        n.output.rows = nkv;
        break;
      case OpKind::QKt:
        n.streaming.rows = nq;
        n.stationary.cols = nkv;
        n.output = {nq, nkv};
        break;
      case OpKind::Softmax:
        n.streaming = {nq, nkv};
        n.output = {nq, nkv};
        break;
      case OpKind::PV:
        n.streaming = {nq, nkv};
        n.stationary.rows = nkv;
        n.output.rows = nq;
        break;
    }
  }
  return g;
}

}  // namespace streamdcim::wl
