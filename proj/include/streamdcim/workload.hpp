#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "streamdcim/fixedpoint.hpp"

namespace streamdcim::wl {

enum class Stream : uint8_t { X, Y };
enum class LayerKind : uint8_t { SelfModal, CrossModal };
enum class OpKind : uint8_t { GenQ, GenK, GenV, QKt, Softmax, PV };
enum class DataflowClass : uint8_t { WeightStationary, CrossForwarding, Sfu };

const char* stream_name(Stream s);
const char* op_kind_name(OpKind k);

inline Stream other(Stream s) { return s == Stream::X ? Stream::Y : Stream::X; }

struct MatShape {
  int rows = 0;
  int cols = 0;
};

// Per-head attention layer geometry for one stream.
struct AttentionLayerSpec {
  Stream stream = Stream::X;
  LayerKind kind = LayerKind::CrossModal;
  int n_q = 0;   // query-side token count
  int n_kv = 0;  // key/value-side token count
  int d_model = 0;
  int d_head = 0;
  int heads = 0;
  fx::Precision precision = fx::Precision::Int16;

  bool valid() const {
    return n_q > 0 && n_kv > 0 && d_model > 0 && d_head > 0 && heads > 0 &&
           d_model == heads * d_head;
  }
};

// One matrix operation of the attention stack. Shapes are per head; the
// scheduler loops heads sequentially over the same hardware.
struct MatrixOp {
  int op_id = -1;
  OpKind kind = OpKind::GenQ;
  Stream stream = Stream::X;          // owning encoder stream
  Stream token_modality = Stream::X;  // whose tokens the output rows/cols represent
  int layer = 0;
  int heads = 1;
  DataflowClass dataflow = DataflowClass::WeightStationary;
  fx::Precision precision = fx::Precision::Int16;
  int out_frac_shift = 0;  // requantization shift applied to this node's accumulator
  int out_frac_bits = 0;

  MatShape streaming;    // operand streamed row-by-row (I, Q, P)
  MatShape stationary;   // CIM-resident operand (W, K^T, V)
  MatShape output;

  int64_t macs_per_head() const {
    return static_cast<int64_t>(streaming.rows) * streaming.cols * stationary.cols;
  }
  int64_t macs() const { return kind == OpKind::Softmax ? 0 : macs_per_head() * heads; }
  int64_t softmax_elements() const {
    return kind == OpKind::Softmax ? static_cast<int64_t>(output.rows) * output.cols * heads : 0;
  }
};

struct ModelConfig {
  std::string name = "base";
  int d_model = 768;
  int heads = 12;
  int layers = 6;  // cross-modal co-attention layer count
  std::vector<LayerKind> layer_kinds;  // defaults to all CrossModal
  int d_head() const { return d_model / heads; }
};

// ViLBERT-style dimension defaults; editable via harness config.
ModelConfig model_config_base();
ModelConfig model_config_large();
ModelConfig model_config_by_name(const std::string& name);

struct WorkloadGraph {
  ModelConfig model;
  int n_x = 0;
  int n_y = 0;
  fx::Precision precision = fx::Precision::Int16;
  std::vector<MatrixOp> nodes;
  std::vector<std::pair<int, int>> edges;  // producer -> consumer
  // token counts entering each layer, after pruning: [layer][modality]
  std::vector<std::vector<int>> tokens_at_layer;

  const MatrixOp& node(int id) const { return nodes[static_cast<size_t>(id)]; }
  std::vector<int> producers_of(int id) const;
  std::vector<int> consumers_of(int id) const;
  int64_t total_macs() const;
  bool is_acyclic() const;
  // Node ids in emission order (already topological by construction).
  int find_node(int layer, Stream s, OpKind k) const;
};

// Two-stream encoder stack: per layer and per stream the six-node attention
// subgraph; cross-modal layers take K/V from the other modality.
WorkloadGraph build_vilbert_workload(const ModelConfig& model, int n_x, int n_y,
                                     fx::Precision precision);

// Dynamic-matmul microbenchmark: GenQ, GenK and QKt only, single head,
// d_model = d_head = d. Used by the analytic latency-breakdown scenario.
WorkloadGraph build_qkt_microbench(int n, int d, fx::Precision precision);

struct PruningPolicy {
  // keep_ratio per layer boundary (applied to tokens entering layer l+1).
  std::vector<double> keep_ratio;
  double ratio_for_layer(int layer) const {
    if (keep_ratio.empty()) return 1.0;
    return keep_ratio[std::min<size_t>(layer, keep_ratio.size() - 1)];
  }
  bool enabled() const {
    for (double r : keep_ratio)
      if (r < 1.0) return true;
    return false;
  }
};

// Indices of the k = ceil(keep_ratio * n) largest scores, ties broken toward
// the lower index, returned sorted ascending.
std::vector<int> select_tokens(const std::vector<fx::Rational>& scores, double keep_ratio);

// Keep sets per layer boundary per modality: keep_sets[l][m] holds indices
// (into the layer-l token list) surviving into layer l+1. Empty inner vector
// means "keep all".
using KeepSets = std::vector<std::vector<std::vector<int>>>;

// Shrinks downstream shapes to the kept token counts; MAC totals scale by
// (k_q * k_kv) / (n_q * n_kv) on affected QKt nodes.
WorkloadGraph apply_pruning(const WorkloadGraph& graph, const KeepSets& keep_sets);

}  // namespace streamdcim::wl
