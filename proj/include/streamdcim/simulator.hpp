#pragma once

#include <functional>
#include <map>
#include <string>

#include "streamdcim/schedule.hpp"
#include "streamdcim/workload.hpp"

namespace streamdcim::sim {

struct SimReport {
  int64_t total_cycles = 0;
  int64_t mac_total = 0;
  int64_t overlap_cycles = 0;  // >=1 macro rewriting while another computes
  int64_t bubble_cycles = 0;   // no compute/SFU activity while work pending
  int64_t rewrite_cycles = 0;  // sum of rewrite-event durations
  int64_t offchip_bits_read = 0;
  int64_t offchip_bits_written = 0;
  int64_t sfu_elements = 0;
  std::map<std::string, int64_t> busy_cycles;  // per resource

  // Flat key=value text block.
  std::string to_text() const;
};

// Deterministic synthetic operands plus the dynamic layer-input chain.
// Weights are keyed by (layer, stream, kind, head) so pruned and unpruned
// graphs, and all execution modes, see identical values.
class OperandSet {
 public:
  OperandSet(const wl::WorkloadGraph& graph, uint64_t seed,
             const wl::KeepSets* keep_sets = nullptr);

  const fx::FixedMatrix& layer_input(int layer, wl::Stream modality);
  bool has_layer_input(int layer, wl::Stream modality) const;
  void set_layer_input(int layer, wl::Stream modality, fx::FixedMatrix m);
  const fx::FixedMatrix& weight(const wl::MatrixOp& node, int head);
  const std::vector<int>* keep_set(int boundary_layer, wl::Stream modality) const;
  uint64_t seed() const { return seed_; }

  // Applies a keep set (or identity) to the concatenated head outputs of a
  // PV node, producing the next layer's input.
  fx::FixedMatrix assemble_next_input(const wl::MatrixOp& pv_node,
                                      const std::vector<const fx::FixedMatrix*>& head_outputs);

 private:
  const wl::WorkloadGraph* graph_;
  uint64_t seed_;
  const wl::KeepSets* keep_sets_;
  std::map<std::pair<int, int>, fx::FixedMatrix> layer_inputs_;  // (layer, modality)
  std::map<std::string, fx::FixedMatrix> weights_;
};

struct SimOptions {
  bool keep_all_outputs = false;
  bool skip_validation = false;
  // Called when a (node, head) output finalizes.
  std::function<void(int node, int head, const fx::FixedMatrix&)> on_output;
};

struct SimResult {
  SimReport report;
  // Retained outputs: all of them under keep_all_outputs, otherwise the
  // final layer's PV matrices.
  std::map<std::pair<int, int>, fx::FixedMatrix> outputs;
};

// Executes the schedule: replays events in planned order (rewrite
// completions commit before dependent compute dispatch by construction of
// end-exclusive intervals), performs the integer arithmetic of Compute and
// SfuEval events, and accumulates timing statistics. Throws ValidationError
// on dependency or resource violations (scheduler bugs), DataflowError when
// an event reads operand rows that are not yet finalized.
SimResult simulate(const sched::Schedule& schedule, const wl::WorkloadGraph& graph,
                   OperandSet& operands, const SimOptions& opt = {});

struct VerifyResult {
  bool ok = true;
  int node = -1, head = -1, row = -1, col = -1;
  int32_t expected = 0, actual = 0;
  std::string describe() const;
};

// Bit-exact comparison of every node output against the serial reference
// chain (independent matmul route, same quantization policy).
VerifyResult verify_functional(const sched::Schedule& schedule, const wl::WorkloadGraph& graph,
                               uint64_t seed, const wl::KeepSets* keep_sets = nullptr);

// (non-overlapped rewrite cycles in the stage) / (stage span cycles).
// Stage = union of the listed nodes' event intervals; rewrite cycles count
// only where no compute or SFU activity runs anywhere.
double rewrite_fraction(const sched::Schedule& schedule, const std::vector<int>& node_ids);

// Serial reference chain over the same operand set; used by verification
// and by the token-ranking pre-pass.
class ReferenceRunner {
 public:
  ReferenceRunner(const wl::WorkloadGraph& graph, uint64_t seed,
                  const wl::KeepSets* keep_sets = nullptr);
  const fx::FixedMatrix& value(int node, int head);

 private:
  void ensure_layer_input(int layer, wl::Stream modality);
  const wl::WorkloadGraph* graph_;
  OperandSet operands_;
  std::map<std::pair<int, int>, fx::FixedMatrix> values_;
};

// Runs the reference chain with progressive pruning, ranking tokens by the
// head-averaged column mean of each layer's probability matrix.
wl::KeepSets compute_keep_sets(const wl::WorkloadGraph& graph, const wl::PruningPolicy& policy,
                               uint64_t seed);

}  // namespace streamdcim::sim
