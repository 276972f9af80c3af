#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "streamdcim/energy.hpp"
#include "streamdcim/scheduler.hpp"
#include "streamdcim/simulator.hpp"

namespace streamdcim::harness {

// Flat key=value experiment configuration ('#' comments, one pair per line).
struct ExperimentConfig {
  std::vector<wl::ModelConfig> models;  // one or more workloads
  int n_x = 256;
  int n_y = 256;
  fx::Precision precision = fx::Precision::Int16;
  std::vector<sched::Mode> modes = {sched::Mode::NonStream, sched::Mode::LayerStream,
                                    sched::Mode::TileStream};
  wl::PruningPolicy pruning;
  uint64_t seed = 1;
  bool verify = true;

  cim::CoreLayout layout;
  sched::Calibration calibration;
  energy::EnergyCoefficients coefficients;
  energy::StaticCalibration static_calibration;

  std::string out_dir = ".";
  std::string format = "both";  // csv | text | both

  void validate() const;
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// The default configuration as a commented key=value file.
std::string default_config_text();

struct RunRow {
  std::string workload;
  std::string mode;
  int64_t cycles = 0;
  double energy = 0.0;
  // ratios vs baseline modes; negative = baseline not in the run
  double speedup_vs_nonstream = -1.0;
  double speedup_vs_layerstream = -1.0;
  double energy_ratio_vs_nonstream = -1.0;
  double energy_ratio_vs_layerstream = -1.0;
  double rewrite_fraction = 0.0;
  int64_t overlap_cycles = 0;
};

struct ExperimentResults {
  std::vector<RunRow> rows;  // per-workload rows then geomean rows
};

// Thrown when the simulated outputs disagree with the reference chain.
struct VerificationFailure : std::runtime_error {
  explicit VerificationFailure(const std::string& m)
      : std::runtime_error("verification failure: " + m) {}
};

// For each workload x mode: build graph (pruning pre-pass when enabled),
// schedule, simulate, verify bit-exactness, account energy. Appends geomean
// ratio rows when several workloads run.
ExperimentResults run_experiment(const ExperimentConfig& cfg, std::ostream& log);

std::string report_csv(const ExperimentResults& r);
std::string report_text(const ExperimentResults& r);
// Writes report.csv / report.txt per the configured format; returns paths.
std::vector<std::string> write_reports(const ExperimentResults& r, const ExperimentConfig& cfg);

// Published chip results printed alongside simulated ratios for comparison.
std::string reference_results_text();

struct TrancimExample {
  int64_t mac_genq = 0, mac_genk = 0, mac_qkt = 0;
  bool mac_share_exact_two_thirds = false;
  int64_t k_rewrite_cycles = 0;
  double qkt_stage_rewrite_fraction = 0.0;
  double full_rewrite_share = 0.0;
  int64_t total_cycles = 0;
  std::string to_text() const;
};

// The dynamic-matmul analysis scenario: K of 2048x512 INT8 behind a 512-bit
// channel, layer-granular streaming, frozen effective-throughput profile.
TrancimExample run_trancim_example();

}  // namespace streamdcim::harness
