#include "streamdcim/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "streamdcim/errors.hpp"

namespace streamdcim::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

int64_t to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const int64_t r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': bad integer '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': bad number '" + v + "'");
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (models.empty()) throw ConfigError("no workload models configured");
  for (const auto& m : models) {
    if (m.d_model <= 0 || m.heads <= 0 || m.layers <= 0 || m.d_model % m.heads != 0)
      throw ConfigError("model '" + m.name + "': d_model must be a positive multiple of heads");
  }
  if (n_x < 1 || n_y < 1) throw ConfigError("token counts must be >= 1");
  if (modes.empty()) throw ConfigError("at least one execution mode required");
  if (layout.macros_per_core < 1) throw ConfigError("macros_per_core must be >= 1");
  if (layout.bus_bits_per_cycle < 1 || layout.offchip_bits_per_cycle < 1)
    throw ConfigError("channel widths must be >= 1");
  if (layout.hybrid_input_fraction <= 0.0 || layout.hybrid_input_fraction >= 1.0)
    throw ConfigError("hybrid_input_fraction must be in (0, 1)");
  if (calibration.compute_throughput_scale < 1)
    throw ConfigError("compute_throughput_scale must be >= 1");
  for (double r : pruning.keep_ratio)
    if (r <= 0.0 || r > 1.0) throw ConfigError("keep_ratio values must be in (0, 1]");
  if (format != "csv" && format != "text" && format != "both")
    throw ConfigError("format must be csv|text|both");
  coefficients.validate();
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  std::string model_names = "base,large";
  std::optional<int> o_layers, o_d_model, o_heads;
  auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("model")) model_names = *v;
  if (auto v = take("layers")) o_layers = static_cast<int>(to_int("layers", *v));
  if (auto v = take("d_model")) o_d_model = static_cast<int>(to_int("d_model", *v));
  if (auto v = take("heads")) o_heads = static_cast<int>(to_int("heads", *v));
  if (auto v = take("n_x")) cfg.n_x = static_cast<int>(to_int("n_x", *v));
  if (auto v = take("n_y")) cfg.n_y = static_cast<int>(to_int("n_y", *v));
  if (auto v = take("precision")) cfg.precision = fx::precision_from_name(*v);
  if (auto v = take("modes")) {
    cfg.modes.clear();
    for (const auto& m : split(*v, ',')) cfg.modes.push_back(sched::mode_from_name(m));
  }
  if (auto v = take("keep_ratio")) {
    cfg.pruning.keep_ratio.clear();
    for (const auto& r : split(*v, ',')) cfg.pruning.keep_ratio.push_back(to_double("keep_ratio", r));
  }
  if (auto v = take("seed")) cfg.seed = static_cast<uint64_t>(to_int("seed", *v));
  if (auto v = take("verify")) cfg.verify = to_int("verify", *v) != 0;
  if (auto v = take("macros_per_core"))
    cfg.layout.macros_per_core = static_cast<int>(to_int("macros_per_core", *v));
  if (auto v = take("bus_bits_per_cycle"))
    cfg.layout.bus_bits_per_cycle = to_int("bus_bits_per_cycle", *v);
  if (auto v = take("offchip_bits_per_cycle"))
    cfg.layout.offchip_bits_per_cycle = to_int("offchip_bits_per_cycle", *v);
  if (auto v = take("sfu_elems_per_cycle"))
    cfg.layout.sfu_elems_per_cycle = to_int("sfu_elems_per_cycle", *v);
  if (auto v = take("dtpu_cols_per_cycle"))
    cfg.layout.dtpu_cols_per_cycle = to_int("dtpu_cols_per_cycle", *v);
  if (auto v = take("hybrid_input_fraction"))
    cfg.layout.hybrid_input_fraction = to_double("hybrid_input_fraction", *v);
  if (auto v = take("compute_throughput_scale"))
    cfg.calibration.compute_throughput_scale = to_int("compute_throughput_scale", *v);
  if (auto v = take("preload_operands"))
    cfg.calibration.preload_operands = to_int("preload_operands", *v) != 0;
  if (auto v = take("e_mac_int8")) cfg.coefficients.e_mac_int8 = to_double("e_mac_int8", *v);
  if (auto v = take("e_mac_int16")) cfg.coefficients.e_mac_int16 = to_double("e_mac_int16", *v);
  if (auto v = take("e_cim_write")) cfg.coefficients.e_cim_write = to_double("e_cim_write", *v);
  if (auto v = take("e_buffer")) cfg.coefficients.e_buffer = to_double("e_buffer", *v);
  if (auto v = take("e_bus")) cfg.coefficients.e_bus = to_double("e_bus", *v);
  if (auto v = take("e_offchip")) cfg.coefficients.e_offchip = to_double("e_offchip", *v);
  if (auto v = take("e_sfu")) cfg.coefficients.e_sfu = to_double("e_sfu", *v);
  if (auto v = take("leakage")) cfg.coefficients.leakage = to_double("leakage", *v);
  if (auto v = take("area_total_mm2"))
    cfg.static_calibration.area_total_mm2 = to_double("area_total_mm2", *v);
  if (auto v = take("power_total_mw"))
    cfg.static_calibration.power_total_mw = to_double("power_total_mw", *v);
  if (auto v = take("out_dir")) cfg.out_dir = *v;
  if (auto v = take("format")) cfg.format = *v;
  if (!kv.empty()) throw ConfigError("unknown key '" + kv.begin()->first + "'");

  for (const auto& name : split(model_names, ',')) {
    // the dimension table is editable: explicit keys override named defaults
    wl::ModelConfig m =
        name == "custom" ? wl::model_config_base() : wl::model_config_by_name(name);
    m.name = name;
    if (o_layers) m.layers = *o_layers;
    if (o_d_model) m.d_model = *o_d_model;
    if (o_heads) m.heads = *o_heads;
    cfg.models.push_back(m);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string default_config_text() {
  return
      "# streamdcim experiment config v1\n"
      "# desk-scale two-model comparison; dims follow the encoder defaults\n"
      "model = base,large\n"
      "n_x = 256\n"
      "n_y = 256\n"
      "precision = int16\n"
      "modes = nonstream,layerstream,tilestream\n"
      "keep_ratio = 1.0            # per-layer list; < 1.0 enables token pruning\n"
      "seed = 1\n"
      "verify = 1\n"
      "\n"
      "# hardware\n"
      "macros_per_core = 8\n"
      "bus_bits_per_cycle = 512\n"
      "offchip_bits_per_cycle = 512\n"
      "sfu_elems_per_cycle = 32\n"
      "dtpu_cols_per_cycle = 1\n"
      "hybrid_input_fraction = 0.5\n"
      "compute_throughput_scale = 1\n"
      "\n"
      "# energy coefficients (calibration placeholders, arbitrary units)\n"
      "# off-chip : bus : buffer : cim-write = 100 : 4 : 2 : 2 per bit\n"
      "e_offchip = 100.0\n"
      "e_bus = 4.0\n"
      "e_buffer = 2.0\n"
      "e_cim_write = 2.0\n"
      "e_mac_int16 = 1.0\n"
      "e_mac_int8 = 0.5\n"
      "e_sfu = 2.0\n"
      "leakage = 64.0\n"
      "\n"
      "out_dir = .\n"
      "format = both\n";
}

namespace {

std::string workload_name(const wl::ModelConfig& m, const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << m.name << "-n" << cfg.n_x;
  return os.str();
}

double geomean(const std::vector<double>& v) {
  if (v.empty()) return -1.0;
  double logsum = 0.0;
  for (double x : v) logsum += std::log(x);
  return std::exp(logsum / static_cast<double>(v.size()));
}

}  // namespace

ExperimentResults run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  ExperimentResults results;
  for (const auto& model : cfg.models) {
    wl::WorkloadGraph graph =
        wl::build_vilbert_workload(model, cfg.n_x, cfg.n_y, cfg.precision);
    wl::KeepSets keep;
    const bool pruning = cfg.pruning.enabled();
    if (pruning) {
      log << "# ranking tokens for " << model.name << "\n";
      keep = sim::compute_keep_sets(graph, cfg.pruning, cfg.seed);
      graph = wl::apply_pruning(graph, keep);
    }
    sched::SchedulerOptions opt;
    opt.calibration = cfg.calibration;
    opt.emit_dtpu_events = pruning;

    std::map<sched::Mode, RunRow> by_mode;
    for (sched::Mode mode : cfg.modes) {
      const sched::Schedule s = sched::schedule_workload(graph, mode, cfg.layout, opt);
      sim::OperandSet operands(graph, cfg.seed, pruning ? &keep : nullptr);
      sim::SimOptions sim_opt;
      sim_opt.skip_validation = true;  // schedule_workload already validated
      const sim::SimResult r = sim::simulate(s, graph, operands, sim_opt);
      if (cfg.verify) {
        const auto v =
            sim::verify_functional(s, graph, cfg.seed, pruning ? &keep : nullptr);
        if (!v.ok) throw VerificationFailure(v.describe());
      }
      const auto energy = energy::accumulate(s, cfg.coefficients, cfg.precision);
      RunRow row;
      row.workload = workload_name(model, cfg);
      row.mode = sched::mode_name(mode);
      row.cycles = r.report.total_cycles;
      row.energy = energy.total;
      std::vector<int> all_nodes;
      for (const auto& n : graph.nodes) all_nodes.push_back(n.op_id);
      row.rewrite_fraction = sim::rewrite_fraction(s, all_nodes);
      row.overlap_cycles = r.report.overlap_cycles;
      by_mode[mode] = row;
      log << "# " << row.workload << ' ' << row.mode << ": cycles=" << row.cycles
          << " energy=" << static_cast<int64_t>(row.energy)
          << " overlap=" << row.overlap_cycles << "\n";
    }
    const auto ns = by_mode.find(sched::Mode::NonStream);
    const auto ls = by_mode.find(sched::Mode::LayerStream);
    for (sched::Mode mode : cfg.modes) {
      RunRow row = by_mode.at(mode);
      if (ns != by_mode.end()) {
        row.speedup_vs_nonstream =
            static_cast<double>(ns->second.cycles) / static_cast<double>(row.cycles);
        row.energy_ratio_vs_nonstream = ns->second.energy / row.energy;
      }
      if (ls != by_mode.end()) {
        row.speedup_vs_layerstream =
            static_cast<double>(ls->second.cycles) / static_cast<double>(row.cycles);
        row.energy_ratio_vs_layerstream = ls->second.energy / row.energy;
      }
      results.rows.push_back(row);
    }
  }
  // geomean rows over workloads, per mode
  if (cfg.models.size() > 1) {
    for (sched::Mode mode : cfg.modes) {
      const std::string name = sched::mode_name(mode);
      std::vector<double> s_ns, s_ls, e_ns, e_ls;
      for (const auto& r : results.rows) {
        if (r.mode != name) continue;
        if (r.speedup_vs_nonstream > 0) s_ns.push_back(r.speedup_vs_nonstream);
        if (r.speedup_vs_layerstream > 0) s_ls.push_back(r.speedup_vs_layerstream);
        if (r.energy_ratio_vs_nonstream > 0) e_ns.push_back(r.energy_ratio_vs_nonstream);
        if (r.energy_ratio_vs_layerstream > 0) e_ls.push_back(r.energy_ratio_vs_layerstream);
      }
      RunRow row;
      row.workload = "geomean";
      row.mode = name;
      row.cycles = 0;
      row.energy = 0.0;
      row.speedup_vs_nonstream = geomean(s_ns);
      row.speedup_vs_layerstream = geomean(s_ls);
      row.energy_ratio_vs_nonstream = geomean(e_ns);
      row.energy_ratio_vs_layerstream = geomean(e_ls);
      results.rows.push_back(row);
    }
  }
  return results;
}

namespace {

std::string format_row_fields(const RunRow& r, char sep) {
  char buf[64];
  std::ostringstream os;
  os << r.workload << sep << r.mode << sep << r.cycles << sep;
  std::snprintf(buf, sizeof buf, "%.2f", r.energy);
  os << buf << sep;
  auto ratio = [&](double v) {
    if (v <= 0) return std::string("-");
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  os << ratio(r.speedup_vs_nonstream) << sep << ratio(r.speedup_vs_layerstream) << sep
     << ratio(r.energy_ratio_vs_nonstream) << sep << ratio(r.energy_ratio_vs_layerstream) << sep;
  std::snprintf(buf, sizeof buf, "%.4f", r.rewrite_fraction);
  os << buf << sep << r.overlap_cycles;
  return os.str();
}

constexpr const char* kColumns =
    "workload,mode,cycles,energy,speedup_vs_nonstream,speedup_vs_layerstream,"
    "energy_ratio_vs_nonstream,energy_ratio_vs_layerstream,rewrite_fraction,overlap_cycles";

}  // namespace

std::string report_csv(const ExperimentResults& r) {
  std::ostringstream os;
  os << kColumns << '\n';
  for (const auto& row : r.rows) os << format_row_fields(row, ',') << '\n';
  return os.str();
}

std::string report_text(const ExperimentResults& r) {
  std::ostringstream os;
  os << "# streamdcim report v1\n";
  for (const auto& row : r.rows) {
    std::istringstream cols(kColumns);
    std::istringstream vals(format_row_fields(row, ','));
    std::string c, v;
    os << "[row]\n";
    while (std::getline(cols, c, ',') && std::getline(vals, v, ','))
      os << c << '=' << v << '\n';
  }
  os << reference_results_text();
  return os.str();
}

std::vector<std::string> write_reports(const ExperimentResults& r, const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  std::vector<std::string> paths;
  auto write = [&](const std::string& name, const std::string& content) {
    const std::string path = (fs::path(cfg.out_dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write '" + path + "'");
    f << content;
    if (!f) throw IoError("short write to '" + path + "'");
    paths.push_back(path);
  };
  if (cfg.format == "csv" || cfg.format == "both") write("report.csv", report_csv(r));
  if (cfg.format == "text" || cfg.format == "both") write("report.txt", report_text(r));
  return paths;
}

std::string reference_results_text() {
  return
      "# published StreamDCIM chip results, for comparison (not targets at desk scale)\n"
      "# speedup vs non-stream:   base 2.86x, large 2.42x (geomean 2.63x)\n"
      "# speedup vs layer-stream: base 1.25x, large 1.31x (geomean 1.28x)\n"
      "# energy vs non-stream:    base 2.64x, large 1.94x (geomean 2.26x)\n"
      "# energy vs layer-stream:  base 1.27x, large 1.19x (geomean 1.23x)\n";
}

std::string TrancimExample::to_text() const {
  std::ostringstream os;
  char buf[160];
  os << "# dynamic-matmul latency breakdown (K 2048x512 INT8, 512-bit channel)\n";
  os << "macs_genq=" << mac_genq << "\nmacs_genk=" << mac_genk << "\nmacs_qkt=" << mac_qkt
     << '\n';
  os << "qkt_mac_share_exact_2_3=" << (mac_share_exact_two_thirds ? "yes" : "no") << '\n';
  os << "k_rewrite_cycles=" << k_rewrite_cycles << '\n';
  std::snprintf(buf, sizeof buf, "qkt_stage_rewrite_fraction=%.4f\n", qkt_stage_rewrite_fraction);
  os << buf;
  std::snprintf(buf, sizeof buf, "rewrite_share_incl_qk_generation=%.4f\n", full_rewrite_share);
  os << buf;
  os << "total_cycles=" << total_cycles << '\n';
  return os.str();
}

TrancimExample run_trancim_example() {
  const wl::WorkloadGraph g = wl::build_qkt_microbench(2048, 512, fx::Precision::Int8);
  cim::CoreLayout layout;
  sched::SchedulerOptions opt;
  opt.calibration = sched::trancim_paper_profile();
  const sched::Schedule s = sched::schedule_workload(g, sched::Mode::LayerStream, layout, opt);

  TrancimExample ex;
  const int genq = g.find_node(0, wl::Stream::X, wl::OpKind::GenQ);
  const int genk = g.find_node(0, wl::Stream::X, wl::OpKind::GenK);
  const int qkt = g.find_node(0, wl::Stream::X, wl::OpKind::QKt);
  ex.mac_genq = g.node(genq).macs();
  ex.mac_genk = g.node(genk).macs();
  ex.mac_qkt = g.node(qkt).macs();
  // exact rational identity: qkt / (genq + genk + qkt) == 2/3
  ex.mac_share_exact_two_thirds =
      3 * ex.mac_qkt == 2 * (ex.mac_genq + ex.mac_genk + ex.mac_qkt);
  ex.k_rewrite_cycles = s.rewrite_cycles(qkt);
  ex.qkt_stage_rewrite_fraction = sim::rewrite_fraction(s, {qkt});
  ex.full_rewrite_share = sim::rewrite_fraction(s, {genq, genk, qkt});
  ex.total_cycles = s.total_cycles();
  return ex;
}

}  // namespace streamdcim::harness
