#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kinlab/characteristics.hpp"
#include "kinlab/config.hpp"

namespace kinlab {

/// Outcome of one subcommand. `passed` is false when a check ran to
/// completion and failed (hypothesis item, energy bound, missing s*);
/// errors are thrown instead.
struct PipelineResult {
  bool passed = true;
  std::string message;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<std::string> outputs;
};

PipelineResult run_simulate(const RunConfig& config, const std::string& out_dir);
PipelineResult run_sweep(const RunConfig& config, const std::string& out_dir);
PipelineResult run_verify_green(const RunConfig& config, bool manufactured, const std::string& out_dir);
PipelineResult run_verify_energy(const RunConfig& config, const std::string& out_dir);
PipelineResult run_verify_carleman(const RunConfig& config, const std::string& out_dir);
PipelineResult run_check_weight(const RunConfig& config, const std::string& out_dir);
PipelineResult run_exit_time(const RunConfig& config, const PhasePoint& anchor, const std::string& out_dir);
PipelineResult run_reconstruct(const RunConfig& config, const std::string& data_csv,
                               const std::optional<std::string>& truth_csv, const std::string& out_dir);

/// Cell table i,j,k,l,value as written by simulate and reconstruct.
void write_cell_csv(const std::string& path, const PhaseGrid& grid, std::span<const double> values);
std::vector<double> read_cell_csv(const std::string& path, const PhaseGrid& grid);

}  // namespace kinlab
