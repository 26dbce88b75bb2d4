#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "kinlab/carleman.hpp"
#include "kinlab/fields.hpp"
#include "kinlab/phase_geometry.hpp"
#include "kinlab/transport_solver.hpp"

namespace kinlab {

/// Sectioned key = value run configuration.
///
///   [grid]        x_lo x_hi y_lo y_hi vx_lo vx_hi vy_lo vy_hi nx ny nvx nvy   (required)
///   [time]        T cfl (required), snapshot_stride
///   [fields]      E q S g h (required; builtin, csv:<path>, [e1, e2] or formula)
///   [experiment]  role (q | S), etas (list or a..b), reference
///   [verify]      beta a b d delta m v2_lo v2_hi T s omega_x_lo omega_x_hi
///                 omega_y_lo omega_y_hi
///   [reconstruct] role lambda budget gradient_tolerance s0 truth mask
///   [output]      trace_stride partition
///   [run]         seed
///
/// Lines starting with # or ; are comments.
struct RunConfig {
  GridConfig grid;
  double T = 0.5;
  double cfl = 1.2;
  std::size_t snapshot_stride = 0;

  std::string E, q, S, g, h;

  std::string experiment_role = "q";
  std::vector<int> etas{1, 2, 3, 4, 5, 6};
  int reference = 1;

  double beta = 0.5, a = 1.0, b = 4.0, d = 0.5;
  double delta = 1.4142135623730951, m = 0.0;
  double v2_lo = -1.0, v2_hi = 1.0;
  double verify_T = 6.0;
  std::vector<double> s_list{1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024};
  Box omega{{0.5, 0.0}, {1.5, 1.0}};

  std::string reconstruct_role = "S";
  double lambda = -1.0;  // negative: 1e-6 * ||data||^2
  int budget = 200;
  double gradient_tolerance = 1e-10;
  std::string s0 = "1";      // known source factor for the S role
  std::string truth = "";    // optional truth field (formula or csv:)
  std::string mask = "all";  // all | probe

  std::size_t trace_stride = 1;
  std::string partition = "outgoing";  // outgoing | incoming | both

  std::uint64_t seed = 1;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Throws ConfigError carrying one message per problem, each naming the
/// line (when there is one), section and key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Canonical text with every default written out; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

/// Sets one key as if it appeared in the file (used for command-line overrides).
void set_config_value(RunConfig& config, std::string_view section, std::string_view key,
                      std::string_view value);

/// Builds grid and fields; throws ConfigError for unparsable fields.
Problem make_problem(const RunConfig& config);
CoefficientRole parse_role(std::string_view text);
CarlemanWeight make_weight(const RunConfig& config);

}  // namespace kinlab
