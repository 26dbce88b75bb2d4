#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/transport_solver.hpp"

namespace kinlab {

struct SweepPoint {
  int eta = 0;
  double dcoef = 0.0;  // ||coef_eta - coef_ref||_{L2(Omega x V)}
  double ddudt = 0.0;  // ||d_t u_eta - d_t u_ref||_{L2([0,T] x Gamma_+)}
  std::uint64_t final_checksum = 0;
};

struct SweepResult {
  CoefficientRole role = CoefficientRole::Absorption;
  int reference = 1;
  double dt = 0.0;
  std::size_t steps = 0;
  std::vector<SweepPoint> points;  // eta order, reference included

  /// Points with eta != reference, as (dcoef, ddudt).
  std::vector<std::pair<double, double>> fit_points() const;
};

/// Runs every member of the family on the template problem (the varied
/// coefficient replaced, everything else kept) and compares each outgoing
/// d_t u trace with the reference member's. The solvers advance in lockstep
/// so traces never have to be stored.
SweepResult run_stability_sweep(const CoefficientFamily& family, const Problem& base,
                                std::span<const int> etas, int reference = 1);

struct FitReport {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double c = 0.0;  // min ddudt / dcoef
  double C = 0.0;  // max ddudt / dcoef
  std::size_t n = 0;
};

/// Ordinary least squares of y on x. Throws ValidationError for fewer than
/// two points or identical abscissae.
FitReport linear_fit(std::span<const std::pair<double, double>> points);
FitReport linear_fit(const SweepResult& sweep);

/// Velocity cells whose largest value of g over Omega is at least half of
/// max g; one flag per (k, l) velocity cell.
std::vector<char> probe_velocity_mask(const FieldSpec& g, const PhaseGrid& grid);

}  // namespace kinlab
