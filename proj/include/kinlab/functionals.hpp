#pragma once

#include <span>
#include <vector>

#include "kinlab/fields.hpp"
#include "kinlab/manufactured.hpp"
#include "kinlab/phase_geometry.hpp"
#include "kinlab/transport_solver.hpp"

namespace kinlab {

struct GreenSample {
  double s = 0.0;
  double lhs = 0.0;  // ||u(s)||^2 + int_0^s int_{Gamma_+} |u|^2
  double rhs = 0.0;  // ||u(0)||^2 + int_0^s int_{Gamma_-} |u|^2 + 2 int_0^s int F u
  double residual = 0.0;
};

struct GreenReport {
  std::vector<GreenSample> samples;
  double dx = 0.0;
  double dt = 0.0;
  double max_residual() const;
};

/// Green identity for a closed-form u with F = P0 u, by midpoint quadrature
/// over the grid's phase cells and boundary facets and `time_cells` uniform
/// cells on [0, T]. Each s must be a multiple of T / time_cells
/// (ValidationError otherwise).
GreenReport green_identity_residual(const PhaseFunction& u, const FieldSpec& E,
                                    const PhaseGrid& grid, double T, int time_cells,
                                    std::span<const double> s_values);

/// Same identity on solver output, with F = S - q u and left-endpoint time
/// quadrature over the solver's levels.
GreenReport green_identity_residual(const std::vector<LevelDiagnostics>& levels,
                                    const PhaseGrid& grid);

struct EnergySample {
  double s = 0.0;
  double lhs = 0.0;
  double margin = 0.0;
  bool pass = true;
};

struct EnergyReport {
  double constant = 0.0;  // c = 2 (1 + ||q||_inf)
  double alpha = 0.0;     // ||u(0)||^2 + int_{Gamma_-} + 2 ||W||^2 over [0, T]
  double rhs = 0.0;       // alpha (1 + c T e^{cT})
  double tolerance = 0.0;
  std::vector<EnergySample> samples;
  bool pass = true;
  double min_margin() const;
};

/// Energy bound for a solution of P0 u + q u = 2W with W = S / 2, evaluated
/// on the solver's level diagnostics.
EnergyReport energy_estimate_check(const std::vector<LevelDiagnostics>& levels, double q_sup,
                                   double relative_tolerance = 1e-12);

/// max |f| over grid cell centers (time 0 for time-dependent fields).
double field_sup(const FieldSpec& f, const PhaseGrid& grid);

struct BoundaryControlReport {
  double dudt_norm = 0.0;  // ||d_t u||_{L2([0,T] x Gamma_+)}
  double k0_norm = 0.0;    // ||k0||_{L2(Omega x V)}
  double ratio = 0.0;
  std::size_t steps = 0;
};

/// Solves the zero-data problem with source k0 * k1 and reports
/// ||d_t u||_{Gamma_+} / ||k0||. Throws ValidationError for k0 = 0 or when
/// the product cannot be formed (tabulated factors).
BoundaryControlReport boundary_control_check(const FieldSpec& k0, const FieldSpec& k1,
                                             const FieldSpec& q, const FieldSpec& E,
                                             const PhaseGrid& grid, double T, double cfl);

}  // namespace kinlab
