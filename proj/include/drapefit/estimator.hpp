#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "drapefit/sim.hpp"

namespace drapefit {

struct AdamParams {
  Real lr = 1e-3;
  Real beta1 = 0.9;
  Real beta2 = 0.999;
  Real eps = 1e-8;
};

struct EstimationConfig {
  Real delta_rho = 5.0;      // kg/m^3, forward-difference step
  Real delta_kappa_s = 0.05;
  Real delta_kappa_b = 0.05;
  int iterations = 100;
  // Per-parameter learning rates, scaled to the legal ranges.
  AdamParams adam_rho{20.0};
  AdamParams adam_kappa_s{0.2};
  AdamParams adam_kappa_b{0.2};
  StepConfig step; // dt and Newton settings for the loss simulations
  int frames = 24; // training window T
  bool parallel_evals = true; // the four loss evaluations may run concurrently
};

// First/second moment accumulators per parameter plus the shared step count.
struct AdamState {
  Vec3 m = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  int step_count = 0;
};

struct IterationRecord {
  int iter = 0;
  PhysicsParams params;
  Real loss = 0.0;
  Real seconds = 0.0;
  bool clamped_eval = false; // a perturbed evaluation hit a range boundary
};

struct EstimationTrace {
  std::vector<IterationRecord> records;

  const IterationRecord* best() const; // lowest loss, nullptr when empty
};

// Scalar loss over the parameter triple; the estimator is agnostic to
// whether this is the simulation loss or a test surrogate.
using LossFn = std::function<Real(const PhysicsParams&)>;

// Simulation loss of Eq-style MSE form: simulate from reference frame 0
// with zero velocity and average the per-vertex squared error over all
// frames and garment vertices. Units m^2.
Real sim_loss(const PhysicsParams& params, const MeshSequence& reference,
              const BoundaryTrack& boundary, const ColliderSet& colliders,
              const EstimationConfig& cfg);

// Binds sim_loss to fixed data; simulation failures are rethrown with the
// parameter values attached.
LossFn make_sim_loss(const MeshSequence& reference, const BoundaryTrack& boundary,
                     const ColliderSet& colliders, const EstimationConfig& cfg);

// Forward-difference gradient, exactly four loss evaluations with the
// baseline shared. A perturbation leaving the legal range switches to a
// backward difference for that parameter (reported via *clamped).
// Returns (dL/drho, dL/dkappa_s, dL/dkappa_b); *baseline gets L(params).
Vec3 fd_gradient(const LossFn& loss, const PhysicsParams& params,
                 const EstimationConfig& cfg, Real* baseline = nullptr,
                 bool* clamped = nullptr);

// One bias-corrected Adam update of all three parameters, clamped to the
// legal ranges. Throws NumericError on a non-finite gradient.
PhysicsParams adam_update(AdamState& state, const Vec3& gradient,
                          const PhysicsParams& params, const EstimationConfig& cfg);

// Iterates fd_gradient + adam_update for the configured budget and returns
// the best-loss parameters seen (not necessarily the last) together with
// the full trace. On failure the error is rethrown annotated with the
// iteration index; *partial (when given) holds the records completed so far.
std::pair<PhysicsParams, EstimationTrace>
estimate_parameters(const PhysicsParams& init, const LossFn& loss,
                    const EstimationConfig& cfg, EstimationTrace* partial = nullptr);

// Convenience overload binding the simulation loss.
std::pair<PhysicsParams, EstimationTrace>
estimate_parameters(const PhysicsParams& init, const MeshSequence& reference,
                    const BoundaryTrack& boundary, const ColliderSet& colliders,
                    const EstimationConfig& cfg);

// trace.csv with header iter,rho,kappa_s,kappa_b,loss,seconds.
void write_trace_csv(const std::string& path, const EstimationTrace& trace);

} // namespace drapefit
