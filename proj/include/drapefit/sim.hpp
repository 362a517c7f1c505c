#pragma once

#include <string>
#include <vector>

#include "drapefit/energy.hpp"
#include "drapefit/trimesh.hpp"

namespace drapefit {

// Garment state at one time index.
struct SimState {
  MatX3 positions;
  MatX3 velocities;
  int time_index = 0;
};

// Dirichlet vertices with their prescribed positions per frame.
// prescribed[t] has one row per boundary index, aligned with `indices`.
struct BoundaryTrack {
  std::vector<int> indices;
  std::vector<MatX3> prescribed;

  bool empty() const { return indices.empty(); }
  Index num_frames() const { return static_cast<Index>(prescribed.size()); }
};

// CSV rows: frame,vertex,x,y,z
BoundaryTrack load_boundary_csv(const std::string& path);
void save_boundary_csv(const std::string& path, const BoundaryTrack& track);

struct StepConfig {
  Real dt = 0.04;            // s
  Real newton_tol = 1e-6;    // N, infinity norm of the IP gradient
  int max_newton_iters = 50;
  Real line_search_shrink = 0.5;
  bool enable_gravity = true;
};

struct StepStats {
  int newton_iters = 0;
  Real residual = 0.0;
  Real min_collider_distance = 0.0; // +inf without colliders
  Real energy = 0.0;                // elastic + external at the accepted state
};

// One implicit-Euler step: minimizes the incremental potential
//   IP(x) = 1/(2 dt^2) |x - (V_t + dt V'_t)|_M^2 + E_total(x)
// over free vertices with Dirichlet vertices pinned to `boundary_next`,
// by Newton with a distance-filtered backtracking line search. Newton
// starts from V_t, so no accepted state exceeds the incoming IP value and
// no accepted state has a collider distance <= 0.
// Returns (V_{t+1}, (V_{t+1} - V_t)/dt, t+1).
SimState step(const SimState& state, const RestState& rest,
              const std::vector<int>& dirichlet, const MatX3& boundary_next,
              const std::vector<Primitive>& colliders_next,
              const PhysicsParams& params, const StepConfig& cfg,
              StepStats* stats = nullptr);

// Runs `frame_count` steps from the initial mesh at rest (zero velocity).
// Output has frame_count + 1 frames, the initial one included. Boundary
// and collider tracks are sampled at t+1 for the step producing frame t+1.
MeshSequence simulate_sequence(const TriMesh& initial, const BoundaryTrack& boundary,
                               const ColliderSet& colliders, const PhysicsParams& params,
                               const StepConfig& cfg, int frame_count,
                               std::vector<StepStats>* stats = nullptr);

} // namespace drapefit
