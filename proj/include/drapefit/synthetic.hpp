#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "drapefit/estimator.hpp"
#include "drapefit/sim.hpp"

namespace drapefit {

enum class PinnedSelector { None, TopRow, TopCorners };

// Everything needed to generate a ground-truth scenario without captured
// data: a cloth patch, its excitation, true parameters, and noise settings
// for tracker targets.
struct ScenarioSpec {
  Real width = 0.5, height = 0.5;   // m
  int nx = 20, ny = 20;             // vertex resolution, >= 2 each
  PinnedSelector pinned = PinnedSelector::TopRow;
  Real swing_amplitude = 0.1;       // m, sinusoidal swing of pinned vertices
  Real swing_hz = 0.5;
  std::optional<Sphere> drop_sphere; // optional static collider
  PhysicsParams truth{400.0, 1.0, 0.5};
  int frames = 24;                  // emitted frame count (frames-1 steps)
  Real dt = 0.04;
  Real noise_sigma = 0.0;           // m, Gaussian noise for tracker targets
  uint64_t seed = 0;
  StepConfig step;
};

// Regular grid in the x-y plane (hanging under -y gravity), alternating
// diagonal triangulation. Pinned vertices get the Boundary label.
TriMesh make_cloth_grid(const ScenarioSpec& spec);

// Indices selected by spec.pinned on the grid of spec.
std::vector<int> pinned_indices(const ScenarioSpec& spec);

// Sinusoidal z-swing of the pinned vertices: offset(t) = A sin(2 pi f t).
BoundaryTrack make_boundary_track(const ScenarioSpec& spec, const TriMesh& mesh);

struct Reference {
  TriMesh initial;
  MeshSequence sequence;         // ground-truth simulation, spec.frames frames
  MeshSequence noisy_targets;    // sequence + seeded Gaussian noise (sigma > 0)
  BoundaryTrack boundary;
  ColliderSet colliders;
};

// Simulates the scenario with the true parameters. Deterministic given the
// seed; passes mesh validation by construction.
Reference gen_reference(const ScenarioSpec& spec);

// Seeded Gaussian noise, Box-Muller on top of a splitmix/xorshift stream,
// so the bytes do not depend on the C++ standard library in use.
MatX3 gaussian_noise(Index rows, Real sigma, uint64_t seed);

// Flat key-value scenario config (see README for keys).
ScenarioSpec load_scenario(const std::string& path);
void save_scenario(const std::string& path, const ScenarioSpec& spec);

// Writes frames, boundary.idx, boundary track CSV, collider config and
// truth.csv under dir. Noisy targets go to dir/targets when sigma > 0.
void write_reference(const std::string& dir, const ScenarioSpec& spec,
                     const Reference& ref);

} // namespace drapefit
