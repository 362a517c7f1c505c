#pragma once

#include <vector>

#include "drapefit/trimesh.hpp"

namespace drapefit {

enum class IsoPenalty { Absolute, Squared };

struct TrackingConfig {
  Real lambda_iso = 10.0;
  Real lambda_normal = 0.1;
  // The data term is a squared distance in m^2 while the regularizers carry
  // the paper-scale weights above; 100 balances them so millimeter-scale
  // target noise is filtered while real frame-to-frame motion passes.
  Real data_weight = 100.0;
  int iterations = 200;  // optimizer iterations per frame
  Real step_size = 1e-3; // initial step of the largest-gradient vertex, meters
  IsoPenalty iso_penalty = IsoPenalty::Absolute;
  // Charbonnier half-width (m) applied to the absolute-value penalty inside
  // the optimizer: below this scale edge-length deviations are resisted
  // elastically instead of with the raw L1 slope, which would either pin
  // the mesh or let noise through unchecked depending only on data_weight.
  Real iso_smooth = 5e-4;
};

// Per-vertex target positions with optional confidences in [0,1]
// (empty = all ones).
struct TargetFrame {
  MatX3 positions;
  VecX confidence;
};

// Mean over vertices of the mean |edge length - initial edge length| over
// the 1-ring of the initial mesh. Zero iff all 1-ring lengths match.
Real iso_loss(const MatX3& current, const MatX3& initial, const TriMesh& mesh,
              IsoPenalty penalty = IsoPenalty::Absolute);

// Mean over faces of sum_{edge-adjacent f'} (1 - n(f).n(f')). Zero iff all
// adjacent normals are parallel and co-oriented. Throws SingularElementError
// on a degenerate current face.
Real normal_loss(const MatX3& current, const TriMesh& mesh);

// Full tracking objective and its gradient.
Real tracking_objective(const MatX3& current, const TargetFrame& target,
                        const MatX3& initial, const TriMesh& mesh,
                        const TrackingConfig& cfg, MatX3* grad = nullptr);

// Minimizes data + lambda_i iso + lambda_n normal by Adam descent from the
// previous frame's solution. Accepted iterates never increase the
// objective (step halving on increase).
MatX3 track_frame(const MatX3& previous, const TargetFrame& target,
                  const MatX3& initial, const TriMesh& mesh,
                  const TrackingConfig& cfg);

// Sequential track_frame with warm starts; frame 0 is the initial mesh.
MeshSequence track_sequence(const TriMesh& initial,
                            const std::vector<TargetFrame>& targets,
                            const TrackingConfig& cfg, Real dt);

} // namespace drapefit
