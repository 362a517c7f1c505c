#pragma once

#include <string>
#include <vector>

#include "drapefit/sim.hpp"
#include "drapefit/trimesh.hpp"

namespace drapefit {

// Per-vertex sparse weight rows. Weights are >= 0 and each row sums to 1
// within 1e-8.
struct SkinWeights {
  struct Entry {
    int bone;
    Real weight;
  };
  std::vector<std::vector<Entry>> rows;

  Index num_vertices() const { return static_cast<Index>(rows.size()); }
  int max_bone() const;
  // Throws ValidationError when a row violates the invariants.
  void validate(int num_bones = -1) const;
};

// Rigid transform per bone for one frame.
struct SkeletonPose {
  std::vector<RigidTransform> bones;
};

using PoseTrack = std::vector<SkeletonPose>; // one pose per frame

// x_i = sum_j w_ij (R_j rest_i + t_j).
MatX3 lbs_pose(const MatX3& rest_positions, const SkinWeights& weights,
               const SkeletonPose& pose);

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, Vec3* barycentric = nullptr);

struct SurfaceHit {
  int face = -1;
  Vec3 point = Vec3::Zero();
  Vec3 barycentric = Vec3::Zero();
  Real distance = 0.0;
};

SurfaceHit closest_point_on_mesh(const Vec3& p, const TriMesh& mesh);

// Area-weighted vertex normals.
MatX3 vertex_normals(const TriMesh& mesh);

struct TransferResult {
  SkinWeights weights;          // rows valid only where matched
  std::vector<bool> matched;
};

// Stage 1 of weight transfer: barycentric copy from the closest source
// surface point when distance <= d_max and the normal deviation <= theta_max
// (radians). Throws ValidationError on an empty source mesh.
TransferResult transfer_weights_direct(const TriMesh& source, const SkinWeights& source_weights,
                                       const TriMesh& target, Real d_max, Real theta_max);

// Harmonic interpolation on the target mesh graph: solves the discrete
// Laplace equation for unknown vertices with known values as Dirichlet
// data. Uniform weights by default, cotangent optional. The raw solution
// obeys the discrete maximum principle (uniform case).
VecX harmonic_interpolate(const TriMesh& mesh, const VecX& values,
                          const std::vector<bool>& known, bool cotangent = false);

// Stage 2: fills unmatched rows per bone channel by harmonic_interpolate,
// clamps negatives to zero and renormalizes rows to sum 1. Throws
// UnconstrainedRegionError when a connected component containing unmatched
// vertices has no matched vertex.
SkinWeights inpaint_weights(const TriMesh& target, const TransferResult& partial,
                            bool cotangent = false);

// Boundary vertices adopt the weight row of their nearest source body
// vertex at rest, then follow lbs_pose through the pose track.
BoundaryTrack drive_boundary(const std::vector<int>& boundary_indices,
                             const MatX3& rest_positions, const TriMesh& body,
                             const SkinWeights& body_weights, const PoseTrack& track);

// CSV rows: vertex,bone,weight
SkinWeights load_weights_csv(const std::string& path);
void save_weights_csv(const std::string& path, const SkinWeights& weights);

// CSV rows: frame,bone,qw,qx,qy,qz,tx,ty,tz
PoseTrack load_pose_track_csv(const std::string& path);
void save_pose_track_csv(const std::string& path, const PoseTrack& track);

} // namespace drapefit
