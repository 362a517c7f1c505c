#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "drapefit/types.hpp"

namespace drapefit {

constexpr Real kMinRestArea = 1e-12; // m^2, faces below this are degenerate
constexpr Real kMinLiveArea = 1e-14; // m^2, current-pose evaluability floor

enum class VertexLabel : unsigned char { Garment = 0, Body = 1, Boundary = 2 };

// Triangle mesh: the geometric currency of every module. Immutable by
// convention once built; all operations take it by const reference.
struct TriMesh {
  MatX3 vertices;  // n x 3, meters
  MatX3i faces;    // m x 3, indices into vertices
  std::vector<VertexLabel> labels; // empty, or one label per vertex

  Index num_vertices() const { return vertices.rows(); }
  Index num_faces() const { return faces.rows(); }
};

struct ValidationFinding {
  std::string code; // out-of-range-index | repeated-vertex | degenerate-face | non-manifold-edge
  Index element;    // offending face (or first face on the edge)
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationFinding> findings;
  bool ok() const { return findings.empty(); }
  std::string summary() const;
};

// Reports every violated TriMesh invariant; empty report iff the mesh is valid.
ValidationReport validate_mesh(const TriMesh& mesh);

// Throws ValidationError (with the report summary) when the mesh is invalid.
void require_valid(const TriMesh& mesh);

Real face_area(const MatX3& vertices, const MatX3i& faces, Index f);
Vec3 face_normal_unnormalized(const MatX3& vertices, const MatX3i& faces, Index f);

// Undirected edge -> incident faces, keyed by (min,max) vertex pair.
// Deterministic iteration order (std::map).
using EdgeFaceMap = std::map<std::pair<int, int>, std::vector<int>>;
EdgeFaceMap build_edge_face_map(const TriMesh& mesh);

// 1-ring vertex neighborhoods (sorted, unique).
std::vector<std::vector<int>> vertex_rings(const TriMesh& mesh);

// Edge-adjacent faces per face (sorted, at most 3 on a manifold mesh).
std::vector<std::vector<int>> face_adjacency(const TriMesh& mesh);

// Ordered deformations of one topology. frames[t] is an n x 3 vertex array.
struct MeshSequence {
  std::vector<MatX3> frames;
  MatX3i faces;
  Real dt = 0.04; // seconds between frames

  Index num_frames() const { return static_cast<Index>(frames.size()); }
};

// Per-frame mean over vertices of the squared distance between paired
// frames, then averaged over frames. Units m^2.
Real mean_squared_vertex_error(const MeshSequence& a, const MeshSequence& b);

} // namespace drapefit
