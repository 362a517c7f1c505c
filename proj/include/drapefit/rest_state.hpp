#pragma once

#include <vector>

#include "drapefit/trimesh.hpp"
#include "drapefit/types.hpp"

namespace drapefit {

// One interior edge with its two incident triangles, the carrier of a
// bending term. Stencil order: edge (i, j), opposite vertices k (face 1)
// and l (face 2), where face 1 contains the directed edge i->j and face 2
// contains j->i.
struct Hinge {
  int i = -1, j = -1; // shared edge
  int k = -1, l = -1; // opposite vertices of face 1 / face 2
  int face1 = -1, face2 = -1;
  Real rest_angle = 0.0;  // radians, in (-pi, pi)
  Real rest_length = 0.0; // |e| at rest, m
  Real rest_height = 0.0; // (A1 + A2) / (3 |e|), m
};

// Signed dihedral angle across the hinge (i,j) with opposite vertices k, l.
// Sign convention: theta > 0 when the two face normals diverge on the side
// face 1's normal points to (a ridge seen from face 1's normal side).
// A mirror image of the mesh negates theta.
Real dihedral_angle(const Vec3& xi, const Vec3& xj, const Vec3& xk, const Vec3& xl);

// d(theta)/dx for the four stencil vertices, in the order i, j, k, l.
// Gradients sum to zero (rigid-translation invariance).
void dihedral_angle_gradient(const Vec3& xi, const Vec3& xj, const Vec3& xk,
                             const Vec3& xl, Vec3 grad[4]);

// Precomputed rest quantities for the thin-shell energies. Carries a copy
// of the face topology so the energies are self-contained.
struct RestState {
  MatX3i faces;
  VecX face_area;              // m^2 per face
  std::vector<Mat2> dm_inv;    // inverse rest-edge matrix per face
  std::vector<Hinge> hinges;   // interior edges of the garment region
  VecX vertex_mass;            // kg, rho * h * (1/3 of incident rest area)
  Real total_mass = 0.0;       // kg
  Real total_area = 0.0;       // m^2
  Real density = 0.0;          // rho, kg/m^3
  Real thickness = 0.0;        // h, m

  Index num_vertices() const { return vertex_mass.size(); }
  Index num_faces() const { return faces.rows(); }
};

// Precomputes areas, inverse rest-edge matrices, hinges (with rest dihedral
// angles taken from the input pose), and lumped masses m_i = rho*h*A_i/3.
// Throws ValidationError on degenerate faces or non-manifold interior edges.
RestState build_rest_state(const TriMesh& mesh, Real density, Real thickness);

} // namespace drapefit
