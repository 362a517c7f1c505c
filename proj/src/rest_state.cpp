#include "drapefit/rest_state.hpp"

#include <cmath>
#include <sstream>

#include "drapefit/error.hpp"

namespace drapefit {

Real dihedral_angle(const Vec3& xi, const Vec3& xj, const Vec3& xk, const Vec3& xl) {
  const Vec3 e = xj - xi;
  const Vec3 n1 = e.cross(xk - xi);         // face 1 = (i, j, k)
  const Vec3 n2 = (xi - xj).cross(xl - xj); // face 2 = (j, i, l)
  const Vec3 eh = e.normalized();
  const Vec3 n1h = n1.normalized();
  const Vec3 n2h = n2.normalized();
  return std::atan2(n1h.cross(n2h).dot(eh), n1h.dot(n2h));
}

void dihedral_angle_gradient(const Vec3& xi, const Vec3& xj, const Vec3& xk,
                             const Vec3& xl, Vec3 grad[4]) {
  const Vec3 e = xj - xi;
  const Vec3 n1 = e.cross(xk - xi);
  const Vec3 n2 = (xi - xj).cross(xl - xj);
  const Real elen = e.norm();
  const Real n1sq = n1.squaredNorm();
  const Real n2sq = n2.squaredNorm();

  // d(theta)/dx of atan2((n1 x n2).e, n1.n2) with unit normals; the edge
  // direction's own variation cancels because n1 x n2 stays parallel to e.
  grad[2] = -(elen / n1sq) * n1;
  grad[3] = -(elen / n2sq) * n2;
  grad[0] = ((xj - xk).dot(e) / (elen * n1sq)) * n1 +
            ((xj - xl).dot(e) / (elen * n2sq)) * n2;
  grad[1] = ((xk - xi).dot(e) / (elen * n1sq)) * n1 +
            ((xl - xi).dot(e) / (elen * n2sq)) * n2;
}

namespace {

int third_vertex(const MatX3i& faces, int f, int u, int v) {
  for (int c = 0; c < 3; ++c) {
    const int w = faces(f, c);
    if (w != u && w != v) return w;
  }
  return -1;
}

// True when face f traverses the directed edge u->v.
bool has_directed_edge(const MatX3i& faces, int f, int u, int v) {
  for (int c = 0; c < 3; ++c)
    if (faces(f, c) == u && faces(f, (c + 1) % 3) == v) return true;
  return false;
}

Mat2 rest_edge_matrix(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 t1 = e1.normalized();
  Vec3 t2 = e2 - e2.dot(t1) * t1;
  t2.normalize();
  Mat2 dm;
  dm << e1.dot(t1), e2.dot(t1), 0.0, e2.dot(t2);
  return dm;
}

} // namespace

RestState build_rest_state(const TriMesh& mesh, Real density, Real thickness) {
  require_valid(mesh);

  RestState rest;
  rest.faces = mesh.faces;
  rest.density = density;
  rest.thickness = thickness;

  const Index m = mesh.num_faces();
  rest.face_area.resize(m);
  rest.dm_inv.resize(m);
  rest.vertex_mass = VecX::Zero(mesh.num_vertices());
  rest.total_area = 0.0;

  for (Index f = 0; f < m; ++f) {
    const Real area = face_area(mesh.vertices, mesh.faces, f);
    if (area <= kMinRestArea) {
      std::ostringstream ss;
      ss << "face " << f << " has degenerate rest area " << area;
      throw ValidationError(ss.str());
    }
    rest.face_area[f] = area;
    rest.total_area += area;
    const Vec3 a = mesh.vertices.row(mesh.faces(f, 0));
    const Vec3 b = mesh.vertices.row(mesh.faces(f, 1));
    const Vec3 c = mesh.vertices.row(mesh.faces(f, 2));
    rest.dm_inv[f] = rest_edge_matrix(a, b, c).inverse();

    const Real third = density * thickness * area / 3.0;
    for (int k = 0; k < 3; ++k) rest.vertex_mass[mesh.faces(f, k)] += third;
  }
  rest.total_mass = density * thickness * rest.total_area;

  for (const auto& [edge, faces] : build_edge_face_map(mesh)) {
    if (faces.size() != 2) continue; // boundary edge
    Hinge h;
    h.face1 = faces[0];
    h.face2 = faces[1];
    // Orient the edge so face 1 contains it as i->j.
    if (has_directed_edge(mesh.faces, h.face1, edge.first, edge.second)) {
      h.i = edge.first;
      h.j = edge.second;
    } else {
      h.i = edge.second;
      h.j = edge.first;
    }
    h.k = third_vertex(mesh.faces, h.face1, h.i, h.j);
    h.l = third_vertex(mesh.faces, h.face2, h.i, h.j);

    const Vec3 xi = mesh.vertices.row(h.i);
    const Vec3 xj = mesh.vertices.row(h.j);
    const Vec3 xk = mesh.vertices.row(h.k);
    const Vec3 xl = mesh.vertices.row(h.l);
    h.rest_angle = dihedral_angle(xi, xj, xk, xl);
    h.rest_length = (xj - xi).norm();
    h.rest_height =
        (rest.face_area[h.face1] + rest.face_area[h.face2]) / (3.0 * h.rest_length);
    rest.hinges.push_back(h);
  }

  return rest;
}

} // namespace drapefit
