#include "drapefit/trimesh.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "drapefit/error.hpp"

namespace drapefit {

std::string ValidationReport::summary() const {
  std::ostringstream ss;
  for (size_t i = 0; i < findings.size(); ++i) {
    if (i) ss << "; ";
    ss << findings[i].message;
  }
  return ss.str();
}

Real face_area(const MatX3& vertices, const MatX3i& faces, Index f) {
  const Vec3 a = vertices.row(faces(f, 0));
  const Vec3 b = vertices.row(faces(f, 1));
  const Vec3 c = vertices.row(faces(f, 2));
  return 0.5 * (b - a).cross(c - a).norm();
}

Vec3 face_normal_unnormalized(const MatX3& vertices, const MatX3i& faces, Index f) {
  const Vec3 a = vertices.row(faces(f, 0));
  const Vec3 b = vertices.row(faces(f, 1));
  const Vec3 c = vertices.row(faces(f, 2));
  return (b - a).cross(c - a);
}

EdgeFaceMap build_edge_face_map(const TriMesh& mesh) {
  EdgeFaceMap edges;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      int u = mesh.faces(f, e);
      int v = mesh.faces(f, (e + 1) % 3);
      if (u > v) std::swap(u, v);
      edges[{u, v}].push_back(static_cast<int>(f));
    }
  }
  return edges;
}

std::vector<std::vector<int>> vertex_rings(const TriMesh& mesh) {
  std::vector<std::set<int>> rings(mesh.num_vertices());
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    for (int e = 0; e < 3; ++e) {
      const int u = mesh.faces(f, e);
      const int v = mesh.faces(f, (e + 1) % 3);
      rings[u].insert(v);
      rings[v].insert(u);
    }
  }
  std::vector<std::vector<int>> out(rings.size());
  for (size_t i = 0; i < rings.size(); ++i)
    out[i].assign(rings[i].begin(), rings[i].end());
  return out;
}

std::vector<std::vector<int>> face_adjacency(const TriMesh& mesh) {
  std::vector<std::vector<int>> adj(mesh.num_faces());
  for (const auto& [edge, faces] : build_edge_face_map(mesh)) {
    for (size_t a = 0; a < faces.size(); ++a)
      for (size_t b = 0; b < faces.size(); ++b)
        if (a != b) adj[faces[a]].push_back(faces[b]);
  }
  for (auto& v : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return adj;
}

ValidationReport validate_mesh(const TriMesh& mesh) {
  ValidationReport report;
  const Index n = mesh.num_vertices();

  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const int a = mesh.faces(f, 0), b = mesh.faces(f, 1), c = mesh.faces(f, 2);
    bool in_range = true;
    for (int k = 0; k < 3; ++k) {
      const int idx = mesh.faces(f, k);
      if (idx < 0 || idx >= n) {
        in_range = false;
        std::ostringstream ss;
        ss << "face " << f << " has out-of-range vertex index " << idx;
        report.findings.push_back({"out-of-range-index", f, ss.str()});
        break;
      }
    }
    if (!in_range) continue;
    if (a == b || b == c || a == c) {
      std::ostringstream ss;
      ss << "face " << f << " repeats a vertex (" << a << "," << b << "," << c << ")";
      report.findings.push_back({"repeated-vertex", f, ss.str()});
      continue;
    }
    if (face_area(mesh.vertices, mesh.faces, f) <= kMinRestArea) {
      std::ostringstream ss;
      ss << "face " << f << " is degenerate (area <= " << kMinRestArea << ")";
      report.findings.push_back({"degenerate-face", f, ss.str()});
    }
  }

  if (report.ok()) {
    for (const auto& [edge, faces] : build_edge_face_map(mesh)) {
      if (faces.size() > 2) {
        std::ostringstream ss;
        ss << "edge (" << edge.first << "," << edge.second << ") is shared by "
           << faces.size() << " faces";
        report.findings.push_back(
            {"non-manifold-edge", static_cast<Index>(faces.front()), ss.str()});
      }
    }
  }
  return report;
}

void require_valid(const TriMesh& mesh) {
  const ValidationReport report = validate_mesh(mesh);
  if (!report.ok()) throw ValidationError("invalid mesh: " + report.summary());
}

Real mean_squared_vertex_error(const MeshSequence& a, const MeshSequence& b) {
  if (a.num_frames() != b.num_frames())
    throw ValidationError("sequences have different frame counts");
  if (a.num_frames() == 0) return 0.0;
  Real total = 0.0;
  for (Index t = 0; t < a.num_frames(); ++t) {
    const MatX3& va = a.frames[t];
    const MatX3& vb = b.frames[t];
    if (va.rows() != vb.rows())
      throw ValidationError("frame vertex counts differ");
    total += (va - vb).rowwise().squaredNorm().mean();
  }
  return total / static_cast<Real>(a.num_frames());
}

} // namespace drapefit
