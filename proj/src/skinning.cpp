#include "drapefit/skinning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "drapefit/error.hpp"
#include "drapefit/text_io.hpp"

namespace drapefit {

int SkinWeights::max_bone() const {
  int out = -1;
  for (const auto& row : rows)
    for (const auto& entry : row) out = std::max(out, entry.bone);
  return out;
}

void SkinWeights::validate(int num_bones) const {
  for (size_t v = 0; v < rows.size(); ++v) {
    Real sum = 0.0;
    for (const auto& entry : rows[v]) {
      if (entry.weight < 0.0)
        throw ValidationError("vertex " + std::to_string(v) + " has negative weight");
      if (entry.bone < 0 || (num_bones >= 0 && entry.bone >= num_bones))
        throw ValidationError("vertex " + std::to_string(v) + " references bone " +
                              std::to_string(entry.bone) + " outside the skeleton");
      sum += entry.weight;
    }
    if (std::abs(sum - 1.0) > 1e-8)
      throw ValidationError("vertex " + std::to_string(v) + " weights sum to " +
                            std::to_string(sum));
  }
}

MatX3 lbs_pose(const MatX3& rest_positions, const SkinWeights& weights,
               const SkeletonPose& pose) {
  if (weights.num_vertices() != rest_positions.rows())
    throw ValidationError("weight rows do not match vertex count");
  MatX3 out(rest_positions.rows(), 3);
  for (Index i = 0; i < rest_positions.rows(); ++i) {
    const Vec3 rest = rest_positions.row(i);
    Vec3 posed = Vec3::Zero();
    for (const auto& entry : weights.rows[i]) {
      if (entry.bone < 0 || entry.bone >= static_cast<int>(pose.bones.size()))
        throw ValidationError("bone " + std::to_string(entry.bone) +
                              " outside the pose skeleton");
      posed += entry.weight * pose.bones[entry.bone].apply(rest);
    }
    out.row(i) = posed;
  }
  return out;
}

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                               const Vec3& c, Vec3* barycentric) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection).
  const Vec3 ab = b - a, ac = c - a, ap = p - a;
  const Real d1 = ab.dot(ap), d2 = ac.dot(ap);
  auto out = [&](Real u, Real v, Real w) {
    if (barycentric) *barycentric = Vec3(u, v, w);
    return u * a + v * b + w * c;
  };
  if (d1 <= 0.0 && d2 <= 0.0) return out(1, 0, 0);

  const Vec3 bp = p - b;
  const Real d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return out(0, 1, 0);

  const Real vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const Real v = d1 / (d1 - d3);
    return out(1 - v, v, 0);
  }

  const Vec3 cp = p - c;
  const Real d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return out(0, 0, 1);

  const Real vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const Real w = d2 / (d2 - d6);
    return out(1 - w, 0, w);
  }

  const Real va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const Real w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return out(0, 1 - w, w);
  }

  const Real denom = 1.0 / (va + vb + vc);
  const Real v = vb * denom, w = vc * denom;
  return out(1 - v - w, v, w);
}

SurfaceHit closest_point_on_mesh(const Vec3& p, const TriMesh& mesh) {
  SurfaceHit best;
  best.distance = std::numeric_limits<Real>::infinity();
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    Vec3 bary;
    const Vec3 q = closest_point_on_triangle(
        p, mesh.vertices.row(mesh.faces(f, 0)), mesh.vertices.row(mesh.faces(f, 1)),
        mesh.vertices.row(mesh.faces(f, 2)), &bary);
    const Real d = (p - q).norm();
    if (d < best.distance) {
      best.face = static_cast<int>(f);
      best.point = q;
      best.barycentric = bary;
      best.distance = d;
    }
  }
  return best;
}

MatX3 vertex_normals(const TriMesh& mesh) {
  MatX3 normals = MatX3::Zero(mesh.num_vertices(), 3);
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Vec3 n = face_normal_unnormalized(mesh.vertices, mesh.faces, f);
    for (int c = 0; c < 3; ++c) normals.row(mesh.faces(f, c)) += n;
  }
  for (Index i = 0; i < normals.rows(); ++i) {
    const Real len = normals.row(i).norm();
    if (len > 0.0) normals.row(i) /= len;
  }
  return normals;
}

TransferResult transfer_weights_direct(const TriMesh& source,
                                       const SkinWeights& source_weights,
                                       const TriMesh& target, Real d_max, Real theta_max) {
  if (source.num_vertices() == 0 || source.num_faces() == 0)
    throw ValidationError("weight transfer needs a non-empty source mesh");
  if (source_weights.num_vertices() != source.num_vertices())
    throw ValidationError("source weights do not match the source mesh");
  source_weights.validate();

  const MatX3 target_normals = vertex_normals(target);
  const Real cos_max = std::cos(theta_max);

  TransferResult result;
  result.weights.rows.resize(target.num_vertices());
  result.matched.assign(target.num_vertices(), false);

  for (Index i = 0; i < target.num_vertices(); ++i) {
    const SurfaceHit hit = closest_point_on_mesh(target.vertices.row(i), source);
    if (hit.distance > d_max) continue;
    const Vec3 src_normal =
        face_normal_unnormalized(source.vertices, source.faces, hit.face).normalized();
    if (Vec3(target_normals.row(i)).dot(src_normal) < cos_max) continue;

    std::map<int, Real> blended;
    for (int c = 0; c < 3; ++c) {
      const int sv = source.faces(hit.face, c);
      for (const auto& entry : source_weights.rows[sv])
        blended[entry.bone] += hit.barycentric[c] * entry.weight;
    }
    auto& row = result.weights.rows[i];
    for (const auto& [bone, w] : blended)
      if (w > 0.0) row.push_back({bone, w});
    result.matched[i] = true;
  }
  return result;
}

namespace {

// Cotangent of the angle at `apex` in triangle (apex, u, v).
Real corner_cotangent(const Vec3& apex, const Vec3& u, const Vec3& v) {
  const Vec3 e1 = u - apex, e2 = v - apex;
  const Real cross = e1.cross(e2).norm();
  if (cross < 1e-14) return 0.0;
  return e1.dot(e2) / cross;
}

} // namespace

VecX harmonic_interpolate(const TriMesh& mesh, const VecX& values,
                          const std::vector<bool>& known, bool cotangent) {
  const Index n = mesh.num_vertices();
  if (values.size() != n || static_cast<Index>(known.size()) != n)
    throw ValidationError("harmonic_interpolate: incongruent arrays");

  // Edge weights: uniform (1) or cotangent.
  std::map<std::pair<int, int>, Real> edge_w;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    for (int c = 0; c < 3; ++c) {
      int u = mesh.faces(f, c), v = mesh.faces(f, (c + 1) % 3);
      const int apex = mesh.faces(f, (c + 2) % 3);
      const Real w = cotangent
                         ? 0.5 * corner_cotangent(mesh.vertices.row(apex),
                                                  mesh.vertices.row(u),
                                                  mesh.vertices.row(v))
                         : 0.0;
      if (u > v) std::swap(u, v);
      auto [it, inserted] = edge_w.try_emplace({u, v}, 0.0);
      if (cotangent)
        it->second += w;
      else
        it->second = 1.0;
    }
  }

  // Any unknown vertex must be graph-connected to a known one.
  {
    std::vector<int> comp(n, -1);
    std::vector<std::vector<int>> adj(n);
    for (const auto& [e, w] : edge_w) {
      adj[e.first].push_back(e.second);
      adj[e.second].push_back(e.first);
    }
    int num_comp = 0;
    for (Index s = 0; s < n; ++s) {
      if (comp[s] >= 0) continue;
      std::vector<Index> stack{s};
      comp[s] = num_comp;
      while (!stack.empty()) {
        const Index v = stack.back();
        stack.pop_back();
        for (int u : adj[v])
          if (comp[u] < 0) {
            comp[u] = num_comp;
            stack.push_back(u);
          }
      }
      ++num_comp;
    }
    std::vector<bool> comp_has_known(num_comp, false);
    for (Index i = 0; i < n; ++i)
      if (known[i]) comp_has_known[comp[i]] = true;
    for (Index i = 0; i < n; ++i)
      if (!known[i] && !comp_has_known[comp[i]])
        throw UnconstrainedRegionError(
            "vertex " + std::to_string(i) +
            " lies in a connected component with no known values");
  }

  std::vector<Index> slot(n, -1);
  Index num_unknown = 0;
  for (Index i = 0; i < n; ++i)
    if (!known[i]) slot[i] = num_unknown++;
  if (num_unknown == 0) return values;

  std::vector<Eigen::Triplet<Real>> triplets;
  VecX rhs = VecX::Zero(num_unknown);
  VecX diag = VecX::Zero(num_unknown);
  for (const auto& [e, w] : edge_w) {
    const auto [u, v] = e;
    if (!known[u] && !known[v]) {
      triplets.emplace_back(slot[u], slot[v], -w);
      triplets.emplace_back(slot[v], slot[u], -w);
      diag[slot[u]] += w;
      diag[slot[v]] += w;
    } else if (!known[u]) {
      diag[slot[u]] += w;
      rhs[slot[u]] += w * values[v];
    } else if (!known[v]) {
      diag[slot[v]] += w;
      rhs[slot[v]] += w * values[u];
    }
  }
  for (Index s = 0; s < num_unknown; ++s) triplets.emplace_back(s, s, diag[s]);

  Eigen::SparseMatrix<Real> L(num_unknown, num_unknown);
  L.setFromTriplets(triplets.begin(), triplets.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Real>> solver(L);
  if (solver.info() != Eigen::Success)
    throw SolverError("Laplace factorization failed", 0.0);
  const VecX solution = solver.solve(rhs);

  VecX out = values;
  for (Index i = 0; i < n; ++i)
    if (!known[i]) out[i] = solution[slot[i]];
  return out;
}

SkinWeights inpaint_weights(const TriMesh& target, const TransferResult& partial,
                            bool cotangent) {
  const Index n = target.num_vertices();
  if (partial.weights.num_vertices() != n ||
      static_cast<Index>(partial.matched.size()) != n)
    throw ValidationError("inpaint_weights: incongruent partial result");

  std::vector<bool> known(partial.matched.begin(), partial.matched.end());
  const bool all_matched =
      std::all_of(known.begin(), known.end(), [](bool b) { return b; });
  if (all_matched) return partial.weights;

  std::set<int> bones;
  for (Index i = 0; i < n; ++i)
    if (partial.matched[i])
      for (const auto& entry : partial.weights.rows[i]) bones.insert(entry.bone);
  if (bones.empty())
    throw UnconstrainedRegionError("no matched vertices to inpaint from");

  // One harmonic solve per bone channel with matched rows as Dirichlet data.
  std::map<int, VecX> channels;
  for (int bone : bones) {
    VecX values = VecX::Zero(n);
    for (Index i = 0; i < n; ++i)
      if (partial.matched[i])
        for (const auto& entry : partial.weights.rows[i])
          if (entry.bone == bone) values[i] = entry.weight;
    channels[bone] = harmonic_interpolate(target, values, known, cotangent);
  }

  SkinWeights out = partial.weights;
  for (Index i = 0; i < n; ++i) {
    if (partial.matched[i]) continue;
    Real sum = 0.0;
    std::vector<SkinWeights::Entry> row;
    for (const auto& [bone, vals] : channels) {
      const Real w = std::max(vals[i], 0.0); // clamp negatives
      if (w > 0.0) {
        row.push_back({bone, w});
        sum += w;
      }
    }
    if (sum <= 0.0)
      throw UnconstrainedRegionError("inpainted row " + std::to_string(i) +
                                     " has no positive weights");
    for (auto& entry : row) entry.weight /= sum;
    out.rows[i] = std::move(row);
  }
  return out;
}

BoundaryTrack drive_boundary(const std::vector<int>& boundary_indices,
                             const MatX3& rest_positions, const TriMesh& body,
                             const SkinWeights& body_weights, const PoseTrack& track) {
  if (body_weights.num_vertices() != body.num_vertices())
    throw ValidationError("body weights do not match the body mesh");

  // Each boundary vertex adopts the row of its nearest body vertex at rest.
  SkinWeights boundary_weights;
  MatX3 boundary_rest(static_cast<Index>(boundary_indices.size()), 3);
  for (size_t s = 0; s < boundary_indices.size(); ++s) {
    const int bi = boundary_indices[s];
    if (bi < 0 || bi >= rest_positions.rows())
      throw ValidationError("boundary index " + std::to_string(bi) + " out of range");
    const Vec3 p = rest_positions.row(bi);
    Index nearest = 0;
    Real best = std::numeric_limits<Real>::infinity();
    for (Index v = 0; v < body.num_vertices(); ++v) {
      const Real d = (Vec3(body.vertices.row(v)) - p).squaredNorm();
      if (d < best) {
        best = d;
        nearest = v;
      }
    }
    boundary_weights.rows.push_back(body_weights.rows[nearest]);
    boundary_rest.row(s) = p;
  }

  BoundaryTrack out;
  out.indices = boundary_indices;
  out.prescribed.reserve(track.size());
  for (const auto& pose : track)
    out.prescribed.push_back(lbs_pose(boundary_rest, boundary_weights, pose));
  return out;
}

SkinWeights load_weights_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  SkinWeights weights;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    const auto tok = split_char(s, ',');
    if (lineno == 1 && !tok.empty() && tok[0] == "vertex") continue;
    if (tok.size() != 3)
      throw MalformedFileError(path, lineno, "expected vertex,bone,weight");
    long vertex = 0, bone = 0;
    Real w = 0.0;
    if (!parse_int(tok[0], vertex) || !parse_int(tok[1], bone) ||
        !parse_real(tok[2], w) || vertex < 0 || bone < 0)
      throw MalformedFileError(path, lineno, "bad weight row");
    if (static_cast<size_t>(vertex) >= weights.rows.size())
      weights.rows.resize(vertex + 1);
    weights.rows[vertex].push_back({static_cast<int>(bone), w});
  }
  return weights;
}

void save_weights_csv(const std::string& path, const SkinWeights& weights) {
  std::ostringstream out;
  out << "vertex,bone,weight\n";
  for (size_t v = 0; v < weights.rows.size(); ++v)
    for (const auto& entry : weights.rows[v])
      out << v << ',' << entry.bone << ',' << format_real(entry.weight) << '\n';
  write_file(path, out.str());
}

PoseTrack load_pose_track_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  PoseTrack track;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    const auto tok = split_char(s, ',');
    if (lineno == 1 && !tok.empty() && tok[0] == "frame") continue;
    if (tok.size() != 9)
      throw MalformedFileError(path, lineno, "expected frame,bone,qw,qx,qy,qz,tx,ty,tz");
    long frame = 0, bone = 0;
    Real v[7];
    if (!parse_int(tok[0], frame) || !parse_int(tok[1], bone) || frame < 0 || bone < 0)
      throw MalformedFileError(path, lineno, "bad frame or bone index");
    for (int k = 0; k < 7; ++k)
      if (!parse_real(tok[k + 2], v[k]))
        throw MalformedFileError(path, lineno, "bad number `" + tok[k + 2] + "`");
    if (static_cast<size_t>(frame) >= track.size()) track.resize(frame + 1);
    auto& bones = track[frame].bones;
    if (static_cast<size_t>(bone) >= bones.size()) bones.resize(bone + 1);
    bones[bone].rotation = Quat(v[0], v[1], v[2], v[3]).normalized();
    bones[bone].translation = Vec3(v[4], v[5], v[6]);
  }
  return track;
}

void save_pose_track_csv(const std::string& path, const PoseTrack& track) {
  std::ostringstream out;
  out << "frame,bone,qw,qx,qy,qz,tx,ty,tz\n";
  for (size_t t = 0; t < track.size(); ++t)
    for (size_t b = 0; b < track[t].bones.size(); ++b) {
      const auto& xf = track[t].bones[b];
      out << t << ',' << b << ',' << format_real(xf.rotation.w()) << ','
          << format_real(xf.rotation.x()) << ',' << format_real(xf.rotation.y()) << ','
          << format_real(xf.rotation.z()) << ',' << format_real(xf.translation.x())
          << ',' << format_real(xf.translation.y()) << ','
          << format_real(xf.translation.z()) << '\n';
    }
  write_file(path, out.str());
}

} // namespace drapefit
