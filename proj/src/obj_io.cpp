#include "drapefit/obj_io.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "drapefit/error.hpp"
#include "drapefit/text_io.hpp"

namespace fs = std::filesystem;

namespace drapefit {

namespace {

// Face tokens may carry `/uv/normal` suffixes; only the vertex index is honored.
bool parse_face_index(const std::string& token, long& out) {
  const auto slash = token.find('/');
  return parse_int(slash == std::string::npos ? token : token.substr(0, slash), out);
}

} // namespace

TriMesh load_mesh(const std::string& path, std::vector<std::string>* warnings) {
  std::istringstream in(read_file(path));
  std::vector<Vec3> verts;
  std::vector<Eigen::Vector3i> faces;
  std::set<std::string> skipped;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    const auto tok = split_ws(s);
    if (tok[0] == "v") {
      if (tok.size() < 4)
        throw MalformedFileError(path, lineno, "vertex record needs 3 coordinates");
      Vec3 v;
      for (int k = 0; k < 3; ++k)
        if (!parse_real(tok[k + 1], v[k]))
          throw MalformedFileError(path, lineno, "bad vertex coordinate `" + tok[k + 1] + "`");
      verts.push_back(v);
    } else if (tok[0] == "f") {
      if (tok.size() != 4)
        throw MalformedFileError(path, lineno, "only triangle faces are supported");
      Eigen::Vector3i f;
      for (int k = 0; k < 3; ++k) {
        long idx = 0;
        if (!parse_face_index(tok[k + 1], idx))
          throw MalformedFileError(path, lineno, "bad face index `" + tok[k + 1] + "`");
        if (idx < 1 || idx > static_cast<long>(verts.size()))
          throw MalformedFileError(path, lineno,
                                   "face index " + std::to_string(idx) +
                                       " outside 1.." + std::to_string(verts.size()));
        f[k] = static_cast<int>(idx - 1);
      }
      faces.push_back(f);
    } else {
      skipped.insert(tok[0]);
    }
  }

  if (warnings)
    for (const auto& rec : skipped)
      warnings->push_back("ignored OBJ record type `" + rec + "` in " + path);

  TriMesh mesh;
  mesh.vertices.resize(static_cast<Index>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(i) = verts[i];
  mesh.faces.resize(static_cast<Index>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); ++i) mesh.faces.row(i) = faces[i];

  require_valid(mesh);
  return mesh;
}

void save_mesh(const std::string& path, const TriMesh& mesh) {
  std::ostringstream out;
  for (Index i = 0; i < mesh.num_vertices(); ++i)
    out << "v " << format_real(mesh.vertices(i, 0)) << ' '
        << format_real(mesh.vertices(i, 1)) << ' '
        << format_real(mesh.vertices(i, 2)) << '\n';
  for (Index f = 0; f < mesh.num_faces(); ++f)
    out << "f " << mesh.faces(f, 0) + 1 << ' ' << mesh.faces(f, 1) + 1 << ' '
        << mesh.faces(f, 2) + 1 << '\n';
  write_file(path, out.str());
}

std::vector<int> load_index_file(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<int> indices;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    long idx = 0;
    if (!parse_int(s, idx) || idx < 0)
      throw MalformedFileError(path, lineno, "expected a non-negative vertex index");
    indices.push_back(static_cast<int>(idx));
  }
  return indices;
}

void save_index_file(const std::string& path, const std::vector<int>& indices) {
  std::ostringstream out;
  for (int idx : indices) out << idx << '\n';
  write_file(path, out.str());
}

std::string frame_filename(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%04d.obj", frame);
  return buf;
}

MeshSequence load_sequence(const std::string& dir, Real dt) {
  MeshSequence seq;
  seq.dt = dt;
  for (int frame = 0;; ++frame) {
    const fs::path p = fs::path(dir) / frame_filename(frame);
    if (!fs::exists(p)) break;
    TriMesh mesh = load_mesh(p.string());
    if (frame == 0) {
      seq.faces = mesh.faces;
    } else if (mesh.faces.rows() != seq.faces.rows() || mesh.faces != seq.faces ||
               mesh.vertices.rows() != seq.frames.front().rows()) {
      throw ValidationError("frame " + std::to_string(frame) + " in " + dir +
                            " does not share the sequence topology");
    }
    seq.frames.push_back(std::move(mesh.vertices));
  }
  if (seq.frames.empty())
    throw IoError("no frame_0000.obj found in " + dir);
  return seq;
}

void save_sequence(const std::string& dir, const MeshSequence& seq) {
  fs::create_directories(dir);
  TriMesh mesh;
  mesh.faces = seq.faces;
  for (Index t = 0; t < seq.num_frames(); ++t) {
    mesh.vertices = seq.frames[t];
    save_mesh((fs::path(dir) / frame_filename(static_cast<int>(t))).string(), mesh);
  }
}

} // namespace drapefit
