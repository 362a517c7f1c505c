#pragma once

#include <string>
#include <vector>

#include "drapefit/trimesh.hpp"

namespace drapefit {

// ASCII OBJ subset: `v x y z` and `f i j k` records (1-based indices).
// Other record types are skipped; each skipped type is reported once in
// *warnings when the pointer is non-null. Throws MalformedFileError on
// unparseable records and ValidationError when the mesh invariants fail.
TriMesh load_mesh(const std::string& path, std::vector<std::string>* warnings = nullptr);

// Writes vertices with 17 significant digits so load/save round-trips are
// exact at double precision.
void save_mesh(const std::string& path, const TriMesh& mesh);

// Sidecar label files: one 0-based vertex index per line ('#' comments allowed).
std::vector<int> load_index_file(const std::string& path);
void save_index_file(const std::string& path, const std::vector<int>& indices);

// Sequence directory of frame_%04d.obj sharing one topology, dense from 0.
MeshSequence load_sequence(const std::string& dir, Real dt);
void save_sequence(const std::string& dir, const MeshSequence& seq);

std::string frame_filename(int frame);

} // namespace drapefit
