#include "drapefit/synthetic.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "drapefit/error.hpp"
#include "drapefit/obj_io.hpp"
#include "drapefit/text_io.hpp"

namespace fs = std::filesystem;

namespace drapefit {

namespace {

void check_spec(const ScenarioSpec& spec) {
  if (spec.nx < 2 || spec.ny < 2)
    throw ValidationError("grid resolution must be at least 2x2");
  if (spec.frames < 1) throw ValidationError("frame count must be >= 1");
  if (spec.noise_sigma < 0.0) throw ValidationError("noise sigma must be >= 0");
  if (spec.dt <= 0.0) throw ValidationError("dt must be > 0");
}

uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

Real uniform01(uint64_t& state) {
  // in (0, 1]: Box-Muller needs log() of a strictly positive value
  return 1.0 - static_cast<Real>(splitmix64(state) >> 11) * 0x1.0p-53;
}

} // namespace

MatX3 gaussian_noise(Index rows, Real sigma, uint64_t seed) {
  MatX3 noise(rows, 3);
  uint64_t state = seed;
  Real spare = 0.0;
  bool has_spare = false;
  for (Index i = 0; i < rows; ++i) {
    for (int c = 0; c < 3; ++c) {
      if (has_spare) {
        noise(i, c) = sigma * spare;
        has_spare = false;
        continue;
      }
      const Real u1 = uniform01(state);
      const Real u2 = uniform01(state);
      const Real radius = std::sqrt(-2.0 * std::log(u1));
      const Real angle = 2.0 * M_PI * u2;
      noise(i, c) = sigma * radius * std::cos(angle);
      spare = radius * std::sin(angle);
      has_spare = true;
    }
  }
  return noise;
}

TriMesh make_cloth_grid(const ScenarioSpec& spec) {
  check_spec(spec);
  const int nx = spec.nx, ny = spec.ny;
  TriMesh mesh;
  mesh.vertices.resize(static_cast<Index>(nx) * ny, 3);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      mesh.vertices.row(static_cast<Index>(iy) * nx + ix) =
          Vec3(spec.width * ix / (nx - 1), spec.height * iy / (ny - 1), 0.0);

  mesh.faces.resize(2 * static_cast<Index>(nx - 1) * (ny - 1), 3);
  Index f = 0;
  for (int iy = 0; iy + 1 < ny; ++iy) {
    for (int ix = 0; ix + 1 < nx; ++ix) {
      const int a = iy * nx + ix;
      const int b = a + 1;
      const int c = a + nx;
      const int d = c + 1;
      if ((ix + iy) % 2 == 0) {
        mesh.faces.row(f++) << a, b, d;
        mesh.faces.row(f++) << a, d, c;
      } else {
        mesh.faces.row(f++) << a, b, c;
        mesh.faces.row(f++) << b, d, c;
      }
    }
  }

  mesh.labels.assign(mesh.num_vertices(), VertexLabel::Garment);
  for (int idx : pinned_indices(spec)) mesh.labels[idx] = VertexLabel::Boundary;
  return mesh;
}

std::vector<int> pinned_indices(const ScenarioSpec& spec) {
  std::vector<int> out;
  const int top = (spec.ny - 1) * spec.nx;
  switch (spec.pinned) {
    case PinnedSelector::None:
      break;
    case PinnedSelector::TopRow:
      for (int ix = 0; ix < spec.nx; ++ix) out.push_back(top + ix);
      break;
    case PinnedSelector::TopCorners:
      out.push_back(top);
      out.push_back(top + spec.nx - 1);
      break;
  }
  return out;
}

BoundaryTrack make_boundary_track(const ScenarioSpec& spec, const TriMesh& mesh) {
  BoundaryTrack track;
  track.indices = pinned_indices(spec);
  if (track.indices.empty()) return track;

  MatX3 rest(static_cast<Index>(track.indices.size()), 3);
  for (size_t s = 0; s < track.indices.size(); ++s)
    rest.row(s) = mesh.vertices.row(track.indices[s]);

  track.prescribed.reserve(spec.frames);
  for (int t = 0; t < spec.frames; ++t) {
    const Real offset =
        spec.swing_amplitude * std::sin(2.0 * M_PI * spec.swing_hz * t * spec.dt);
    MatX3 frame = rest;
    frame.col(2).array() += offset; // swing normal to the cloth plane
    track.prescribed.push_back(frame);
  }
  return track;
}

Reference gen_reference(const ScenarioSpec& spec) {
  check_spec(spec);
  Reference ref;
  ref.initial = make_cloth_grid(spec);
  ref.boundary = make_boundary_track(spec, ref.initial);
  if (spec.drop_sphere) {
    ColliderBody body;
    body.shape = *spec.drop_sphere;
    ref.colliders.bodies.push_back(body);
  }

  StepConfig step_cfg = spec.step;
  step_cfg.dt = spec.dt;
  ref.sequence = simulate_sequence(ref.initial, ref.boundary, ref.colliders, spec.truth,
                                   step_cfg, spec.frames - 1);

  ref.noisy_targets = ref.sequence;
  if (spec.noise_sigma > 0.0) {
    for (Index t = 1; t < ref.noisy_targets.num_frames(); ++t) {
      uint64_t frame_seed = spec.seed;
      (void)splitmix64(frame_seed);
      frame_seed ^= 0x51ed2701u + static_cast<uint64_t>(t) * 0x9e3779b97f4a7c15ull;
      ref.noisy_targets.frames[t] +=
          gaussian_noise(ref.noisy_targets.frames[t].rows(), spec.noise_sigma, frame_seed);
    }
  }
  return ref;
}

namespace {

const char* pinned_name(PinnedSelector p) {
  switch (p) {
    case PinnedSelector::None: return "none";
    case PinnedSelector::TopRow: return "top_row";
    case PinnedSelector::TopCorners: return "top_corners";
  }
  return "none";
}

} // namespace

ScenarioSpec load_scenario(const std::string& path) {
  const auto kv = load_flat_config(path);
  ScenarioSpec spec;
  auto real_of = [&](const char* key, Real fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    Real v = 0;
    if (!parse_real(it->second, v))
      throw MalformedFileError(path, 0, std::string("bad value for `") + key + "`");
    return v;
  };
  auto int_of = [&](const char* key, long fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    long v = 0;
    if (!parse_int(it->second, v))
      throw MalformedFileError(path, 0, std::string("bad value for `") + key + "`");
    return v;
  };

  spec.width = real_of("width", spec.width);
  spec.height = real_of("height", spec.height);
  spec.nx = static_cast<int>(int_of("nx", spec.nx));
  spec.ny = static_cast<int>(int_of("ny", spec.ny));
  if (auto it = kv.find("pinned"); it != kv.end()) {
    if (it->second == "none")
      spec.pinned = PinnedSelector::None;
    else if (it->second == "top_row")
      spec.pinned = PinnedSelector::TopRow;
    else if (it->second == "top_corners")
      spec.pinned = PinnedSelector::TopCorners;
    else
      throw MalformedFileError(path, 0, "unknown pinned selector `" + it->second + "`");
  }
  spec.swing_amplitude = real_of("swing_amplitude", spec.swing_amplitude);
  spec.swing_hz = real_of("swing_hz", spec.swing_hz);
  if (auto it = kv.find("drop_sphere"); it != kv.end() && it->second != "none") {
    const auto tok = split_ws(it->second);
    if (tok.size() != 4)
      throw MalformedFileError(path, 0, "drop_sphere needs `cx cy cz radius`");
    Sphere s;
    if (!parse_real(tok[0], s.center.x()) || !parse_real(tok[1], s.center.y()) ||
        !parse_real(tok[2], s.center.z()) || !parse_real(tok[3], s.radius))
      throw MalformedFileError(path, 0, "bad drop_sphere numbers");
    spec.drop_sphere = s;
  }
  spec.truth.rho = real_of("rho", spec.truth.rho);
  spec.truth.kappa_s = real_of("kappa_s", spec.truth.kappa_s);
  spec.truth.kappa_b = real_of("kappa_b", spec.truth.kappa_b);
  spec.frames = static_cast<int>(int_of("frames", spec.frames));
  spec.dt = real_of("dt", spec.dt);
  spec.noise_sigma = real_of("noise_sigma", spec.noise_sigma);
  spec.seed = static_cast<uint64_t>(int_of("seed", static_cast<long>(spec.seed)));
  spec.step.newton_tol = real_of("newton_tol", spec.step.newton_tol);
  spec.step.max_newton_iters =
      static_cast<int>(int_of("max_newton_iters", spec.step.max_newton_iters));
  check_spec(spec);
  return spec;
}

void save_scenario(const std::string& path, const ScenarioSpec& spec) {
  std::ostringstream out;
  out << "width " << format_real(spec.width) << '\n';
  out << "height " << format_real(spec.height) << '\n';
  out << "nx " << spec.nx << '\n';
  out << "ny " << spec.ny << '\n';
  out << "pinned " << pinned_name(spec.pinned) << '\n';
  out << "swing_amplitude " << format_real(spec.swing_amplitude) << '\n';
  out << "swing_hz " << format_real(spec.swing_hz) << '\n';
  if (spec.drop_sphere)
    out << "drop_sphere " << format_real(spec.drop_sphere->center.x()) << ' '
        << format_real(spec.drop_sphere->center.y()) << ' '
        << format_real(spec.drop_sphere->center.z()) << ' '
        << format_real(spec.drop_sphere->radius) << '\n';
  out << "rho " << format_real(spec.truth.rho) << '\n';
  out << "kappa_s " << format_real(spec.truth.kappa_s) << '\n';
  out << "kappa_b " << format_real(spec.truth.kappa_b) << '\n';
  out << "frames " << spec.frames << '\n';
  out << "dt " << format_real(spec.dt) << '\n';
  out << "noise_sigma " << format_real(spec.noise_sigma) << '\n';
  out << "seed " << spec.seed << '\n';
  write_file(path, out.str());
}

void write_reference(const std::string& dir, const ScenarioSpec& spec,
                     const Reference& ref) {
  fs::create_directories(dir);
  save_sequence(dir, ref.sequence);
  save_index_file((fs::path(dir) / "boundary.idx").string(), ref.boundary.indices);

  std::vector<int> garment(ref.initial.num_vertices());
  for (size_t i = 0; i < garment.size(); ++i) garment[i] = static_cast<int>(i);
  save_index_file((fs::path(dir) / "garment.idx").string(), garment);

  if (!ref.boundary.empty())
    save_boundary_csv((fs::path(dir) / "boundary.csv").string(), ref.boundary);
  if (!ref.colliders.empty())
    save_collider_config((fs::path(dir) / "colliders.cfg").string(), ref.colliders);

  std::ostringstream truth;
  truth << "rho,kappa_s,kappa_b\n"
        << format_real(spec.truth.rho) << ',' << format_real(spec.truth.kappa_s) << ','
        << format_real(spec.truth.kappa_b) << '\n';
  write_file((fs::path(dir) / "truth.csv").string(), truth.str());

  save_scenario((fs::path(dir) / "scenario.cfg").string(), spec);

  if (spec.noise_sigma > 0.0)
    save_sequence((fs::path(dir) / "targets").string(), ref.noisy_targets);
}

} // namespace drapefit
