#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drapefit/error.hpp"
#include "drapefit/parallel.hpp"
#include "drapefit/sim.hpp"
#include "test_utils.hpp"

using namespace drapefit;
using namespace drapefit::testing;

namespace {

// Minimal rest substrate for a cloud of unconnected particles.
RestState particle_rest(const VecX& masses) {
  RestState rest;
  rest.faces.resize(0, 3);
  rest.face_area.resize(0);
  rest.vertex_mass = masses;
  rest.total_mass = masses.sum();
  rest.density = 0.0;
  rest.thickness = 0.0;
  return rest;
}

TriMesh hanging_cloth(int n = 6) {
  ScenarioSpec spec;
  spec.nx = n;
  spec.ny = n;
  spec.width = 0.3;
  spec.height = 0.3;
  return make_cloth_grid(spec);
}

std::vector<int> top_row(int n) {
  std::vector<int> out;
  for (int ix = 0; ix < n; ++ix) out.push_back((n - 1) * n + ix);
  return out;
}

} // namespace

TEST_CASE("free particle under gravity matches the implicit-Euler closed form") {
  RestState rest = particle_rest(VecX::Ones(1));
  SimState state;
  state.positions = MatX3::Zero(1, 3);
  state.velocities = MatX3::Zero(1, 3);

  StepConfig cfg;
  cfg.dt = 0.04;
  cfg.newton_tol = 1e-12;

  const SimState next = step(state, rest, {}, MatX3(0, 3), {}, PhysicsParams{}, cfg);
  CHECK(std::abs(next.velocities(0, 1) - (-0.392)) < 1e-10);
  CHECK(std::abs(next.positions(0, 1) - (-0.01568)) < 1e-10);
  CHECK(std::abs(next.velocities(0, 0)) < 1e-14);
  CHECK(std::abs(next.velocities(0, 2)) < 1e-14);
}

TEST_CASE("fully pinned mesh returns the prescribed positions exactly") {
  const TriMesh mesh = hanging_cloth(3);
  const RestState rest = build_rest_state(mesh, 400.0, 3e-4);
  SimState state;
  state.positions = mesh.vertices;
  state.velocities = MatX3::Zero(mesh.num_vertices(), 3);

  std::vector<int> all(mesh.num_vertices());
  for (size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  MatX3 prescribed = mesh.vertices;
  prescribed.col(0).array() += 0.05;
  prescribed.col(2).array() -= 0.01;

  StepConfig cfg;
  const SimState next = step(state, rest, all, prescribed, {}, PhysicsParams{}, cfg);
  CHECK(next.positions == prescribed); // bit-exact: no free dofs
  const MatX3 expected_vel = (prescribed - mesh.vertices) / cfg.dt;
  CHECK((next.velocities - expected_vel).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("flat cloth at rest with no gravity is a bit-exact fixed point") {
  const TriMesh mesh = hanging_cloth(5);
  const RestState rest = build_rest_state(mesh, 400.0, 3e-4);
  SimState state;
  state.positions = mesh.vertices;
  state.velocities = MatX3::Zero(mesh.num_vertices(), 3);

  StepConfig cfg;
  cfg.enable_gravity = false;
  const SimState next = step(state, rest, {}, MatX3(0, 3), {}, PhysicsParams{}, cfg);
  CHECK((next.positions - mesh.vertices).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(next.velocities.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("linear momentum is conserved without gravity, contact, or pinning") {
  auto gen = rng(12);
  const TriMesh mesh = wrinkled_patch(gen, 5, 5, 0.05);
  const RestState rest = build_rest_state(mesh, 400.0, 3e-4);

  SimState state;
  state.positions = mesh.vertices;
  state.velocities = MatX3::Zero(mesh.num_vertices(), 3);
  // rigid drift plus a deformation component
  state.velocities.col(0).array() = 0.1;
  for (Index i = 0; i < state.velocities.rows(); ++i)
    state.velocities.row(i) += random_vec(gen, 0.05).transpose();

  StepConfig cfg;
  cfg.enable_gravity = false;
  cfg.newton_tol = 1e-10;

  auto momentum = [&](const SimState& s) {
    Vec3 p = Vec3::Zero();
    for (Index i = 0; i < s.velocities.rows(); ++i)
      p += rest.vertex_mass[i] * Vec3(s.velocities.row(i));
    return p;
  };

  Vec3 prev = momentum(state);
  for (int k = 0; k < 100; ++k) {
    state = step(state, rest, {}, MatX3(0, 3), {}, PhysicsParams{}, cfg);
    const Vec3 cur = momentum(state);
    CHECK((cur - prev).norm() < 1e-8);
    prev = cur;
  }
}

TEST_CASE("pinned-top cloth settles to a static drape") {
  const int n = 6;
  const TriMesh mesh = hanging_cloth(n);
  BoundaryTrack boundary;
  boundary.indices = top_row(n);
  MatX3 pinned(static_cast<Index>(boundary.indices.size()), 3);
  for (size_t s = 0; s < boundary.indices.size(); ++s)
    pinned.row(s) = mesh.vertices.row(boundary.indices[s]);
  for (int t = 0; t <= 200; ++t) boundary.prescribed.push_back(pinned);

  StepConfig cfg;
  PhysicsParams params{400.0, 1.0, 0.5};
  const MeshSequence seq =
      simulate_sequence(mesh, boundary, {}, params, cfg, 200);
  REQUIRE(seq.num_frames() == 201);

  const MatX3& last = seq.frames[200];
  const MatX3& prev = seq.frames[199];
  const Real max_speed = ((last - prev) / cfg.dt).rowwise().norm().maxCoeff();
  CHECK(max_speed < 1e-3);
  // starts already hanging; equilibrium shows a small gravity sag, no collapse
  CHECK(last.col(1).minCoeff() < mesh.vertices.col(1).minCoeff());
  CHECK(last.col(1).minCoeff() > mesh.vertices.col(1).minCoeff() - 0.05);
}

TEST_CASE("cloth dropped on a sphere never penetrates") {
  // horizontal sheet falling under gravity onto a sphere below its center
  ScenarioSpec spec;
  spec.nx = 8;
  spec.ny = 8;
  spec.width = 0.4;
  spec.height = 0.4;
  spec.pinned = PinnedSelector::None;
  TriMesh mesh = make_cloth_grid(spec);
  for (Index i = 0; i < mesh.num_vertices(); ++i) {
    const Real x = mesh.vertices(i, 0), y = mesh.vertices(i, 1);
    mesh.vertices.row(i) = Vec3(x, 0.25, y); // lift to y=0.25, lay flat in xz
  }

  ColliderSet colliders;
  ColliderBody body;
  body.shape = Sphere{Vec3(0.2, 0.0, 0.2), 0.12};
  colliders.bodies.push_back(body);

  StepConfig cfg;
  PhysicsParams params{400.0, 1.0, 0.5};
  std::vector<StepStats> stats;
  const MeshSequence seq =
      simulate_sequence(mesh, {}, colliders, params, cfg, 200, &stats);
  REQUIRE(stats.size() == 200);
  for (const auto& s : stats) CHECK(s.min_collider_distance > 0.0);
  // it must have wrapped the sphere significantly by the end
  CHECK(seq.frames.back().col(1).minCoeff() < 0.15);
}

TEST_CASE("accepted incremental potential never exceeds the line-search start") {
  const int n = 5;
  const TriMesh mesh = hanging_cloth(n);
  const RestState rest = build_rest_state(mesh, 400.0, 3e-4);
  BoundaryTrack boundary;
  boundary.indices = top_row(n);
  MatX3 pinned(static_cast<Index>(boundary.indices.size()), 3);
  for (size_t s = 0; s < boundary.indices.size(); ++s)
    pinned.row(s) = mesh.vertices.row(boundary.indices[s]);

  StepConfig cfg;
  PhysicsParams params{400.0, 1.0, 0.5};

  SimState state;
  state.positions = mesh.vertices;
  state.velocities = MatX3::Zero(mesh.num_vertices(), 3);

  std::vector<char> is_free(mesh.num_vertices(), 1);
  for (int idx : boundary.indices) is_free[idx] = 0;

  auto ip = [&](const MatX3& x, const MatX3& inertia_target) {
    Real elastic = 0.0;
    REQUIRE(total_energy_value(x, rest, params, {}, elastic));
    Real inertia = 0.0;
    for (Index i = 0; i < x.rows(); ++i)
      if (is_free[i])
        inertia += rest.vertex_mass[i] *
                   (Vec3(x.row(i)) - Vec3(inertia_target.row(i))).squaredNorm();
    return elastic + inertia / (2.0 * cfg.dt * cfg.dt);
  };

  for (int k = 0; k < 25; ++k) {
    const MatX3 inertia_target = state.positions + cfg.dt * state.velocities;
    const Real ip_start = ip(state.positions, inertia_target);
    state = step(state, rest, boundary.indices, pinned, {}, params, cfg);
    const Real ip_end = ip(state.positions, inertia_target);
    CHECK(ip_end <= ip_start + 1e-12 * (1.0 + std::abs(ip_start)));
  }
}

TEST_CASE("simulate_sequence with zero frames returns only the initial mesh") {
  const TriMesh mesh = hanging_cloth(3);
  const MeshSequence seq = simulate_sequence(mesh, {}, {}, PhysicsParams{}, {}, 0);
  REQUIRE(seq.num_frames() == 1);
  CHECK(seq.frames[0] == mesh.vertices);
}

TEST_CASE("step errors") {
  SUBCASE("penetrating input raises a penetration error") {
    const TriMesh mesh = hanging_cloth(3);
    const RestState rest = build_rest_state(mesh, 400.0, 3e-4);
    SimState state;
    state.positions = mesh.vertices;
    state.velocities = MatX3::Zero(mesh.num_vertices(), 3);
    std::vector<Primitive> prims{Sphere{Vec3(0.15, 0.15, 0.0), 0.1}};
    CHECK_THROWS_AS(step(state, rest, {}, MatX3(0, 3), prims, PhysicsParams{}, {}),
                    PenetrationError);
  }
  SUBCASE("exhausted Newton budget raises a solver error with the residual") {
    RestState rest = particle_rest(VecX::Ones(1));
    SimState state;
    state.positions = MatX3::Zero(1, 3);
    state.velocities = MatX3::Zero(1, 3);
    StepConfig cfg;
    cfg.max_newton_iters = 0; // gravity leaves a nonzero residual
    try {
      step(state, rest, {}, MatX3(0, 3), {}, PhysicsParams{}, cfg);
      FAIL("expected SolverError");
    } catch (const SolverError& err) {
      CHECK(err.residual() == doctest::Approx(9.8).epsilon(1e-10));
    }
  }
  SUBCASE("sequence errors carry the frame index") {
    const TriMesh mesh = hanging_cloth(3);
    StepConfig cfg;
    cfg.max_newton_iters = 0;
    try {
      simulate_sequence(mesh, {}, {}, PhysicsParams{}, cfg, 5);
      FAIL("expected SolverError");
    } catch (const SolverError& err) {
      CHECK(std::string(err.what()).find("frame 1") != std::string::npos);
    }
  }
}

TEST_CASE("simulation is deterministic across runs and thread counts") {
  const int n = 5;
  const TriMesh mesh = hanging_cloth(n);
  BoundaryTrack boundary;
  boundary.indices = top_row(n);
  MatX3 pinned(static_cast<Index>(boundary.indices.size()), 3);
  for (size_t s = 0; s < boundary.indices.size(); ++s)
    pinned.row(s) = mesh.vertices.row(boundary.indices[s]);
  for (int t = 0; t <= 30; ++t) {
    MatX3 moved = pinned;
    moved.col(2).array() += 0.05 * std::sin(0.4 * t);
    boundary.prescribed.push_back(moved);
  }

  PhysicsParams params{300.0, 2.0, 1.0};
  set_thread_count(1);
  const MeshSequence a = simulate_sequence(mesh, boundary, {}, params, {}, 30);
  const MeshSequence b = simulate_sequence(mesh, boundary, {}, params, {}, 30);
  set_thread_count(8);
  const MeshSequence c = simulate_sequence(mesh, boundary, {}, params, {}, 30);
  set_thread_count(1);

  REQUIRE(a.num_frames() == 31);
  for (Index t = 0; t < a.num_frames(); ++t) {
    CHECK(a.frames[t] == b.frames[t]); // bit-identical
    CHECK(a.frames[t] == c.frames[t]);
  }
}
