#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drapefit/error.hpp"
#include "drapefit/obj_io.hpp"
#include "drapefit/tracker.hpp"
#include "test_utils.hpp"

using namespace drapefit;
using namespace drapefit::testing;

namespace {

// Independent brute-force re-implementation of the isometry loss: builds
// neighborhoods by scanning the face list per vertex, no shared machinery.
Real iso_loss_brute(const MatX3& current, const MatX3& initial, const MatX3i& faces) {
  const Index n = current.rows();
  Real total = 0.0;
  for (Index v = 0; v < n; ++v) {
    std::vector<int> neighbors;
    for (Index f = 0; f < faces.rows(); ++f)
      for (int c = 0; c < 3; ++c)
        if (faces(f, c) == v)
          for (int o = 0; o < 3; ++o)
            if (o != c &&
                std::find(neighbors.begin(), neighbors.end(), faces(f, o)) ==
                    neighbors.end())
              neighbors.push_back(faces(f, o));
    if (neighbors.empty()) continue;
    Real acc = 0.0;
    for (int u : neighbors) {
      const Real l0 = (initial.row(v) - initial.row(u)).norm();
      const Real l1 = (current.row(v) - current.row(u)).norm();
      acc += std::abs(l0 - l1);
    }
    total += acc / neighbors.size();
  }
  return total / n;
}

// Brute-force normal loss: all face pairs sharing exactly two vertices.
Real normal_loss_brute(const MatX3& current, const MatX3i& faces) {
  const Index m = faces.rows();
  auto normal = [&](Index f) {
    const Vec3 a = current.row(faces(f, 0));
    const Vec3 b = current.row(faces(f, 1));
    const Vec3 c = current.row(faces(f, 2));
    return Vec3((b - a).cross(c - a).normalized());
  };
  Real total = 0.0;
  for (Index f = 0; f < m; ++f)
    for (Index g = 0; g < m; ++g) {
      if (f == g) continue;
      int shared = 0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          if (faces(f, a) == faces(g, b)) ++shared;
      if (shared == 2) total += 1.0 - normal(f).dot(normal(g));
    }
  return total / m;
}

TriMesh folded_pair(Real fold_angle) {
  // two unit-height triangles over a shared unit edge, face 2 folded up
  TriMesh mesh;
  mesh.vertices.resize(4, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0.5, 1, 0, 0.5,
      -std::cos(fold_angle), std::sin(fold_angle);
  mesh.faces.resize(2, 3);
  mesh.faces << 0, 1, 2, 1, 0, 3;
  return mesh;
}

TriMesh equilateral() {
  TriMesh mesh;
  mesh.vertices.resize(3, 3);
  mesh.vertices << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2.0, 0;
  mesh.faces.resize(1, 3);
  mesh.faces << 0, 1, 2;
  return mesh;
}

} // namespace

TEST_CASE("iso_loss is zero under rigid motion") {
  auto gen = rng(4);
  const TriMesh mesh = wrinkled_patch(gen, 5, 4, 0.1);
  const Mat3 R = random_rotation(gen);
  const Vec3 t = random_vec(gen, 1.0);
  const MatX3 moved = (mesh.vertices * R.transpose()).rowwise() + t.transpose();
  CHECK(iso_loss(moved, mesh.vertices, mesh) < 1e-12);
}

TEST_CASE("iso_loss of a doubled unit-edge mesh is exactly 1") {
  const TriMesh mesh = equilateral();
  const MatX3 scaled = mesh.vertices * 2.0;
  CHECK(iso_loss(scaled, mesh.vertices, mesh) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("iso_loss matches the brute-force oracle on random meshes") {
  auto gen = rng(20);
  for (int trial = 0; trial < 20; ++trial) {
    const TriMesh mesh = wrinkled_patch(gen, 5, 4, 0.1); // 20 vertices
    MatX3 current = mesh.vertices;
    for (Index i = 0; i < current.rows(); ++i)
      current.row(i) += random_vec(gen, 0.05).transpose();
    const Real fast = iso_loss(current, mesh.vertices, mesh);
    const Real brute = iso_loss_brute(current, mesh.vertices, mesh.faces);
    CHECK(std::abs(fast - brute) < 1e-12);
    CHECK(fast >= 0.0);
  }
}

TEST_CASE("normal_loss on planar and folded meshes") {
  ScenarioSpec spec;
  spec.nx = 5;
  spec.ny = 5;
  const TriMesh planar = make_cloth_grid(spec);
  CHECK(normal_loss(planar.vertices, planar) == doctest::Approx(0.0).epsilon(1e-15));

  const TriMesh right = folded_pair(M_PI / 2);
  CHECK(normal_loss(right.vertices, right) == doctest::Approx(1.0).epsilon(1e-12));

  const TriMesh sixty = folded_pair(M_PI / 3);
  CHECK(normal_loss(sixty.vertices, sixty) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("normal_loss matches the brute-force oracle and is rigid-invariant") {
  auto gen = rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const TriMesh mesh = wrinkled_patch(gen, 4, 5, 0.1);
    MatX3 current = mesh.vertices;
    for (Index i = 0; i < current.rows(); ++i)
      current.row(i) += random_vec(gen, 0.04).transpose();
    const Real fast = normal_loss(current, mesh);
    CHECK(std::abs(fast - normal_loss_brute(current, mesh.faces)) < 1e-12);

    const Mat3 R = random_rotation(gen);
    const Vec3 t = random_vec(gen, 1.0);
    const MatX3 moved = (current * R.transpose()).rowwise() + t.transpose();
    CHECK(std::abs(normal_loss(moved, mesh) - fast) < 1e-10);
    CHECK(std::abs(iso_loss(moved, mesh.vertices, mesh) -
                   iso_loss(current, mesh.vertices, mesh)) < 1e-10);
  }
}

TEST_CASE("normal_loss raises a singular-element error on degenerate faces") {
  TriMesh mesh = folded_pair(M_PI / 2);
  MatX3 collapsed = mesh.vertices;
  collapsed.row(2) = collapsed.row(0);
  CHECK_THROWS_AS(normal_loss(collapsed, mesh), SingularElementError);
}

TEST_CASE("tracking objective gradient matches finite differences") {
  auto gen = rng(30);
  const TriMesh mesh = wrinkled_patch(gen, 4, 4, 0.08);
  TargetFrame target;
  target.positions = mesh.vertices;
  for (Index i = 0; i < target.positions.rows(); ++i)
    target.positions.row(i) += random_vec(gen, 0.02).transpose();

  TrackingConfig cfg;
  cfg.iso_penalty = IsoPenalty::Squared; // smooth for the FD comparison
  MatX3 x = mesh.vertices;
  for (Index i = 0; i < x.rows(); ++i) x.row(i) += random_vec(gen, 0.01).transpose();

  MatX3 analytic;
  tracking_objective(x, target, mesh.vertices, mesh, cfg, &analytic);
  const MatX3 numeric = fd_gradient_central(x, 1e-7, [&](const MatX3& v) {
    return tracking_objective(v, target, mesh.vertices, mesh, cfg, nullptr);
  });
  CHECK(relative_grad_error(analytic, numeric) < 1e-4);

  SUBCASE("absolute-value penalty gradient away from kinks") {
    TrackingConfig abs_cfg;
    MatX3 y = mesh.vertices * 1.05; // all edges uniformly longer: no kinks
    MatX3 g2;
    tracking_objective(y, target, mesh.vertices, mesh, abs_cfg, &g2);
    const MatX3 n2 = fd_gradient_central(y, 1e-8, [&](const MatX3& v) {
      return tracking_objective(v, target, mesh.vertices, mesh, abs_cfg, nullptr);
    });
    CHECK(relative_grad_error(g2, n2) < 1e-3);
  }
}

TEST_CASE("track_frame is stationary when targets equal the optimum") {
  ScenarioSpec spec;
  spec.nx = 5;
  spec.ny = 5;
  const TriMesh mesh = make_cloth_grid(spec); // flat: normal loss is minimal
  TargetFrame target;
  target.positions = mesh.vertices;

  TrackingConfig cfg;
  const MatX3 out = track_frame(mesh.vertices, target, mesh.vertices, mesh, cfg);
  CHECK((out - mesh.vertices).rowwise().norm().maxCoeff() < 1e-8);
}

TEST_CASE("track_frame converges on noiseless rigid-motion targets") {
  auto gen = rng(41);
  ScenarioSpec spec;
  spec.nx = 6;
  spec.ny = 6;
  const TriMesh mesh = make_cloth_grid(spec);

  Mat3 R = Eigen::AngleAxis<Real>(0.15, Vec3::UnitZ()).toRotationMatrix();
  TargetFrame target;
  target.positions = (mesh.vertices * R.transpose()).rowwise() + Vec3(0.02, 0.01, 0).transpose();

  TrackingConfig cfg;
  cfg.iterations = 400;
  cfg.data_weight = 1e4; // noiseless targets: trust the data term
  const MatX3 out = track_frame(mesh.vertices, target, mesh.vertices, mesh, cfg);
  const Real data_term =
      (out - target.positions).rowwise().squaredNorm().mean();
  CHECK(data_term < 1e-8);

  SUBCASE("objective never increased from the warm start") {
    const Real before =
        tracking_objective(mesh.vertices, target, mesh.vertices, mesh, cfg, nullptr);
    const Real after = tracking_objective(out, target, mesh.vertices, mesh, cfg, nullptr);
    CHECK(after <= before);
  }
}

TEST_CASE("tracking denoises targets and preserves edge lengths") {
  // simulated cloth frame pair: warm start = true previous frame
  ScenarioSpec spec;
  spec.nx = 8;
  spec.ny = 8;
  spec.frames = 10;
  const Reference ref = gen_reference(spec);
  const TriMesh mesh = ref.initial;
  const MatX3& truth_prev = ref.sequence.frames[8];
  const MatX3& truth = ref.sequence.frames[9];

  TrackingConfig cfg; // lambda_iso 10, lambda_normal 0.1
  Real reduction_sum = 0.0;
  Real max_drift = 0.0;
  const int seeds = 3;
  for (int seed = 0; seed < seeds; ++seed) {
    TargetFrame target;
    target.positions =
        truth + gaussian_noise(truth.rows(), 5e-3, 1000 + seed);
    const Real noisy_error = (target.positions - truth).rowwise().norm().mean();

    const MatX3 out = track_frame(truth_prev, target, mesh.vertices, mesh, cfg);
    const Real tracked_error = (out - truth).rowwise().norm().mean();
    reduction_sum += 1.0 - tracked_error / noisy_error;

    // max relative edge drift vs the initial mesh
    const auto rings = vertex_rings(mesh);
    for (Index v = 0; v < mesh.num_vertices(); ++v)
      for (int u : rings[v]) {
        const Real l0 = (mesh.vertices.row(v) - mesh.vertices.row(u)).norm();
        const Real l1 = (out.row(v) - out.row(u)).norm();
        max_drift = std::max(max_drift, std::abs(l1 - l0) / l0);
      }
  }
  CHECK(reduction_sum / seeds >= 0.40);
  CHECK(max_drift <= 0.02);
}

TEST_CASE("track_sequence basics") {
  ScenarioSpec spec;
  spec.nx = 5;
  spec.ny = 5;
  const TriMesh mesh = make_cloth_grid(spec);

  SUBCASE("one target frame gives a two-frame sequence") {
    TargetFrame target;
    target.positions = mesh.vertices;
    const MeshSequence seq = track_sequence(mesh, {target}, {}, 0.04);
    CHECK(seq.num_frames() == 2);
    CHECK(seq.frames[0] == mesh.vertices);
  }

  SUBCASE("noiseless simulated targets are tracked to small error") {
    ScenarioSpec sim_spec;
    sim_spec.nx = 6;
    sim_spec.ny = 6;
    sim_spec.frames = 5;
    const Reference ref = gen_reference(sim_spec);
    std::vector<TargetFrame> targets;
    for (Index t = 1; t < ref.sequence.num_frames(); ++t)
      targets.push_back({ref.sequence.frames[t], VecX()});

    TrackingConfig cfg;
    cfg.iterations = 300;
    cfg.data_weight = 1e4; // noiseless targets: trust the data term
    const MeshSequence tracked = track_sequence(ref.initial, targets, cfg, sim_spec.dt);
    REQUIRE(tracked.num_frames() == ref.sequence.num_frames());
    for (Index t = 1; t < tracked.num_frames(); ++t) {
      const Real err =
          (tracked.frames[t] - ref.sequence.frames[t]).rowwise().norm().mean();
      CHECK(err < 1e-4);
    }

    // round-trip through mesh-core keeps all invariants
    TempDir dir("tracked");
    save_sequence(dir.str(), tracked);
    const MeshSequence loaded = load_sequence(dir.str(), sim_spec.dt);
    TriMesh check;
    check.vertices = loaded.frames.back();
    check.faces = loaded.faces;
    CHECK(validate_mesh(check).ok());
  }
}
