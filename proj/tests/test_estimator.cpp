#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "drapefit/error.hpp"
#include "drapefit/estimator.hpp"
#include "drapefit/parallel.hpp"
#include "drapefit/synthetic.hpp"
#include "drapefit/text_io.hpp"
#include "test_utils.hpp"

using namespace drapefit;
using namespace drapefit::testing;

namespace {

EstimationConfig quick_config() {
  EstimationConfig cfg;
  cfg.parallel_evals = false;
  return cfg;
}

ScenarioSpec tiny_scenario() {
  ScenarioSpec spec;
  spec.nx = 6;
  spec.ny = 6;
  spec.width = 0.3;
  spec.height = 0.3;
  spec.frames = 8;
  spec.truth = PhysicsParams{400.0, 1.0, 0.5};
  return spec;
}

} // namespace

TEST_CASE("forward difference on the quadratic surrogate has bias exactly +delta") {
  const LossFn quad = [](const PhysicsParams& p) {
    return (p.rho - 300.0) * (p.rho - 300.0);
  };
  EstimationConfig cfg = quick_config();
  PhysicsParams params;
  params.rho = 200.0;

  Real baseline = 0.0;
  const Vec3 grad = fd_gradient(quad, params, cfg, &baseline);
  CHECK(grad[0] == -195.0); // true derivative -200, bias +delta = +5
  CHECK(grad[1] == 0.0);
  CHECK(grad[2] == 0.0);
  CHECK(baseline == 10000.0);

  SUBCASE("the signed error is +delta for every parameter") {
    const PhysicsParams at{300.0, 2.0, 3.0};
    const LossFn q_rho = [](const PhysicsParams& p) { return (p.rho - 350.0) * (p.rho - 350.0); };
    const LossFn q_ks = [](const PhysicsParams& p) { return (p.kappa_s - 1.0) * (p.kappa_s - 1.0); };
    const LossFn q_kb = [](const PhysicsParams& p) { return (p.kappa_b - 1.0) * (p.kappa_b - 1.0); };
    CHECK(fd_gradient(q_rho, at, cfg)[0] ==
          doctest::Approx(2.0 * (at.rho - 350.0) + cfg.delta_rho).epsilon(1e-12));
    CHECK(fd_gradient(q_ks, at, cfg)[1] ==
          doctest::Approx(2.0 * (at.kappa_s - 1.0) + cfg.delta_kappa_s).epsilon(1e-12));
    CHECK(fd_gradient(q_kb, at, cfg)[2] ==
          doctest::Approx(2.0 * (at.kappa_b - 1.0) + cfg.delta_kappa_b).epsilon(1e-12));
  }
}

TEST_CASE("forward difference is exact on affine and constant surrogates") {
  EstimationConfig cfg = quick_config();
  const PhysicsParams params{350.0, 2.0, 2.0};

  const LossFn constant = [](const PhysicsParams&) { return 7.5; };
  CHECK(fd_gradient(constant, params, cfg) == Vec3::Zero());

  const LossFn linear = [](const PhysicsParams& p) { return 2.0 * p.rho; };
  CHECK(fd_gradient(linear, params, cfg)[0] == 2.0);

  SUBCASE("exactness holds for any delta") {
    cfg.delta_rho = 1.7;
    CHECK(fd_gradient(linear, params, cfg)[0] == doctest::Approx(2.0).epsilon(1e-12));
  }
}

TEST_CASE("perturbations at the range boundary switch to backward differences") {
  EstimationConfig cfg = quick_config();
  PhysicsParams params;
  params.rho = 640.0; // rho + 5 would leave the range
  const LossFn quad = [](const PhysicsParams& p) {
    return (p.rho - 300.0) * (p.rho - 300.0);
  };
  bool clamped = false;
  const Vec3 grad = fd_gradient(quad, params, cfg, nullptr, &clamped);
  CHECK(clamped);
  // backward difference of the quadratic: signed error is -delta
  CHECK(grad[0] == doctest::Approx(2.0 * (640.0 - 300.0) - 5.0).epsilon(1e-12));
}

TEST_CASE("exactly four loss evaluations per gradient call") {
  EstimationConfig cfg = quick_config();
  int calls = 0;
  const LossFn counting = [&calls](const PhysicsParams& p) {
    ++calls;
    return p.rho + p.kappa_s + p.kappa_b;
  };
  fd_gradient(counting, PhysicsParams{300.0, 1.0, 1.0}, cfg);
  CHECK(calls == 4);
}

TEST_CASE("adam_update closed-form first step") {
  EstimationConfig cfg = quick_config();
  cfg.adam_rho = AdamParams{0.01};
  cfg.adam_kappa_s = AdamParams{0.01};
  cfg.adam_kappa_b = AdamParams{0.01};

  AdamState state;
  const PhysicsParams params{300.0, 1.0, 1.0};
  const PhysicsParams next = adam_update(state, Vec3(10.0, 0.0, 0.0), params, cfg);
  // bias correction makes the first step -lr * g/(|g| + eps)
  CHECK(next.rho == doctest::Approx(300.0 - 0.01).epsilon(1e-8));
  CHECK(next.kappa_s == 1.0);
  CHECK(next.kappa_b == 1.0);
  CHECK(state.step_count == 1);

  SUBCASE("zero gradient with zero moments leaves parameters unchanged") {
    AdamState fresh;
    const PhysicsParams out = adam_update(fresh, Vec3::Zero(), params, cfg);
    CHECK(out.rho == params.rho);
    CHECK(out.kappa_s == params.kappa_s);
    CHECK(out.kappa_b == params.kappa_b);
  }
  SUBCASE("updates clamp to the legal ranges") {
    AdamState fresh;
    PhysicsParams high{640.0, 8.0, 8.0};
    // negative gradient pushes parameters upward
    const PhysicsParams out = adam_update(fresh, Vec3(-5.0, -5.0, -5.0), high, cfg);
    CHECK(out.rho == 640.0);
    CHECK(out.kappa_s == 8.0);
    CHECK(out.kappa_b == 8.0);
  }
  SUBCASE("non-finite gradients raise a numeric error") {
    AdamState fresh;
    CHECK_THROWS_AS(
        adam_update(fresh, Vec3(std::nan(""), 0.0, 0.0), params, cfg),
        NumericError);
  }
}

TEST_CASE("estimate_parameters with zero budget returns the initial params") {
  EstimationConfig cfg = quick_config();
  cfg.iterations = 0;
  const LossFn loss = [](const PhysicsParams& p) { return p.rho; };
  const auto [params, trace] = estimate_parameters(PhysicsParams{420.0, 2.0, 3.0}, loss, cfg);
  CHECK(params.rho == 420.0);
  CHECK(trace.records.empty());
}

TEST_CASE("estimate_parameters minimizes a convex surrogate and returns the best") {
  EstimationConfig cfg = quick_config();
  cfg.iterations = 60;
  const LossFn loss = [](const PhysicsParams& p) {
    const Real dr = (p.rho - 420.0) / 100.0;
    const Real ds = p.kappa_s - 1.5;
    const Real db = p.kappa_b - 0.7;
    return dr * dr + ds * ds + db * db;
  };
  const auto [best, trace] = estimate_parameters(PhysicsParams{250.0, 4.0, 4.0}, loss, cfg);
  REQUIRE(trace.records.size() == 60);
  CHECK(loss(best) < 0.05 * trace.records.front().loss);
  CHECK(std::abs(best.rho - 420.0) < 40.0);
  CHECK(std::abs(best.kappa_s - 1.5) < 0.3);
  CHECK(std::abs(best.kappa_b - 0.7) < 0.3);

  // the reported parameters are the argmin over the trace
  const IterationRecord* rec = trace.best();
  REQUIRE(rec != nullptr);
  CHECK(rec->params.rho == best.rho);
  Real running = std::numeric_limits<Real>::infinity();
  for (const auto& r : trace.records) {
    running = std::min(running, r.loss);
    CHECK(running <= r.loss);
  }
  CHECK(rec->loss == running);

  SUBCASE("every traced parameter stays within the legal ranges") {
    for (const auto& r : trace.records) CHECK(r.params.in_range());
  }
}

TEST_CASE("estimation failure preserves the partial trace and iteration index") {
  EstimationConfig cfg = quick_config();
  cfg.iterations = 10;
  int calls = 0;
  const LossFn flaky = [&calls](const PhysicsParams& p) {
    if (++calls == 9) throw SolverError("synthetic blow-up", 1.0);
    return p.rho;
  };
  EstimationTrace partial;
  try {
    estimate_parameters(PhysicsParams{300.0, 1.0, 1.0}, flaky, cfg, &partial);
    FAIL("expected SolverError");
  } catch (const SolverError& err) {
    CHECK(std::string(err.what()).find("iteration 2") != std::string::npos);
  }
  CHECK(partial.records.size() == 2); // iterations 0 and 1 completed
}

TEST_CASE("sim_loss self-consistency: truth params reproduce the reference") {
  const ScenarioSpec spec = tiny_scenario();
  const Reference ref = gen_reference(spec);

  EstimationConfig cfg = quick_config();
  cfg.frames = spec.frames;
  cfg.step = spec.step;

  const Real loss = sim_loss(spec.truth, ref.sequence, ref.boundary, ref.colliders, cfg);
  CHECK(loss < 1e-12);

  SUBCASE("perturbed parameters produce a strictly positive loss") {
    PhysicsParams off = spec.truth;
    off.rho = 250.0;
    off.kappa_b = 4.0;
    CHECK(sim_loss(off, ref.sequence, ref.boundary, ref.colliders, cfg) > 1e-10);
  }
}

TEST_CASE("default training window is 24 frames") {
  CHECK(EstimationConfig{}.frames == 24);
  CHECK(EstimationConfig{}.iterations == 100);
  CHECK(EstimationConfig{}.delta_rho == 5.0);
  CHECK(EstimationConfig{}.delta_kappa_s == 0.05);
  CHECK(EstimationConfig{}.delta_kappa_b == 0.05);
}

TEST_CASE("estimation from truth stays at the optimum") {
  const ScenarioSpec spec = tiny_scenario();
  const Reference ref = gen_reference(spec);

  EstimationConfig cfg = quick_config();
  cfg.frames = spec.frames;
  cfg.step = spec.step;
  cfg.iterations = 3;

  const auto [best, trace] =
      estimate_parameters(spec.truth, ref.sequence, ref.boundary, ref.colliders, cfg);
  REQUIRE(trace.records.size() == 3);
  CHECK(trace.records.front().loss < 1e-12);
  // parameters hover near truth within the Adam step floor
  for (const auto& r : trace.records) {
    CHECK(std::abs(r.params.rho - spec.truth.rho) <= 3 * cfg.adam_rho.lr);
    CHECK(std::abs(r.params.kappa_s - spec.truth.kappa_s) <= 3 * cfg.adam_kappa_s.lr);
    CHECK(std::abs(r.params.kappa_b - spec.truth.kappa_b) <= 3 * cfg.adam_kappa_b.lr);
  }
  CHECK(trace.best()->loss < 1e-12);
}

TEST_CASE("estimation trace is identical under sequential and parallel evaluation") {
  const ScenarioSpec spec = tiny_scenario();
  const Reference ref = gen_reference(spec);

  EstimationConfig cfg;
  cfg.frames = spec.frames;
  cfg.step = spec.step;
  cfg.iterations = 4;

  cfg.parallel_evals = false;
  set_thread_count(1);
  const auto [pa, ta] =
      estimate_parameters(PhysicsParams{300.0, 2.0, 2.0}, ref.sequence, ref.boundary,
                          ref.colliders, cfg);
  cfg.parallel_evals = true;
  set_thread_count(4);
  const auto [pb, tb] =
      estimate_parameters(PhysicsParams{300.0, 2.0, 2.0}, ref.sequence, ref.boundary,
                          ref.colliders, cfg);
  set_thread_count(1);

  REQUIRE(ta.records.size() == tb.records.size());
  for (size_t i = 0; i < ta.records.size(); ++i) {
    CHECK(ta.records[i].loss == tb.records[i].loss); // bit-identical
    CHECK(ta.records[i].params.rho == tb.records[i].params.rho);
    CHECK(ta.records[i].params.kappa_s == tb.records[i].params.kappa_s);
    CHECK(ta.records[i].params.kappa_b == tb.records[i].params.kappa_b);
  }
  CHECK(pa.rho == pb.rho);
  CHECK(pa.kappa_s == pb.kappa_s);
  CHECK(pa.kappa_b == pb.kappa_b);
}

TEST_CASE("trace CSV: header-only when empty, one row per record otherwise") {
  TempDir dir("trace");
  EstimationTrace trace;
  const std::string path = dir.str() + "/trace.csv";
  write_trace_csv(path, trace);
  CHECK(read_file(path) == "iter,rho,kappa_s,kappa_b,loss,seconds\n");

  for (int i = 0; i < 5; ++i) {
    IterationRecord rec;
    rec.iter = i;
    rec.params = PhysicsParams{300.0 + i, 1.0, 1.0};
    rec.loss = 1.0 / (i + 1);
    rec.seconds = 0.25;
    trace.records.push_back(rec);
  }
  write_trace_csv(path, trace);
  const std::string content = read_file(path);
  CHECK(std::count(content.begin(), content.end(), '\n') == 6);
  write_trace_csv(path, trace); // idempotent overwrite
  CHECK(read_file(path) == content);
}
