#include "drapefit/estimator.hpp"

#include <chrono>
#include <cmath>
#include <future>
#include <sstream>

#include "drapefit/error.hpp"
#include "drapefit/parallel.hpp"
#include "drapefit/text_io.hpp"

namespace drapefit {

const IterationRecord* EstimationTrace::best() const {
  const IterationRecord* out = nullptr;
  for (const auto& rec : records)
    if (!out || rec.loss < out->loss) out = &rec;
  return out;
}

Real sim_loss(const PhysicsParams& params, const MeshSequence& reference,
              const BoundaryTrack& boundary, const ColliderSet& colliders,
              const EstimationConfig& cfg) {
  const int T = cfg.frames;
  if (T < 2) throw ValidationError("training window must cover at least 2 frames");
  if (reference.num_frames() < T)
    throw ValidationError("reference sequence has " +
                          std::to_string(reference.num_frames()) + " frames, need " +
                          std::to_string(T));

  TriMesh initial;
  initial.vertices = reference.frames[0];
  initial.faces = reference.faces;

  StepConfig step_cfg = cfg.step;
  step_cfg.dt = reference.dt;
  const MeshSequence simulated =
      simulate_sequence(initial, boundary, colliders, params, step_cfg, T - 1);

  MeshSequence ref_window;
  ref_window.faces = reference.faces;
  ref_window.dt = reference.dt;
  ref_window.frames.assign(reference.frames.begin(), reference.frames.begin() + T);
  return mean_squared_vertex_error(simulated, ref_window);
}

LossFn make_sim_loss(const MeshSequence& reference, const BoundaryTrack& boundary,
                     const ColliderSet& colliders, const EstimationConfig& cfg) {
  return [&reference, &boundary, &colliders, cfg](const PhysicsParams& params) {
    try {
      return sim_loss(params, reference, boundary, colliders, cfg);
    } catch (const Error& err) {
      throw SolverError("simulation loss failed at " + params.describe() + ": " +
                            err.what(),
                        0.0);
    }
  };
}

Vec3 fd_gradient(const LossFn& loss, const PhysicsParams& params,
                 const EstimationConfig& cfg, Real* baseline, bool* clamped) {
  require_in_range(params);
  const Real deltas[3] = {cfg.delta_rho, cfg.delta_kappa_s, cfg.delta_kappa_b};
  const Real maxima[3] = {PhysicsParams::kRhoMax, PhysicsParams::kKappaMax,
                          PhysicsParams::kKappaMax};
  for (Real d : deltas)
    if (!(d > 0.0)) throw ValidationError("finite-difference steps must be > 0");

  bool any_clamped = false;
  // One perturbed parameter set per component; backward difference when the
  // forward point would leave the legal range.
  PhysicsParams perturbed[3] = {params, params, params};
  Real signs[3];
  Real* fields[3] = {&perturbed[0].rho, &perturbed[1].kappa_s, &perturbed[2].kappa_b};
  const Real values[3] = {params.rho, params.kappa_s, params.kappa_b};
  for (int j = 0; j < 3; ++j) {
    if (values[j] + deltas[j] <= maxima[j]) {
      *fields[j] = values[j] + deltas[j];
      signs[j] = 1.0;
    } else {
      *fields[j] = values[j] - deltas[j];
      signs[j] = -1.0;
      any_clamped = true;
    }
  }

  const char* names[3] = {"rho", "kappa_s", "kappa_b"};
  auto eval = [&](int which) -> Real { // -1 = baseline
    try {
      return loss(which < 0 ? params : perturbed[which]);
    } catch (const SolverError&) {
      throw;
    } catch (const Error& err) {
      const std::string tag =
          which < 0 ? "baseline" : std::string("perturbed ") + names[which];
      throw SolverError("loss evaluation (" + tag + ") failed: " + err.what(), 0.0);
    }
  };

  Real base = 0.0, shifted[3];
  if (cfg.parallel_evals && thread_count() > 1) {
    auto fb = std::async(std::launch::async, eval, -1);
    std::future<Real> fp[3];
    for (int j = 0; j < 3; ++j) fp[j] = std::async(std::launch::async, eval, j);
    base = fb.get();
    for (int j = 0; j < 3; ++j) shifted[j] = fp[j].get();
  } else {
    base = eval(-1);
    for (int j = 0; j < 3; ++j) shifted[j] = eval(j);
  }

  Vec3 grad;
  for (int j = 0; j < 3; ++j)
    grad[j] = signs[j] * (shifted[j] - base) / deltas[j];

  if (baseline) *baseline = base;
  if (clamped) *clamped = any_clamped;
  return grad;
}

PhysicsParams adam_update(AdamState& state, const Vec3& gradient,
                          const PhysicsParams& params, const EstimationConfig& cfg) {
  if (!gradient.allFinite())
    throw NumericError("non-finite gradient in Adam update");

  const AdamParams hp[3] = {cfg.adam_rho, cfg.adam_kappa_s, cfg.adam_kappa_b};
  state.step_count += 1;
  const int t = state.step_count;

  Real updated[3] = {params.rho, params.kappa_s, params.kappa_b};
  for (int j = 0; j < 3; ++j) {
    state.m[j] = hp[j].beta1 * state.m[j] + (1.0 - hp[j].beta1) * gradient[j];
    state.v[j] = hp[j].beta2 * state.v[j] + (1.0 - hp[j].beta2) * gradient[j] * gradient[j];
    const Real m_hat = state.m[j] / (1.0 - std::pow(hp[j].beta1, t));
    const Real v_hat = state.v[j] / (1.0 - std::pow(hp[j].beta2, t));
    updated[j] -= hp[j].lr * m_hat / (std::sqrt(v_hat) + hp[j].eps);
  }

  PhysicsParams next;
  next.rho = updated[0];
  next.kappa_s = updated[1];
  next.kappa_b = updated[2];
  return next.clamped();
}

std::pair<PhysicsParams, EstimationTrace>
estimate_parameters(const PhysicsParams& init, const LossFn& loss,
                    const EstimationConfig& cfg, EstimationTrace* partial) {
  require_in_range(init);
  EstimationTrace trace;
  if (cfg.iterations <= 0) return {init, trace};

  AdamState adam;
  PhysicsParams params = init;
  using Clock = std::chrono::steady_clock;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const auto t0 = Clock::now();
    Real baseline = 0.0;
    bool clamped = false;
    Vec3 grad;
    try {
      grad = fd_gradient(loss, params, cfg, &baseline, &clamped);
    } catch (const SolverError& err) {
      if (partial) *partial = trace;
      throw SolverError("iteration " + std::to_string(iter) + ": " + err.what(),
                        err.residual());
    }

    IterationRecord rec;
    rec.iter = iter;
    rec.params = params;
    rec.loss = baseline;
    rec.clamped_eval = clamped;
    rec.seconds = std::chrono::duration<Real>(Clock::now() - t0).count();
    trace.records.push_back(rec);

    params = adam_update(adam, grad, params, cfg);
  }

  if (partial) *partial = trace;
  const IterationRecord* best = trace.best();
  return {best ? best->params : init, trace};
}

std::pair<PhysicsParams, EstimationTrace>
estimate_parameters(const PhysicsParams& init, const MeshSequence& reference,
                    const BoundaryTrack& boundary, const ColliderSet& colliders,
                    const EstimationConfig& cfg) {
  return estimate_parameters(init, make_sim_loss(reference, boundary, colliders, cfg),
                             cfg);
}

void write_trace_csv(const std::string& path, const EstimationTrace& trace) {
  std::ostringstream out;
  out << "iter,rho,kappa_s,kappa_b,loss,seconds\n";
  for (const auto& rec : trace.records)
    out << rec.iter << ',' << format_real(rec.params.rho) << ','
        << format_real(rec.params.kappa_s) << ',' << format_real(rec.params.kappa_b)
        << ',' << format_real(rec.loss) << ',' << format_real(rec.seconds) << '\n';
  write_file(path, out.str());
}

} // namespace drapefit
