#include "drapefit/tracker.hpp"

#include <cmath>
#include <sstream>

#include "drapefit/error.hpp"

namespace drapefit {

namespace {

Real penalty(Real x, IsoPenalty p) {
  return p == IsoPenalty::Absolute ? std::abs(x) : x * x;
}

Real penalty_smooth(Real x, IsoPenalty p, Real eps) {
  if (p == IsoPenalty::Squared) return x * x;
  return std::sqrt(x * x + eps * eps) - eps;
}

Real penalty_smooth_derivative(Real x, IsoPenalty p, Real eps) {
  if (p == IsoPenalty::Squared) return 2.0 * x;
  return x / std::sqrt(x * x + eps * eps);
}

} // namespace

Real iso_loss(const MatX3& current, const MatX3& initial, const TriMesh& mesh,
              IsoPenalty penalty_kind) {
  if (current.rows() != initial.rows() || current.rows() != mesh.num_vertices())
    throw ValidationError("iso_loss: incongruent vertex arrays");
  const auto rings = vertex_rings(mesh);
  const Index n = mesh.num_vertices();
  Real total = 0.0;
  for (Index v = 0; v < n; ++v) {
    if (rings[v].empty()) continue;
    Real acc = 0.0;
    for (int u : rings[v]) {
      const Real rest_len = (Vec3(initial.row(v)) - Vec3(initial.row(u))).norm();
      const Real len = (Vec3(current.row(v)) - Vec3(current.row(u))).norm();
      acc += penalty(rest_len - len, penalty_kind);
    }
    total += acc / static_cast<Real>(rings[v].size());
  }
  return total / static_cast<Real>(n);
}

Real normal_loss(const MatX3& current, const TriMesh& mesh) {
  if (current.rows() != mesh.num_vertices())
    throw ValidationError("normal_loss: incongruent vertex array");
  const auto adjacency = face_adjacency(mesh);
  const Index m = mesh.num_faces();
  Real total = 0.0;
  for (Index f = 0; f < m; ++f) {
    const Vec3 nf = face_normal_unnormalized(current, mesh.faces, f);
    const Real lf = nf.norm();
    if (0.5 * lf < kMinLiveArea) {
      std::ostringstream ss;
      ss << "face " << f << " is degenerate in the current pose";
      throw SingularElementError(ss.str());
    }
    for (int g : adjacency[f]) {
      const Vec3 ng = face_normal_unnormalized(current, mesh.faces, g);
      const Real lg = ng.norm();
      if (0.5 * lg < kMinLiveArea) {
        std::ostringstream ss;
        ss << "face " << g << " is degenerate in the current pose";
        throw SingularElementError(ss.str());
      }
      total += 1.0 - nf.dot(ng) / (lf * lg);
    }
  }
  return total / static_cast<Real>(m);
}

namespace {

// d(normal_loss)/dV. The loss sums over ordered adjacent pairs, so each
// unordered pair appears twice; differentiating through the first face's
// normal per ordered pair therefore needs a factor 2 to cover both
// appearances.
void normal_loss_gradient(const MatX3& current, const TriMesh& mesh,
                          const std::vector<std::vector<int>>& adjacency, MatX3& grad) {
  const Index m = mesh.num_faces();
  const Real scale = 2.0 / static_cast<Real>(m);
  for (Index f = 0; f < m; ++f) {
    const Vec3 nf = face_normal_unnormalized(current, mesh.faces, f);
    const Real lf = nf.norm();
    const Vec3 nfh = nf / lf;
    const Mat3 proj = Mat3::Identity() - nfh * nfh.transpose();
    for (int g : adjacency[f]) {
      const Vec3 ngh = face_normal_unnormalized(current, mesh.faces, g).normalized();
      const Vec3 w = proj * ngh / lf;
      // dN/da = (c - b) x delta for each vertex a with opposite edge (b, c).
      for (int c = 0; c < 3; ++c) {
        const Vec3 vb = current.row(mesh.faces(f, (c + 1) % 3));
        const Vec3 vc = current.row(mesh.faces(f, (c + 2) % 3));
        grad.row(mesh.faces(f, c)) -= scale * w.cross(vc - vb);
      }
    }
  }
}

// Smoothed isometry term used by the optimizer (value and gradient must
// agree for the monotone line search).
Real iso_loss_smooth(const MatX3& current, const MatX3& initial, const TriMesh& mesh,
                     const std::vector<std::vector<int>>& rings, IsoPenalty kind,
                     Real eps, MatX3* grad) {
  const Index n = mesh.num_vertices();
  const Real scale = 1.0 / static_cast<Real>(n);
  Real total = 0.0;
  for (Index v = 0; v < n; ++v) {
    if (rings[v].empty()) continue;
    const Real ring_w = scale / static_cast<Real>(rings[v].size());
    for (int u : rings[v]) {
      const Vec3 diff = Vec3(current.row(v)) - Vec3(current.row(u));
      const Real len = diff.norm();
      const Real rest_len = (Vec3(initial.row(v)) - Vec3(initial.row(u))).norm();
      total += ring_w * penalty_smooth(rest_len - len, kind, eps);
      if (!grad || len < 1e-14) continue;
      const Vec3 dlen = diff / len;
      const Vec3 g = -penalty_smooth_derivative(rest_len - len, kind, eps) * ring_w * dlen;
      grad->row(v) += g;
      grad->row(u) -= g;
    }
  }
  return total;
}

} // namespace

Real tracking_objective(const MatX3& current, const TargetFrame& target,
                        const MatX3& initial, const TriMesh& mesh,
                        const TrackingConfig& cfg, MatX3* grad) {
  const Index n = mesh.num_vertices();
  if (target.positions.rows() != n)
    throw ValidationError("target frame incongruent with mesh");
  if (target.confidence.size() != 0 && target.confidence.size() != n)
    throw ValidationError("confidence array incongruent with mesh");

  Real data = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Real conf = target.confidence.size() ? target.confidence[i] : 1.0;
    data += conf * (Vec3(current.row(i)) - Vec3(target.positions.row(i))).squaredNorm();
  }
  data /= static_cast<Real>(n);

  Real total = cfg.data_weight * data;

  if (grad) {
    grad->setZero(n, 3);
    for (Index i = 0; i < n; ++i) {
      const Real conf = target.confidence.size() ? target.confidence[i] : 1.0;
      grad->row(i) = cfg.data_weight * 2.0 * conf / static_cast<Real>(n) *
                     (Vec3(current.row(i)) - Vec3(target.positions.row(i)));
    }
  }

  if (cfg.lambda_iso > 0.0) {
    const auto rings = vertex_rings(mesh);
    MatX3 gi;
    if (grad) gi.setZero(n, 3);
    const Real iso = iso_loss_smooth(current, initial, mesh, rings, cfg.iso_penalty,
                                     cfg.iso_smooth, grad ? &gi : nullptr);
    total += cfg.lambda_iso * iso;
    if (grad) *grad += cfg.lambda_iso * gi;
  }

  if (cfg.lambda_normal > 0.0) {
    total += cfg.lambda_normal * normal_loss(current, mesh);
    if (grad) {
      const auto adjacency = face_adjacency(mesh);
      MatX3 gn = MatX3::Zero(n, 3);
      normal_loss_gradient(current, mesh, adjacency, gn);
      *grad += cfg.lambda_normal * gn;
    }
  }

  if (!std::isfinite(total)) throw NumericError("non-finite tracking objective");
  return total;
}

// Monotone normalized gradient descent with an adaptive step length.
// Sign-normalized (Adam-style) proposals deadlock here: they perturb every
// coordinate by the full step regardless of gradient magnitude, which
// stretches edges at first order against the absolute-value isometry term,
// so no backtracked step ever decreases the objective. The raw gradient
// field is spatially smooth and edge-preserving to first order, so plain
// descent with step growth/backtracking converges instead.
MatX3 track_frame(const MatX3& previous, const TargetFrame& target,
                  const MatX3& initial, const TriMesh& mesh, const TrackingConfig& cfg) {
  MatX3 x = previous;

  auto objective_value = [&](const MatX3& v, Real& out) {
    try {
      out = tracking_objective(v, target, initial, mesh, cfg, nullptr);
      return true;
    } catch (const Error&) {
      return false;
    }
  };

  Real current_obj = tracking_objective(x, target, initial, mesh, cfg, nullptr);
  Real step = cfg.step_size; // meters moved by the largest-gradient vertex

  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    MatX3 grad;
    tracking_objective(x, target, initial, mesh, cfg, &grad);
    const Real gmax = grad.cwiseAbs().maxCoeff();
    if (gmax < 1e-16) break;
    const MatX3 direction = -grad / gmax;

    step = std::min(step * 2.0, 1.0); // optimistic growth, then backtrack
    bool accepted = false;
    while (step > 1e-16) {
      Real trial_obj = 0.0;
      if (objective_value(x + step * direction, trial_obj) && trial_obj <= current_obj) {
        x += step * direction;
        current_obj = trial_obj;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break; // no decrease at any scale: at a (kink) minimum
  }
  return x;
}

MeshSequence track_sequence(const TriMesh& initial,
                            const std::vector<TargetFrame>& targets,
                            const TrackingConfig& cfg, Real dt) {
  require_valid(initial);
  MeshSequence seq;
  seq.faces = initial.faces;
  seq.dt = dt;
  seq.frames.push_back(initial.vertices);

  MatX3 previous = initial.vertices;
  for (size_t t = 0; t < targets.size(); ++t) {
    try {
      previous = track_frame(previous, targets[t], initial.vertices, initial, cfg);
    } catch (const Error& err) {
      throw Error("target frame " + std::to_string(t) + ": " + err.what());
    }
    seq.frames.push_back(previous);
  }
  return seq;
}

} // namespace drapefit
