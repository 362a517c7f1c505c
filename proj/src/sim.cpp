#include "drapefit/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "drapefit/error.hpp"
#include "drapefit/obj_io.hpp"
#include "drapefit/text_io.hpp"

namespace drapefit {

BoundaryTrack load_boundary_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  int lineno = 0;
  // rows: frame,vertex,x,y,z (header optional)
  struct Row {
    long frame, vertex;
    Vec3 p;
  };
  std::vector<Row> rows;
  long max_frame = -1;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    const auto tok = split_char(s, ',');
    if (lineno == 1 && !tok.empty() && tok[0] == "frame") continue;
    if (tok.size() != 5)
      throw MalformedFileError(path, lineno, "expected frame,vertex,x,y,z");
    Row r;
    if (!parse_int(tok[0], r.frame) || !parse_int(tok[1], r.vertex) || r.frame < 0 ||
        r.vertex < 0)
      throw MalformedFileError(path, lineno, "bad frame or vertex index");
    for (int k = 0; k < 3; ++k)
      if (!parse_real(tok[k + 2], r.p[k]))
        throw MalformedFileError(path, lineno, "bad coordinate `" + tok[k + 2] + "`");
    max_frame = std::max(max_frame, r.frame);
    rows.push_back(r);
  }

  BoundaryTrack track;
  std::vector<int> order; // first-appearance order of vertex indices
  for (const auto& r : rows)
    if (std::find(order.begin(), order.end(), static_cast<int>(r.vertex)) == order.end())
      order.push_back(static_cast<int>(r.vertex));
  track.indices = order;
  track.prescribed.assign(max_frame + 1, MatX3::Zero(order.size(), 3));
  std::vector<std::vector<bool>> seen(max_frame + 1,
                                      std::vector<bool>(order.size(), false));
  for (const auto& r : rows) {
    const auto slot = std::distance(
        order.begin(), std::find(order.begin(), order.end(), static_cast<int>(r.vertex)));
    track.prescribed[r.frame].row(slot) = r.p;
    seen[r.frame][slot] = true;
  }
  for (long t = 0; t <= max_frame; ++t)
    for (size_t s = 0; s < order.size(); ++s)
      if (!seen[t][s])
        throw ValidationError(path + ": vertex " + std::to_string(order[s]) +
                              " missing at frame " + std::to_string(t));
  return track;
}

void save_boundary_csv(const std::string& path, const BoundaryTrack& track) {
  std::ostringstream out;
  out << "frame,vertex,x,y,z\n";
  for (Index t = 0; t < track.num_frames(); ++t)
    for (size_t s = 0; s < track.indices.size(); ++s)
      out << t << ',' << track.indices[s] << ','
          << format_real(track.prescribed[t](s, 0)) << ','
          << format_real(track.prescribed[t](s, 1)) << ','
          << format_real(track.prescribed[t](s, 2)) << '\n';
  write_file(path, out.str());
}

namespace {

// Incremental potential value over free vertices; false when the candidate
// is not evaluable (collapsed element or collider penetration).
bool ip_value(const MatX3& x, const MatX3& inertia_target, const RestState& rest,
              const PhysicsParams& params, const std::vector<Primitive>& prims,
              const std::vector<char>& is_free, Real inv_2dt2, bool with_gravity,
              Real& value) {
  Real elastic = 0.0;
  if (!total_energy_value(x, rest, params, prims, elastic, with_gravity)) return false;
  Real inertia = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    if (!is_free[i]) continue;
    inertia += rest.vertex_mass[i] *
               (Vec3(x.row(i)) - Vec3(inertia_target.row(i))).squaredNorm();
  }
  value = inv_2dt2 * inertia + elastic;
  return true;
}

} // namespace

SimState step(const SimState& state, const RestState& rest,
              const std::vector<int>& dirichlet, const MatX3& boundary_next,
              const std::vector<Primitive>& colliders_next,
              const PhysicsParams& params, const StepConfig& cfg, StepStats* stats) {
  const Index n = state.positions.rows();
  if (rest.num_vertices() != n)
    throw ValidationError("state incongruent with rest topology");
  if (static_cast<Index>(dirichlet.size()) != boundary_next.rows())
    throw ValidationError("boundary positions do not match Dirichlet index count");

  std::vector<char> is_free(n, 1);
  for (int idx : dirichlet) {
    if (idx < 0 || idx >= n)
      throw ValidationError("Dirichlet index " + std::to_string(idx) + " out of range");
    is_free[idx] = 0;
  }

  // Free-dof numbering.
  std::vector<Index> dof_slot(n, -1);
  Index num_free = 0;
  for (Index i = 0; i < n; ++i)
    if (is_free[i]) dof_slot[i] = num_free++;

  const Real dt = cfg.dt;
  const Real inv_dt2 = 1.0 / (dt * dt);

  MatX3 x = state.positions;
  for (size_t s = 0; s < dirichlet.size(); ++s)
    x.row(dirichlet[s]) = boundary_next.row(s);

  // Inertia target x~ = V_t + dt V'_t (free vertices only).
  MatX3 inertia_target = state.positions + dt * state.velocities;

  // Verifies the entry state is penetration-free (throws otherwise).
  {
    MatX3 tmp;
    (void)contact_energy_grad(x, colliders_next, tmp);
  }

  Real residual = 0.0;
  int iters = 0;
  bool converged = false;

  for (; iters <= cfg.max_newton_iters; ++iters) {
    // Gradient of the incremental potential on free dofs.
    EnergyTerms terms = evaluate_energies(x, rest, params, colliders_next,
                                          cfg.enable_gravity);
    MatX3 grad = terms.membrane_grad + terms.bending_grad + terms.gravity_grad +
                 terms.contact_grad;
    for (Index i = 0; i < n; ++i) {
      if (!is_free[i]) continue;
      grad.row(i) += rest.vertex_mass[i] * inv_dt2 *
                     (Vec3(x.row(i)) - Vec3(inertia_target.row(i)));
    }

    residual = 0.0;
    for (Index i = 0; i < n; ++i)
      if (is_free[i]) residual = std::max(residual, grad.row(i).cwiseAbs().maxCoeff());

    if (residual < cfg.newton_tol) {
      converged = true;
      break;
    }
    if (iters == cfg.max_newton_iters) break;

    // Newton system on free dofs (SPD: PSD elements + positive mass).
    std::vector<Triplet> full;
    append_hessian_triplets(x, rest, params, colliders_next, full);
    std::vector<Triplet> reduced;
    reduced.reserve(full.size() + 3 * num_free);
    for (const auto& t : full) {
      const Index vi = t.row() / 3, vj = t.col() / 3;
      if (!is_free[vi] || !is_free[vj]) continue;
      reduced.emplace_back(3 * dof_slot[vi] + t.row() % 3,
                           3 * dof_slot[vj] + t.col() % 3, t.value());
    }
    for (Index i = 0; i < n; ++i) {
      if (!is_free[i]) continue;
      for (int c = 0; c < 3; ++c)
        reduced.emplace_back(3 * dof_slot[i] + c, 3 * dof_slot[i] + c,
                             rest.vertex_mass[i] * inv_dt2);
    }

    SparseMat H(3 * num_free, 3 * num_free);
    H.setFromTriplets(reduced.begin(), reduced.end());
    VecX rhs(3 * num_free);
    for (Index i = 0; i < n; ++i)
      if (is_free[i])
        for (int c = 0; c < 3; ++c) rhs[3 * dof_slot[i] + c] = -grad(i, c);

    Eigen::SimplicialLDLT<SparseMat> solver(H);
    if (solver.info() != Eigen::Success)
      throw SolverError("Newton linear solve failed (factorization)", residual);
    const VecX p = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
      throw SolverError("Newton linear solve failed (substitution)", residual);

    // Backtracking line search, filtered on evaluability and penetration.
    Real ip_current = 0.0;
    if (!ip_value(x, inertia_target, rest, params, colliders_next, is_free, 0.5 * inv_dt2,
                  cfg.enable_gravity, ip_current))
      throw SolverError("incremental potential not evaluable at current iterate",
                        residual);

    Real alpha = 1.0;
    bool accepted = false;
    MatX3 candidate = x;
    while (alpha > 1e-16) {
      for (Index i = 0; i < n; ++i)
        if (is_free[i])
          candidate.row(i) = x.row(i) + alpha * Eigen::Matrix<Real, 1, 3>(
                                            p[3 * dof_slot[i]], p[3 * dof_slot[i] + 1],
                                            p[3 * dof_slot[i] + 2]);
      Real ip_candidate = 0.0;
      if (ip_value(candidate, inertia_target, rest, params, colliders_next, is_free,
                   0.5 * inv_dt2, cfg.enable_gravity, ip_candidate) &&
          ip_candidate <= ip_current) {
        x = candidate;
        accepted = true;
        break;
      }
      alpha *= cfg.line_search_shrink;
    }
    if (!accepted)
      throw SolverError("line search failed to find a decreasing step", residual);
  }

  if (!converged) {
    std::ostringstream ss;
    ss << "Newton did not reach tolerance " << cfg.newton_tol << " within "
       << cfg.max_newton_iters << " iterations (residual " << residual << ")";
    throw SolverError(ss.str(), residual);
  }

  SimState next;
  next.positions = x;
  next.velocities = (x - state.positions) / dt;
  next.time_index = state.time_index + 1;

  if (stats) {
    stats->newton_iters = iters;
    stats->residual = residual;
    stats->min_collider_distance = min_collider_distance(x, colliders_next);
    Real elastic = 0.0;
    total_energy_value(x, rest, params, colliders_next, elastic, cfg.enable_gravity);
    stats->energy = elastic;
  }
  return next;
}

MeshSequence simulate_sequence(const TriMesh& initial, const BoundaryTrack& boundary,
                               const ColliderSet& colliders, const PhysicsParams& params,
                               const StepConfig& cfg, int frame_count,
                               std::vector<StepStats>* stats) {
  require_valid(initial);
  colliders.validate();
  if (!boundary.empty() && boundary.num_frames() < frame_count + 1)
    throw ValidationError("boundary track covers " + std::to_string(boundary.num_frames()) +
                          " frames, need " + std::to_string(frame_count + 1));

  const RestState rest = build_rest_state(initial, params.rho, material::kThickness);

  MeshSequence seq;
  seq.faces = initial.faces;
  seq.dt = cfg.dt;
  seq.frames.push_back(initial.vertices);

  SimState state;
  state.positions = initial.vertices;
  state.velocities = MatX3::Zero(initial.num_vertices(), 3);
  state.time_index = 0;

  const MatX3 empty(0, 3);
  for (int k = 1; k <= frame_count; ++k) {
    const MatX3& prescribed = boundary.empty() ? empty : boundary.prescribed[k];
    StepStats frame_stats;
    const std::string at_frame = "frame " + std::to_string(k) + ": ";
    try {
      state = step(state, rest, boundary.indices, prescribed, colliders.at_frame(k),
                   params, cfg, &frame_stats);
    } catch (const SolverError& err) {
      throw SolverError(at_frame + err.what(), err.residual());
    } catch (const PenetrationError& err) {
      throw PenetrationError(at_frame + err.what());
    } catch (const SingularElementError& err) {
      throw SingularElementError(at_frame + err.what());
    } catch (const Error& err) {
      throw Error(at_frame + err.what());
    }
    seq.frames.push_back(state.positions);
    if (stats) stats->push_back(frame_stats);
  }
  return seq;
}

} // namespace drapefit
