#include "drapefit/collider.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "drapefit/error.hpp"
#include "drapefit/text_io.hpp"

namespace drapefit {

RigidTransform ColliderBody::at_frame(int frame) const {
  if (track.empty()) return {};
  if (frame < 0) frame = 0;
  if (frame >= static_cast<int>(track.size()))
    frame = static_cast<int>(track.size()) - 1;
  return track[frame];
}

std::vector<Primitive> ColliderSet::at_frame(int frame) const {
  std::vector<Primitive> prims;
  prims.reserve(bodies.size());
  for (const auto& body : bodies)
    prims.push_back(transform_primitive(body.shape, body.at_frame(frame)));
  return prims;
}

void ColliderSet::validate() const {
  for (size_t i = 0; i < bodies.size(); ++i) {
    const auto idx = std::to_string(i);
    if (const auto* s = std::get_if<Sphere>(&bodies[i].shape)) {
      if (s->radius <= 0.0)
        throw ValidationError("collider " + idx + ": sphere radius must be > 0");
    } else if (const auto* c = std::get_if<Capsule>(&bodies[i].shape)) {
      if (c->radius <= 0.0)
        throw ValidationError("collider " + idx + ": capsule radius must be > 0");
      if ((c->a - c->b).norm() == 0.0)
        throw ValidationError("collider " + idx + ": capsule endpoints coincide");
    } else if (const auto* h = std::get_if<HalfSpace>(&bodies[i].shape)) {
      if (std::abs(h->normal.norm() - 1.0) > 1e-9)
        throw ValidationError("collider " + idx + ": half-space normal must be unit length");
    }
  }
}

Primitive transform_primitive(const Primitive& prim, const RigidTransform& xf) {
  if (const auto* s = std::get_if<Sphere>(&prim))
    return Sphere{xf.apply(s->center), s->radius};
  if (const auto* c = std::get_if<Capsule>(&prim))
    return Capsule{xf.apply(c->a), xf.apply(c->b), c->radius};
  const auto& h = std::get<HalfSpace>(prim);
  return HalfSpace{xf.apply(h.point), xf.rotation * h.normal};
}

namespace {

Real sphere_like_distance(const Vec3& p, const Vec3& center, Real radius,
                          Vec3* grad, Mat3* hess) {
  const Vec3 diff = p - center;
  const Real len = diff.norm();
  if (len == 0.0) {
    if (grad) *grad = Vec3::UnitY();
    if (hess) hess->setZero();
    return -radius;
  }
  const Vec3 u = diff / len;
  if (grad) *grad = u;
  if (hess) *hess = (Mat3::Identity() - u * u.transpose()) / len;
  return len - radius;
}

} // namespace

Real collider_distance(const Vec3& p, const Primitive& prim, Vec3& grad, Mat3& hess) {
  if (const auto* s = std::get_if<Sphere>(&prim))
    return sphere_like_distance(p, s->center, s->radius, &grad, &hess);
  if (const auto* c = std::get_if<Capsule>(&prim)) {
    const Vec3 axis = c->b - c->a;
    const Real t =
        std::clamp((p - c->a).dot(axis) / axis.squaredNorm(), Real(0), Real(1));
    return sphere_like_distance(p, c->a + t * axis, c->radius, &grad, &hess);
  }
  const auto& h = std::get<HalfSpace>(prim);
  grad = h.normal;
  hess.setZero();
  return h.normal.dot(p - h.point);
}

Real collider_distance(const Vec3& p, const Primitive& prim, Vec3& grad) {
  Mat3 hess;
  return collider_distance(p, prim, grad, hess);
}

Real collider_distance(const Vec3& p, const Primitive& prim) {
  Vec3 grad;
  Mat3 hess;
  return collider_distance(p, prim, grad, hess);
}

Real min_collider_distance(const MatX3& positions, const std::vector<Primitive>& prims) {
  Real min_d = std::numeric_limits<Real>::infinity();
  for (const auto& prim : prims)
    for (Index i = 0; i < positions.rows(); ++i)
      min_d = std::min(min_d, collider_distance(positions.row(i), prim));
  return min_d;
}

namespace {

Vec3 parse_vec3(const std::string& path, int lineno, const std::vector<std::string>& tok) {
  if (tok.size() != 4)
    throw MalformedFileError(path, lineno, "expected 3 numbers after `" + tok[0] + "`");
  Vec3 v;
  for (int k = 0; k < 3; ++k)
    if (!parse_real(tok[k + 1], v[k]))
      throw MalformedFileError(path, lineno, "bad number `" + tok[k + 1] + "`");
  return v;
}

Real parse_scalar(const std::string& path, int lineno, const std::vector<std::string>& tok) {
  Real v = 0;
  if (tok.size() != 2 || !parse_real(tok[1], v))
    throw MalformedFileError(path, lineno, "expected one number after `" + tok[0] + "`");
  return v;
}

} // namespace

ColliderSet load_collider_config(const std::string& path) {
  std::istringstream in(read_file(path));
  ColliderSet set;
  std::string line;
  int lineno = 0;
  bool in_body = false;
  ColliderBody body;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string s = strip_comment(line);
    if (s.empty()) continue;
    const auto tok = split_ws(s);
    const std::string& key = tok[0];

    if (key == "collider") {
      if (in_body)
        throw MalformedFileError(path, lineno, "missing `end` before new collider");
      if (tok.size() != 2)
        throw MalformedFileError(path, lineno, "expected `collider <type>`");
      body = ColliderBody{};
      if (tok[1] == "sphere")
        body.shape = Sphere{};
      else if (tok[1] == "capsule")
        body.shape = Capsule{};
      else if (tok[1] == "halfspace")
        body.shape = HalfSpace{};
      else
        throw MalformedFileError(path, lineno, "unknown collider type `" + tok[1] + "`");
      in_body = true;
    } else if (!in_body) {
      throw MalformedFileError(path, lineno, "`" + key + "` outside a collider block");
    } else if (key == "end") {
      set.bodies.push_back(body);
      in_body = false;
    } else if (key == "center") {
      std::get<Sphere>(body.shape).center = parse_vec3(path, lineno, tok);
    } else if (key == "radius") {
      const Real r = parse_scalar(path, lineno, tok);
      if (auto* sp = std::get_if<Sphere>(&body.shape))
        sp->radius = r;
      else
        std::get<Capsule>(body.shape).radius = r;
    } else if (key == "a") {
      std::get<Capsule>(body.shape).a = parse_vec3(path, lineno, tok);
    } else if (key == "b") {
      std::get<Capsule>(body.shape).b = parse_vec3(path, lineno, tok);
    } else if (key == "point") {
      std::get<HalfSpace>(body.shape).point = parse_vec3(path, lineno, tok);
    } else if (key == "normal") {
      std::get<HalfSpace>(body.shape).normal =
          parse_vec3(path, lineno, tok).normalized();
    } else if (key == "frame") {
      if (tok.size() != 9)
        throw MalformedFileError(path, lineno,
                                 "expected `frame <idx> qw qx qy qz tx ty tz`");
      long idx = 0;
      if (!parse_int(tok[1], idx) || idx < 0)
        throw MalformedFileError(path, lineno, "bad frame index `" + tok[1] + "`");
      Real v[7];
      for (int k = 0; k < 7; ++k)
        if (!parse_real(tok[k + 2], v[k]))
          throw MalformedFileError(path, lineno, "bad number `" + tok[k + 2] + "`");
      RigidTransform xf;
      xf.rotation = Quat(v[0], v[1], v[2], v[3]).normalized();
      xf.translation = Vec3(v[4], v[5], v[6]);
      if (static_cast<size_t>(idx) >= body.track.size())
        body.track.resize(idx + 1);
      body.track[idx] = xf;
    } else {
      throw MalformedFileError(path, lineno, "unknown key `" + key + "`");
    }
  }
  if (in_body) throw MalformedFileError(path, lineno, "unterminated collider block");
  set.validate();
  return set;
}

void save_collider_config(const std::string& path, const ColliderSet& set) {
  std::ostringstream out;
  for (const auto& body : set.bodies) {
    if (const auto* s = std::get_if<Sphere>(&body.shape)) {
      out << "collider sphere\n";
      out << "center " << format_real(s->center.x()) << ' ' << format_real(s->center.y())
          << ' ' << format_real(s->center.z()) << '\n';
      out << "radius " << format_real(s->radius) << '\n';
    } else if (const auto* c = std::get_if<Capsule>(&body.shape)) {
      out << "collider capsule\n";
      out << "a " << format_real(c->a.x()) << ' ' << format_real(c->a.y()) << ' '
          << format_real(c->a.z()) << '\n';
      out << "b " << format_real(c->b.x()) << ' ' << format_real(c->b.y()) << ' '
          << format_real(c->b.z()) << '\n';
      out << "radius " << format_real(c->radius) << '\n';
    } else {
      const auto& h = std::get<HalfSpace>(body.shape);
      out << "collider halfspace\n";
      out << "point " << format_real(h.point.x()) << ' ' << format_real(h.point.y())
          << ' ' << format_real(h.point.z()) << '\n';
      out << "normal " << format_real(h.normal.x()) << ' ' << format_real(h.normal.y())
          << ' ' << format_real(h.normal.z()) << '\n';
    }
    for (size_t t = 0; t < body.track.size(); ++t) {
      const auto& xf = body.track[t];
      out << "frame " << t << ' ' << format_real(xf.rotation.w()) << ' '
          << format_real(xf.rotation.x()) << ' ' << format_real(xf.rotation.y()) << ' '
          << format_real(xf.rotation.z()) << ' ' << format_real(xf.translation.x())
          << ' ' << format_real(xf.translation.y()) << ' '
          << format_real(xf.translation.z()) << '\n';
    }
    out << "end\n";
  }
  write_file(path, out.str());
}

} // namespace drapefit
