#include "iteach/core.hpp"

#include <algorithm>
#include <numbers>

#include "iteach/error.hpp"

namespace iteach {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::Parse: return "parse error";
    case ErrorCode::NotFound: return "not found";
    case ErrorCode::Transport: return "transport error";
    case ErrorCode::GenerationFailed: return "generation failed";
    case ErrorCode::Numeric: return "numeric error";
    case ErrorCode::Io: return "i/o error";
    case ErrorCode::Schema: return "schema error";
    case ErrorCode::Experiment: return "experiment failure";
    case ErrorCode::Internal: return "internal error";
  }
  return "unknown error";
}

std::optional<double> angle_between(const Vec3& u, const Vec3& v, double zero_norm) {
  const double nu = u.norm();
  const double nv = v.norm();
  if (!(nu >= zero_norm) || !(nv >= zero_norm)) return std::nullopt;
  const double c = std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0);
  return std::clamp(std::acos(c) * 180.0 / std::numbers::pi, 0.0, 180.0);
}

Vec3 clip_norm(const Vec3& v, double max_norm) {
  if (!(max_norm > 0.0) || !std::isfinite(max_norm))
    throw Error(ErrorCode::InvalidArgument, "clip_norm: max_norm must be positive and finite");
  if (!v.finite()) throw Error(ErrorCode::InvalidArgument, "clip_norm: non-finite vector");
  const double n = v.norm();
  if (n <= max_norm) return v;
  // Rounding can leave v * (max_norm / n) a few ulps above the bound; step
  // the factor down until it is not, so a second clip is the identity.
  double f = max_norm / n;
  Vec3 out = v * f;
  while (out.norm() > max_norm) {
    f = std::nextafter(f, 0.0);
    out = v * f;
  }
  return out;
}

const char* to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::FreeBody: return "free_body";
    case ObjectKind::Button: return "button";
    case ObjectKind::PrismaticJoint: return "prismatic_joint";
  }
  return "free_body";
}

ObjectKind object_kind_from_string(const std::string& s) {
  if (s == "free_body") return ObjectKind::FreeBody;
  if (s == "button") return ObjectKind::Button;
  if (s == "prismatic_joint") return ObjectKind::PrismaticJoint;
  throw Error(ErrorCode::InvalidArgument, "unknown object kind '" + s + "'");
}

std::optional<std::size_t> EnvState::find_object(const std::string& name) const {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].name == name) return i;
  return std::nullopt;
}

}  // namespace iteach
