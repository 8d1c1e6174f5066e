#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace iteach {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

// Norms below this are treated as "no motion" by direction tests.
inline constexpr double kZeroNorm = 1e-9;

// Angle between two vectors in degrees, clamped to [0, 180]. Empty when
// either vector is shorter than `zero_norm`.
std::optional<double> angle_between(const Vec3& u, const Vec3& v, double zero_norm = kZeroNorm);

// Scales `v` down onto the ball of radius `max_norm`; identity inside it.
// Throws InvalidArgument for non-finite input or non-positive `max_norm`.
Vec3 clip_norm(const Vec3& v, double max_norm);

enum class GripperCommand { Open, Close };

struct Action {
  Vec3 translation;
  GripperCommand gripper = GripperCommand::Open;

  bool operator==(const Action&) const = default;
  bool finite() const { return translation.finite(); }
};

enum class ObjectKind { FreeBody, Button, PrismaticJoint };

const char* to_string(ObjectKind kind);
ObjectKind object_kind_from_string(const std::string& s);

struct ObjectState {
  std::string name;
  Vec3 pos;
  ObjectKind kind = ObjectKind::FreeBody;
  // 0 = open/unpressed, 1 = closed/pressed. Unused for free bodies.
  double joint_value = 0.0;

  bool operator==(const ObjectState&) const = default;
};

struct EnvState {
  Vec3 gripper_pos;
  bool gripper_closed = false;
  std::vector<ObjectState> objects;
  std::optional<std::size_t> attached_object;
  // Offset of the attached object's position from the gripper.
  Vec3 attach_offset;
  std::int64_t step_index = 0;

  bool operator==(const EnvState&) const = default;

  std::optional<std::size_t> find_object(const std::string& name) const;
};

enum class FeedbackKind {
  Evaluative,
  Corrective,
  // Dissimilar step under the evaluative-only ablation: no correction is
  // issued and the sample is recorded with zero weight.
  Withheld,
};

struct Feedback {
  FeedbackKind kind = FeedbackKind::Evaluative;
  // Present iff kind == Corrective.
  std::optional<Action> teacher_action;

  static Feedback evaluative() { return {FeedbackKind::Evaluative, std::nullopt}; }
  static Feedback corrective(const Action& a) { return {FeedbackKind::Corrective, a}; }
  static Feedback withheld() { return {FeedbackKind::Withheld, std::nullopt}; }

  bool is_corrective() const { return kind == FeedbackKind::Corrective; }
  bool operator==(const Feedback&) const = default;
};

struct TrajectorySample {
  EnvState state;
  Action action;
  std::optional<Feedback> feedback;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;

  std::size_t length() const { return samples.size(); }
};

}  // namespace iteach
