#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "p2pi/common/error.hpp"

namespace p2pi::core {

/// Seconds since recording start. Resolution of a double (~us at hours of
/// recording) is far below the 10 ms grid.
using Timestamp = double;

enum class FootSide : std::uint8_t { Left = 0, Right = 1 };

inline constexpr int kPressureChannels = 35;
inline constexpr int kGyroChannels = 3;
inline constexpr int kAccelChannels = 3;
inline constexpr int kFootWidth = kPressureChannels + kGyroChannels + kAccelChannels;  // 41
inline constexpr int kSensorWidth = 2 * kFootWidth;                                    // 82

/// The 21-joint skeleton, in the fixed serialization order used everywhere.
enum class JointId : std::uint8_t {
  Hips = 0,
  Ab,
  Chest,
  Neck,
  Head,
  LShoulder,
  LUArm,
  LFArm,
  LHand,
  RShoulder,
  RUArm,
  RFArm,
  RHand,
  LThigh,
  LShin,
  LFoot,
  LToe,
  RThigh,
  RShin,
  RFoot,
  RToe,
};

inline constexpr int kJointCount = 21;
inline constexpr int kSkeletonWidth = 3 * kJointCount;  // 63

std::string_view joint_name(JointId j);
JointId joint_from_name(std::string_view name);  // throws FormatError

/// Body-part grouping used by the per-part error tables. The four sets
/// partition all 21 joints (2 + 3 + 8 + 8).
enum class BodyPart : std::uint8_t { Head = 0, Spine, Arms, Legs };

inline constexpr int kBodyPartCount = 4;

std::string_view part_name(BodyPart p);
std::span<const JointId> joints_of(BodyPart p);
BodyPart part_of(JointId j);

/// The eight recorded movements plus free movement and a sentinel.
enum class TaskLabel : std::uint8_t {
  TiltLeftRight = 0,
  Bow,
  Squat,
  StandAndSit,
  OneLegStand,
  Walk,
  Jump,
  OneLegHop,
  Free,
  Unknown,
};

inline constexpr int kRecordedTaskCount = 8;

std::string_view task_id(TaskLabel t);            // stable machine name ("tilt", ...)
std::string_view task_display_name(TaskLabel t);  // report column name ("Tilt", ...)
TaskLabel task_from_id(std::string_view id);      // throws FormatError

/// One sensor channel within a foot: pressure[0..35), gyro[0..3) or accel[0..3).
struct ChannelRef {
  enum class Kind : std::uint8_t { Pressure, Gyro, Accel } kind;
  int index;
};

/// Flat index of (side, channel) under the fixed frame layout
/// [L.pressure(35), L.gyro(3), L.accel(3), R.pressure(35), R.gyro(3), R.accel(3)].
/// Bijective over all 82 pairs; out-of-range index throws ParameterError.
int frame_layout_index(FootSide side, ChannelRef channel);

/// Human-readable channel names in layout order ("L.p00".."R.az").
std::array<std::string, kSensorWidth> channel_names();

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const;
};

/// One 82-wide timestamped sensor sample.
struct SensorFrame {
  Timestamp t = 0;
  std::array<double, kSensorWidth> values{};
};

/// Per-foot channel bundle, the unpacked view of half a SensorFrame.
struct FootChannels {
  std::array<double, kPressureChannels> pressure{};
  std::array<double, kGyroChannels> gyro{};
  std::array<double, kAccelChannels> accel{};
};

SensorFrame pack_frame(Timestamp t, const FootChannels& left, const FootChannels& right);
std::pair<FootChannels, FootChannels> unpack_frame(const SensorFrame& frame);

/// One 21-joint pose (63 scalars, millimeters) at one timestamp.
struct SkeletonFrame {
  Timestamp t = 0;
  std::array<double, kSkeletonWidth> coords{};

  Vec3 joint(JointId j) const {
    const int i = 3 * static_cast<int>(j);
    return {coords[i], coords[i + 1], coords[i + 2]};
  }
  void set_joint(JointId j, const Vec3& v) {
    const int i = 3 * static_cast<int>(j);
    coords[i] = v.x;
    coords[i + 1] = v.y;
    coords[i + 2] = v.z;
  }
};

}  // namespace p2pi::core
