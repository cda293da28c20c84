#include "p2pi/core/types.hpp"

#include <cmath>
#include <cstdio>

namespace p2pi::core {

namespace {

constexpr std::array<std::string_view, kJointCount> kJointNames = {
    "Hips",      "Ab",    "Chest", "Neck",  "Head",      "LShoulder", "LUArm",
    "LFArm",     "LHand", "RShoulder", "RUArm", "RFArm", "RHand",     "LThigh",
    "LShin",     "LFoot", "LToe",  "RThigh", "RShin",    "RFoot",     "RToe"};

constexpr std::array<JointId, 2> kHeadJoints = {JointId::Neck, JointId::Head};
constexpr std::array<JointId, 3> kSpineJoints = {JointId::Hips, JointId::Ab, JointId::Chest};
constexpr std::array<JointId, 8> kArmJoints = {
    JointId::LShoulder, JointId::LUArm, JointId::LFArm, JointId::LHand,
    JointId::RShoulder, JointId::RUArm, JointId::RFArm, JointId::RHand};
constexpr std::array<JointId, 8> kLegJoints = {
    JointId::LThigh, JointId::LShin, JointId::LFoot, JointId::LToe,
    JointId::RThigh, JointId::RShin, JointId::RFoot, JointId::RToe};

struct TaskNames {
  TaskLabel label;
  std::string_view id;
  std::string_view display;
};

constexpr std::array<TaskNames, 10> kTaskNames = {{
    {TaskLabel::TiltLeftRight, "tilt", "Tilt"},
    {TaskLabel::Bow, "bow", "Bow"},
    {TaskLabel::Squat, "squat", "Squat"},
    {TaskLabel::StandAndSit, "stand_and_sit", "Stand and Sit"},
    {TaskLabel::OneLegStand, "one_leg_stand", "One Leg Stand"},
    {TaskLabel::Walk, "walk", "Walk"},
    {TaskLabel::Jump, "jump", "Jump"},
    {TaskLabel::OneLegHop, "one_leg_hop", "One Leg Hop"},
    {TaskLabel::Free, "free", "Free"},
    {TaskLabel::Unknown, "unknown", "Unknown"},
}};

}  // namespace

std::string_view joint_name(JointId j) { return kJointNames[static_cast<int>(j)]; }

JointId joint_from_name(std::string_view name) {
  for (int i = 0; i < kJointCount; ++i) {
    if (kJointNames[i] == name) return static_cast<JointId>(i);
  }
  throw FormatError("unknown joint name '" + std::string(name) + "'");
}

std::string_view part_name(BodyPart p) {
  switch (p) {
    case BodyPart::Head:
      return "Head";
    case BodyPart::Spine:
      return "Spine";
    case BodyPart::Arms:
      return "Arms";
    case BodyPart::Legs:
      return "Legs";
  }
  throw ParameterError("invalid BodyPart");
}

std::span<const JointId> joints_of(BodyPart p) {
  switch (p) {
    case BodyPart::Head:
      return kHeadJoints;
    case BodyPart::Spine:
      return kSpineJoints;
    case BodyPart::Arms:
      return kArmJoints;
    case BodyPart::Legs:
      return kLegJoints;
  }
  throw ParameterError("invalid BodyPart");
}

BodyPart part_of(JointId j) {
  for (int p = 0; p < kBodyPartCount; ++p) {
    for (JointId member : joints_of(static_cast<BodyPart>(p))) {
      if (member == j) return static_cast<BodyPart>(p);
    }
  }
  throw ParameterError("joint not mapped to a body part");
}

std::string_view task_id(TaskLabel t) {
  for (const auto& n : kTaskNames) {
    if (n.label == t) return n.id;
  }
  throw ParameterError("invalid TaskLabel");
}

std::string_view task_display_name(TaskLabel t) {
  for (const auto& n : kTaskNames) {
    if (n.label == t) return n.display;
  }
  throw ParameterError("invalid TaskLabel");
}

TaskLabel task_from_id(std::string_view id) {
  for (const auto& n : kTaskNames) {
    if (n.id == id) return n.label;
  }
  throw FormatError("unknown task id '" + std::string(id) + "'");
}

int frame_layout_index(FootSide side, ChannelRef channel) {
  int offset = side == FootSide::Left ? 0 : kFootWidth;
  int limit = 0;
  switch (channel.kind) {
    case ChannelRef::Kind::Pressure:
      limit = kPressureChannels;
      break;
    case ChannelRef::Kind::Gyro:
      offset += kPressureChannels;
      limit = kGyroChannels;
      break;
    case ChannelRef::Kind::Accel:
      offset += kPressureChannels + kGyroChannels;
      limit = kAccelChannels;
      break;
  }
  if (channel.index < 0 || channel.index >= limit) {
    throw ParameterError("channel index " + std::to_string(channel.index) +
                         " out of range (limit " + std::to_string(limit) + ")");
  }
  return offset + channel.index;
}

std::array<std::string, kSensorWidth> channel_names() {
  std::array<std::string, kSensorWidth> names;
  const char* axes = "xyz";
  for (FootSide side : {FootSide::Left, FootSide::Right}) {
    const std::string prefix = side == FootSide::Left ? "L." : "R.";
    for (int i = 0; i < kPressureChannels; ++i) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "p%02d", i);
      names[frame_layout_index(side, {ChannelRef::Kind::Pressure, i})] = prefix + buf;
    }
    for (int i = 0; i < kGyroChannels; ++i) {
      names[frame_layout_index(side, {ChannelRef::Kind::Gyro, i})] =
          prefix + "g" + axes[i];
    }
    for (int i = 0; i < kAccelChannels; ++i) {
      names[frame_layout_index(side, {ChannelRef::Kind::Accel, i})] =
          prefix + "a" + axes[i];
    }
  }
  return names;
}

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

SensorFrame pack_frame(Timestamp t, const FootChannels& left, const FootChannels& right) {
  SensorFrame f;
  f.t = t;
  const FootChannels* feet[2] = {&left, &right};
  for (FootSide side : {FootSide::Left, FootSide::Right}) {
    const FootChannels& foot = *feet[static_cast<int>(side)];
    for (int i = 0; i < kPressureChannels; ++i) {
      f.values[frame_layout_index(side, {ChannelRef::Kind::Pressure, i})] = foot.pressure[i];
    }
    for (int i = 0; i < kGyroChannels; ++i) {
      f.values[frame_layout_index(side, {ChannelRef::Kind::Gyro, i})] = foot.gyro[i];
    }
    for (int i = 0; i < kAccelChannels; ++i) {
      f.values[frame_layout_index(side, {ChannelRef::Kind::Accel, i})] = foot.accel[i];
    }
  }
  return f;
}

std::pair<FootChannels, FootChannels> unpack_frame(const SensorFrame& frame) {
  std::pair<FootChannels, FootChannels> result;
  FootChannels* feet[2] = {&result.first, &result.second};
  for (FootSide side : {FootSide::Left, FootSide::Right}) {
    FootChannels& foot = *feet[static_cast<int>(side)];
    for (int i = 0; i < kPressureChannels; ++i) {
      foot.pressure[i] = frame.values[frame_layout_index(side, {ChannelRef::Kind::Pressure, i})];
    }
    for (int i = 0; i < kGyroChannels; ++i) {
      foot.gyro[i] = frame.values[frame_layout_index(side, {ChannelRef::Kind::Gyro, i})];
    }
    for (int i = 0; i < kAccelChannels; ++i) {
      foot.accel[i] = frame.values[frame_layout_index(side, {ChannelRef::Kind::Accel, i})];
    }
  }
  return result;
}

}  // namespace p2pi::core
