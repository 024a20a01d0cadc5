#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace icnn {

/// Full-image label palette shared by the stage-1 network and assembled outputs.
enum FaceClass : std::uint8_t {
  kBackground = 0,
  kLeftEyebrow = 1,
  kLeftEye = 2,
  kRightEyebrow = 3,
  kRightEye = 4,
  kNose = 5,
  kUpperLip = 6,
  kInnerMouth = 7,
  kLowerLip = 8,
};
inline constexpr int kNumFaceClasses = 9;

std::string_view class_name(int cls);

/// The six regions that get their own stage-2 patch.
enum class PartId { LeftEyebrow, RightEyebrow, LeftEye, RightEye, Nose, Mouth };
inline constexpr std::array<PartId, 6> kAllParts = {PartId::LeftEyebrow, PartId::RightEyebrow,
                                                    PartId::LeftEye,     PartId::RightEye,
                                                    PartId::Nose,        PartId::Mouth};

std::string_view part_name(PartId part);
/// Full-palette classes that make up a part (the mouth merges three).
std::span<const int> part_classes(PartId part);

}  // namespace icnn
