#include "icnn/palette.hpp"

namespace icnn {
namespace {

constexpr std::array<std::string_view, kNumFaceClasses> kClassNames = {
    "background", "left_eyebrow", "left_eye",    "right_eyebrow", "right_eye",
    "nose",       "upper_lip",    "inner_mouth", "lower_lip"};

constexpr std::array<int, 1> kLeftBrow = {kLeftEyebrow};
constexpr std::array<int, 1> kRightBrow = {kRightEyebrow};
constexpr std::array<int, 1> kLeftEyeCls = {kLeftEye};
constexpr std::array<int, 1> kRightEyeCls = {kRightEye};
constexpr std::array<int, 1> kNoseCls = {kNose};
constexpr std::array<int, 3> kMouthCls = {kUpperLip, kInnerMouth, kLowerLip};

}  // namespace

std::string_view class_name(int cls) {
  return (cls >= 0 && cls < kNumFaceClasses) ? kClassNames[cls] : "unknown";
}

std::string_view part_name(PartId part) {
  switch (part) {
    case PartId::LeftEyebrow: return "left_eyebrow";
    case PartId::RightEyebrow: return "right_eyebrow";
    case PartId::LeftEye: return "left_eye";
    case PartId::RightEye: return "right_eye";
    case PartId::Nose: return "nose";
    case PartId::Mouth: return "mouth";
  }
  return "unknown";
}

std::span<const int> part_classes(PartId part) {
  switch (part) {
    case PartId::LeftEyebrow: return kLeftBrow;
    case PartId::RightEyebrow: return kRightBrow;
    case PartId::LeftEye: return kLeftEyeCls;
    case PartId::RightEye: return kRightEyeCls;
    case PartId::Nose: return kNoseCls;
    case PartId::Mouth: return kMouthCls;
  }
  return {};
}

}  // namespace icnn
