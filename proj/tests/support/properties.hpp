#pragma once

// Randomised invariants, one trial per seed. Each returns a description of the first
// violation, or nullopt.

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace icnn::test {

using PropertyCheck = std::function<std::optional<std::string>(std::uint64_t seed)>;

struct Property {
  std::string name;
  PropertyCheck check;
};

inline void PrintTo(const Property& p, std::ostream* os) { *os << p.name; }

std::optional<std::string> softmax_sums_to_one(std::uint64_t seed);
std::optional<std::string> maxpool_inverts_upsample(std::uint64_t seed);
std::optional<std::string> conv_preserves_shape(std::uint64_t seed);
std::optional<std::string> flip_is_involution(std::uint64_t seed);
std::optional<std::string> checkpoint_round_trip(std::uint64_t seed);

const std::vector<Property>& all_properties();

}  // namespace icnn::test
