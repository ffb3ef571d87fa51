#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace pixie {

enum class MaterialClass : std::uint8_t {
  Background = 0,
  Elastic = 1,
  Rigid = 2,
  Metal = 3,
  Sand = 4,
  Snow = 5,
  Plasticine = 6,
  Foam = 7,
};

inline constexpr int kMaterialClassCount = 8;

inline constexpr std::array<MaterialClass, kMaterialClassCount> kAllMaterialClasses = {
    MaterialClass::Background, MaterialClass::Elastic, MaterialClass::Rigid, MaterialClass::Metal,
    MaterialClass::Sand,       MaterialClass::Snow,    MaterialClass::Plasticine, MaterialClass::Foam};

std::string_view material_class_name(MaterialClass c);
// Accepts the lowercase names used in material specs ("elastic", "metal", ...).
std::optional<MaterialClass> parse_material_class(std::string_view name);
MaterialClass material_class_from_index(int index);

struct ContinuousParams {
  double young_modulus = 0.0;  // Pa
  double poisson_ratio = 0.0;
  double density = 0.0;  // kg/m^3

  bool valid() const;
  void validate() const;  // throws InvalidArgument when invalid
  bool operator==(const ContinuousParams&) const = default;
};

using ParamSample = std::map<std::string, ContinuousParams, std::less<>>;

}  // namespace pixie
