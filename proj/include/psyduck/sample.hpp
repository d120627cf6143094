#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace psyduck {

using Shape = std::vector<std::size_t>;

enum class Precision : std::uint8_t { f32 = 0, f64 = 1 };
enum class Space : std::uint8_t { pixel = 0, latent = 1 };

std::string_view to_string(Precision p);
std::string_view to_string(Space s);
Precision parse_precision(std::string_view text);
Space parse_space(std::string_view text);

/// Product of the dimensions. Throws ParameterError on an empty shape or a
/// zero dimension.
std::size_t element_count(const Shape& shape);

std::string shape_to_string(const Shape& shape);

/// Parses "43x96" or "43,96".
Shape parse_shape(std::string_view text);

/// Rounds x to the nearest value representable at the given precision.
inline double round_to(double x, Precision p) {
  return p == Precision::f32 ? static_cast<double>(static_cast<float>(x)) : x;
}

/// Dense row-major field flowing through the denoising chain.
///
/// Values are always held as doubles. When `precision` is f32 every stored
/// value is exactly representable as a float, so arithmetic runs in double and
/// only storage is rounded.
struct Sample {
  Shape shape;
  std::vector<double> values;
  Precision precision = Precision::f64;
  Space space = Space::latent;

  Sample() = default;
  Sample(Shape s, Precision p = Precision::f64, Space sp = Space::latent);
  Sample(Shape s, std::vector<double> v, Precision p = Precision::f64,
         Space sp = Space::latent);

  std::size_t size() const noexcept { return values.size(); }

  /// Re-rounds every element to `precision` and checks finiteness.
  void normalize();

  bool operator==(const Sample&) const = default;
};

/// Throws ShapeError unless both samples have identical shape.
void require_same_shape(const Sample& a, const Sample& b);

double l2_distance(const Sample& a, const Sample& b);
double l2_norm(const Sample& a);

}  // namespace psyduck
