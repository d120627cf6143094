#include "psyduck/sample.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "psyduck/error.hpp"

namespace psyduck {

std::string_view to_string(Precision p) {
  return p == Precision::f32 ? "f32" : "f64";
}

std::string_view to_string(Space s) {
  return s == Space::pixel ? "pixel" : "latent";
}

Precision parse_precision(std::string_view text) {
  if (text == "f32") return Precision::f32;
  if (text == "f64") return Precision::f64;
  throw ParameterError("unknown precision '" + std::string(text) + "'");
}

Space parse_space(std::string_view text) {
  if (text == "pixel") return Space::pixel;
  if (text == "latent") return Space::latent;
  throw ParameterError("unknown space '" + std::string(text) + "'");
}

std::size_t element_count(const Shape& shape) {
  if (shape.empty()) throw ParameterError("shape must have at least one dimension");
  std::size_t n = 1;
  for (auto dim : shape) {
    if (dim == 0) throw ParameterError("shape dimensions must be >= 1");
    n *= dim;
  }
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  return os.str();
}

Shape parse_shape(std::string_view text) {
  Shape shape;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find_first_of("x,", pos);
    if (end == std::string_view::npos) end = text.size();
    auto token = text.substr(pos, end - pos);
    std::size_t dim = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), dim);
    if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
      throw ParameterError("malformed shape '" + std::string(text) + "'");
    shape.push_back(dim);
    pos = end + 1;
  }
  element_count(shape);
  return shape;
}

Sample::Sample(Shape s, Precision p, Space sp)
    : shape(std::move(s)), values(element_count(shape), 0.0), precision(p), space(sp) {}

Sample::Sample(Shape s, std::vector<double> v, Precision p, Space sp)
    : shape(std::move(s)), values(std::move(v)), precision(p), space(sp) {
  if (values.size() != element_count(shape))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_to_string(shape));
  normalize();
}

void Sample::normalize() {
  for (auto& v : values) {
    v = round_to(v, precision);
    if (!std::isfinite(v)) throw ParameterError("non-finite value in sample");
  }
}

void require_same_shape(const Sample& a, const Sample& b) {
  if (a.shape != b.shape)
    throw ShapeError("shape mismatch: " + shape_to_string(a.shape) + " vs " +
                     shape_to_string(b.shape));
}

double l2_distance(const Sample& a, const Sample& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double diff = a.values[i] - b.values[i];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

double l2_norm(const Sample& a) {
  double acc = 0.0;
  for (auto v : a.values) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace psyduck
