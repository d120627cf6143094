#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "psyduck/analysis.hpp"
#include "psyduck/container.hpp"
#include "psyduck/error.hpp"

namespace py = pybind11;
using namespace psyduck;

namespace {

SecretKey key_from(const py::bytes& raw) {
  const std::string s = raw;
  if (s.size() != SecretKey::kSize) throw ParameterError("key must be exactly 32 bytes");
  SecretKey::Bytes b{};
  std::memcpy(b.data(), s.data(), b.size());
  return SecretKey(b);
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return {s.begin(), s.end()};
}

py::array_t<double> to_array(const Sample& s) {
  py::array_t<double> out(std::vector<py::ssize_t>(s.shape.begin(), s.shape.end()));
  std::memcpy(out.mutable_data(), s.values.data(), s.values.size() * sizeof(double));
  return out;
}

/// Analytic-backend protocol session built from config text.
class Session {
 public:
  explicit Session(const std::string& config_text)
      : config_(parse_config(config_text)), setup_(make_setup(config_)) {}

  std::size_t capacity() const { return capacity_bytes(setup_.params); }

  py::bytes encode(const py::bytes& payload, const py::bytes& key) const {
    const auto data = from_bytes(payload);
    StegoContainer c;
    {
      py::gil_scoped_release release;
      c = psyduck::encode(data, keys(key), setup_.params, setup_.schedule, setup_.backend, setup_.codec);
    }
    return to_bytes(serialize_container(c));
  }

  py::bytes decode(const py::bytes& container, const py::bytes& key) const {
    const StegoContainer c = parse_container(from_bytes(container));
    std::vector<std::uint8_t> out;
    {
      py::gil_scoped_release release;
      out = psyduck::decode(c, keys(key), setup_.params, setup_.schedule, setup_.backend, setup_.codec);
    }
    return to_bytes(out);
  }

  py::array_t<double> cover(const py::bytes& key) const {
    return to_array(decode_latent(
        cover_sample(keys(key).sync, setup_.params, setup_.schedule, setup_.backend), setup_.codec));
  }

  std::string config() const { return serialize_config(config_); }

 private:
  static Setup make_setup(const Config& c) {
    if (c.uses_bridge()) throw ConfigError("the Python module runs the analytic backend only");
    return Setup::from_config(c);
  }
  KeySet keys(const py::bytes& key) const { return derive_keyset(key_from(key), setup_.params.r); }

  Config config_;
  Setup setup_;
};

}  // namespace

PYBIND11_MODULE(_psyduck, m) {
  m.doc() = "Keyed diffusion steganography: encode and decode payloads in generated samples.";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ParameterError>(m, "ParameterError", base);
  py::register_exception<ShapeError>(m, "ShapeError", base);
  py::register_exception<CapacityError>(m, "CapacityError", base);
  py::register_exception<FramingError>(m, "FramingError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<IoError>(m, "IoError", base);
  py::register_exception<BackendError>(m, "BackendError", base);

  m.def("generate_key", [] {
    const auto& b = SecretKey::random().bytes();
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
  }, "Fresh 32-byte key from the OS entropy source.");

  m.def("sigma", [](const std::string& preset, std::size_t t) { return schedule_preset(preset).sigma(t); },
        py::arg("preset"), py::arg("t"));

  m.def("read_container", [](const py::bytes& raw) {
    return to_array(parse_container(from_bytes(raw)).sample);
  }, "Sample values of a serialized container as a float64 array.");

  py::class_<Session>(m, "Session")
      .def(py::init<const std::string&>(), py::arg("config") = "")
      .def_property_readonly("capacity", &Session::capacity, "Payload bytes per sample.")
      .def("encode", &Session::encode, py::arg("payload"), py::arg("key"))
      .def("decode", &Session::decode, py::arg("container"), py::arg("key"))
      .def("cover", &Session::cover, py::arg("key"), "Cover sample for the key, no payload.")
      .def_property_readonly("config", &Session::config);
}
