// Test double for the model bridge. Serves the analytic Gaussian model over
// the newline-delimited JSON wire format.
//
//   mock_bridge [--shape 43x96] [--preset linear-50] [--version V]
//               [--hang-on OP] [--exit-on OP] [--garbage-on OP]

#include <unistd.h>

#include <iostream>
#include <string>

#include "json.hpp"
#include "psyduck/bridge.hpp"
#include "psyduck/diffusion.hpp"
#include "psyduck/sample.hpp"

using nlohmann::json;
using namespace psyduck;

namespace {

struct Options {
  Shape shape{43, 96};
  std::string preset = "linear-50";
  std::string version{kBridgeVersion};
  std::string hang_on, exit_on, garbage_on;
};

json error(const json& id, const std::string& code, const std::string& message) {
  return json{{"id", id}, {"ok", false}, {"code", code}, {"message", message}};
}

Sample tensor_of(const json& req) {
  Shape shape;
  for (const auto& d : req.at("shape")) shape.push_back(d.get<std::size_t>());
  return decode_tensor(req.at("tensor").get<std::string>(), shape);
}

json tensor_reply(const json& id, const Sample& s) {
  return json{{"id", id}, {"ok", true}, {"shape", s.shape}, {"tensor", encode_tensor(s)}};
}

}  // namespace

int main(int argc, char** argv) {
  Options opt;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i], value = argv[i + 1];
    if (flag == "--shape") opt.shape = parse_shape(value);
    else if (flag == "--preset") opt.preset = value;
    else if (flag == "--version") opt.version = value;
    else if (flag == "--hang-on") opt.hang_on = value;
    else if (flag == "--exit-on") opt.exit_on = value;
    else if (flag == "--garbage-on") opt.garbage_on = value;
  }
  const Schedule sched = schedule_preset(opt.preset);
  BackendSpec spec;
  spec.step_mode = StepMode::deterministic;

  std::string line;
  while (std::getline(std::cin, line)) {
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      std::cout << error(nullptr, "bad_request", "request is not JSON").dump() << std::endl;
      continue;
    }
    const json id = req.value("id", json(nullptr));
    const std::string op = req.value("op", std::string());
    if (op == opt.hang_on) {
      while (true) pause();
    }
    if (op == opt.exit_on) return 1;
    if (op == opt.garbage_on) {
      std::cout << "}{ not json" << std::endl;
      continue;
    }
    json resp;
    try {
      if (op == "init") {
        resp = {{"id", id},
                {"ok", true},
                {"version", opt.version},
                {"shape", opt.shape},
                {"T", sched.T()},
                {"beta_start", sched.betas().front()},
                {"beta_end", sched.betas().back()}};
      } else if (op == "model_predict") {
        const std::size_t t = req.at("t").get<std::size_t>();
        resp = tensor_reply(id, model_predict(tensor_of(req), t, sched, spec));
      } else if (op == "sigma") {
        resp = {{"id", id}, {"ok", true}, {"sigma", sched.sigma(req.at("t").get<std::size_t>())}};
      } else if (op == "enc" || op == "dec") {
        resp = tensor_reply(id, tensor_of(req));
      } else if (op == "shutdown") {
        std::cout << json{{"id", id}, {"ok", true}}.dump() << std::endl;
        return 0;
      } else {
        resp = error(id, "unknown_op", "unsupported op '" + op + "'");
      }
    } catch (const std::exception& e) {
      resp = error(id, "bad_request", e.what());
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
