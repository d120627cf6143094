#include "psyduck/bridge.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sodium.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstring>

#include "json.hpp"
#include "psyduck/error.hpp"

namespace psyduck {
namespace {

using nlohmann::json;

json shape_json(const Shape& shape) {
  json arr = json::array();
  for (auto d : shape) arr.push_back(d);
  return arr;
}

Shape shape_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw BackendError("bridge sent a malformed shape");
  Shape shape;
  for (const auto& d : j) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0)
      throw BackendError("bridge sent a malformed shape");
    shape.push_back(d.get<std::size_t>());
  }
  return shape;
}

}  // namespace

std::string encode_tensor(const Sample& sample) {
  std::vector<unsigned char> raw;
  raw.reserve(sample.size() * 4);
  for (double v : sample.values) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int i = 0; i < 4; ++i) raw.push_back(static_cast<unsigned char>(bits >> (8 * i)));
  }
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(raw.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), raw.data(), raw.size(), variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

Sample decode_tensor(std::string_view base64, const Shape& shape) {
  const std::size_t n = element_count(shape);
  std::vector<unsigned char> raw(n * 4 + 4);
  std::size_t len = 0;
  const char* end = nullptr;
  if (sodium_base642bin(raw.data(), raw.size(), base64.data(), base64.size(), nullptr, &len, &end,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      end != base64.data() + base64.size())
    throw BackendError("tensor is not valid base64");
  if (len != n * 4) throw BackendError("tensor length does not match its shape");
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t bits = 0;
    for (int k = 3; k >= 0; --k) bits = (bits << 8) | raw[4 * i + k];
    values[i] = static_cast<double>(std::bit_cast<float>(bits));
    if (!std::isfinite(values[i])) throw BackendError("tensor holds non-finite values");
  }
  return Sample(shape, std::move(values), Precision::f32);
}

BridgeClient::BridgeClient(Options options) : options_(std::move(options)) {
  if (options_.command.empty()) throw ParameterError("bridge command is empty");
  // A dead child must surface as EPIPE, not kill this process.
  struct sigaction ignore {};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, nullptr);

  int in_pipe[2];
  int out_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw BackendError("pipe failed");
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw BackendError("pipe failed");
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw BackendError("fork failed");
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", options_.command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

BridgeClient::~BridgeClient() {
  try {
    shutdown();
  } catch (...) {
    kill_child();
  }
}

void BridgeClient::kill_child() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // The whole group, so a command run through the shell goes too.
    kill(-pid_, SIGKILL);
    waitpid(pid_, nullptr, 0);
  }
  pid_ = -1;
}

void BridgeClient::write_line(const std::string& line) {
  if (!alive()) throw BackendError("bridge process is not running");
  std::string data = line + '\n';
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      kill_child();
      throw BackendError("bridge closed its input");
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string BridgeClient::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + options_.timeout;
  while (true) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      kill_child();
      throw BackendError("bridge timed out after " + std::to_string(options_.timeout.count()) + " ms");
    }
    pollfd pfd{from_child_, POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    char chunk[65536];
    const ssize_t n = ::read(from_child_, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      kill_child();
      throw BackendError("bridge exited unexpectedly");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::string BridgeClient::transact_raw(const std::string& line) {
  write_line(line);
  return read_line();
}

std::string BridgeClient::request(const std::string& op, const std::string& extra_fields) {
  json req = extra_fields.empty() ? json::object() : json::parse(extra_fields);
  const std::uint64_t id = next_id_++;
  req["id"] = id;
  req["op"] = op;
  const std::string raw = transact_raw(req.dump());
  json resp;
  try {
    resp = json::parse(raw);
  } catch (const json::exception&) {
    throw BackendError("bridge sent a malformed response to " + op);
  }
  if (!resp.is_object() || !resp.contains("id") || resp["id"] != id)
    throw BackendError("bridge response id does not match request " + std::to_string(id));
  if (!resp.value("ok", false)) {
    throw BackendError("bridge error on " + op + ": " + resp.value("code", std::string("unknown")) +
                       ": " + resp.value("message", std::string()));
  }
  return raw;
}

BridgeInfo BridgeClient::init() {
  const json resp = json::parse(request("init", json{{"version", kBridgeVersion}}.dump()));
  BridgeInfo info;
  info.version = resp.value("version", std::string());
  if (info.version != kBridgeVersion)
    throw BackendError("bridge speaks '" + info.version + "', expected " + std::string(kBridgeVersion));
  try {
    info.shape = shape_from_json(resp.at("shape"));
    info.T = resp.at("T").get<std::size_t>();
    info.beta_start = resp.at("beta_start").get<double>();
    info.beta_end = resp.at("beta_end").get<double>();
  } catch (const json::exception&) {
    throw BackendError("bridge handshake is missing fields");
  }
  shape_ = info.shape;
  initialised_ = true;
  return info;
}

Sample BridgeClient::tensor_request(const std::string& op, const Sample& x, const std::string& extra) {
  if (!initialised_) throw BackendError("bridge used before init");
  json body = extra.empty() ? json::object() : json::parse(extra);
  body["shape"] = shape_json(x.shape);
  body["tensor"] = encode_tensor(x);
  const json resp = json::parse(request(op, body.dump()));
  try {
    Sample out = decode_tensor(resp.at("tensor").get<std::string>(), shape_from_json(resp.at("shape")));
    if (out.shape != x.shape) throw BackendError("bridge changed the tensor shape on " + op);
    out.precision = x.precision;
    out.space = x.space;
    out.normalize();
    return out;
  } catch (const json::exception&) {
    throw BackendError("bridge response to " + op + " has no tensor");
  }
}

Sample BridgeClient::predict_mean(const Sample& x_t, std::size_t t) {
  return tensor_request("model_predict", x_t, json{{"t", t}}.dump());
}

double BridgeClient::sigma(std::size_t t) {
  if (!initialised_) throw BackendError("bridge used before init");
  const json resp = json::parse(request("sigma", json{{"t", t}}.dump()));
  if (!resp.contains("sigma") || !resp["sigma"].is_number())
    throw BackendError("bridge sigma response has no value");
  return resp["sigma"].get<double>();
}

Sample BridgeClient::enc(const Sample& x) { return tensor_request("enc", x, {}); }
Sample BridgeClient::dec(const Sample& z) { return tensor_request("dec", z, {}); }

void BridgeClient::shutdown() {
  if (!alive()) return;
  try {
    request("shutdown", {});
  } catch (const BackendError&) {
    kill_child();
    return;
  }
  close(to_child_);
  close(from_child_);
  to_child_ = from_child_ = -1;
  // Give the child a moment to exit on its own before forcing it.
  for (int i = 0; i < 100; ++i) {
    if (waitpid(pid_, nullptr, WNOHANG) == pid_) {
      pid_ = -1;
      return;
    }
    usleep(10'000);
  }
  kill_child();
}

void check_bridge_info(const BridgeInfo& info, const Shape& shape, const Schedule& sched) {
  if (info.shape != shape)
    throw ConfigError("bridge latent shape " + shape_to_string(info.shape) +
                      " does not match configured shape " + shape_to_string(shape));
  auto close_to = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); };
  if (info.T != sched.T() || !close_to(info.beta_start, sched.betas().front()) ||
      !close_to(info.beta_end, sched.betas().back()))
    throw ConfigError("bridge schedule (T=" + std::to_string(info.T) +
                      ") does not match the configured schedule");
}

}  // namespace psyduck
