#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "psyduck/cli.hpp"
#include "psyduck/container.hpp"
#include "test_util.hpp"

using namespace psyduck;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args, const std::string& stdin_text = {},
           std::vector<std::string> env = {}) {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  std::vector<char*> envp;
  for (auto& e : env) envp.push_back(e.data());
  envp.push_back(nullptr);
  const int code = cli::run(args, in, out, err, envp.data());
  return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    key = (dir / "k.key").string();
    ASSERT_EQ(run({"keygen", "--out", key}).code, cli::kOk);
  }
  psyduck::testing::TempDir dir;
  std::string key;
};

TEST_F(Cli, KeygenWritesFreshHexKeys) {
  const std::string other = (dir / "k2.key").string();
  ASSERT_EQ(run({"keygen", "--out", other}).code, cli::kOk);
  const std::string a = slurp(key), b = slurp(other);
  EXPECT_EQ(a.size(), 65u);
  EXPECT_EQ(a.back(), '\n');
  EXPECT_NE(a, b);
  EXPECT_EQ(run({"keygen", "--out", (dir / "no/such/dir/k").string()}).code, cli::kIo);
}

TEST_F(Cli, EncodeDecodeRoundTripKeepsStdoutClean) {
  const std::string c = (dir / "c.psyd").string();
  const Result enc = run({"encode", "--key", key, "--in", "-", "--out", c}, "hello");
  ASSERT_EQ(enc.code, cli::kOk) << enc.err;
  EXPECT_TRUE(enc.out.empty());
  EXPECT_NE(enc.err.find("capacity: 512 bytes"), std::string::npos);
  EXPECT_NE(enc.err.find("E_sec"), std::string::npos);
  EXPECT_NO_THROW(read_container(c));
  const Result dec = run({"decode", "--key", key, "--in", c});
  ASSERT_EQ(dec.code, cli::kOk) << dec.err;
  EXPECT_EQ(dec.out, "hello");
}

TEST_F(Cli, BinaryPayloadFromFile) {
  std::string payload;
  for (int i = 0; i < 256; ++i) payload.push_back(static_cast<char>(i));
  std::ofstream(dir / "msg.bin", std::ios::binary) << payload;
  const std::string c = (dir / "c.psyd").string();
  ASSERT_EQ(run({"encode", "--key", key, "--in", (dir / "msg.bin").string(), "--out", c}).code,
            cli::kOk);
  const std::string outfile = (dir / "back.bin").string();
  ASSERT_EQ(run({"decode", "--key", key, "--in", c, "--out", outfile}).code, cli::kOk);
  EXPECT_EQ(slurp(outfile), payload);
}

TEST_F(Cli, CapacityOverflowExitsTwo) {
  const Result r = run({"encode", "--key", key, "--out", (dir / "c").string()}, std::string(513, 'x'));
  EXPECT_EQ(r.code, cli::kCapacity);
  EXPECT_NE(r.err.find("max 512 bytes"), std::string::npos);
  EXPECT_EQ(run({"encode", "--key", key, "--out", (dir / "c").string()}, std::string(512, 'x')).code,
            cli::kOk);
}

TEST_F(Cli, SameInputsGiveIdenticalContainers) {
  const std::string a = (dir / "a").string(), b = (dir / "b").string();
  ASSERT_EQ(run({"encode", "--key", key, "--out", a}, "same").code, cli::kOk);
  ASSERT_EQ(run({"encode", "--key", key, "--out", b}, "same").code, cli::kOk);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(Cli, WrongKeyExitsFive) {
  const std::string c = (dir / "c").string(), other = (dir / "k2").string();
  run({"keygen", "--out", other});
  ASSERT_EQ(run({"encode", "--key", key, "--out", c}, "secret").code, cli::kOk);
  const Result r = run({"decode", "--key", other, "--in", c});
  EXPECT_EQ(r.code, cli::kFraming);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, TruncatedContainerExitsFour) {
  const std::string c = (dir / "c").string();
  ASSERT_EQ(run({"encode", "--key", key, "--out", c}, "secret").code, cli::kOk);
  const std::string bytes = slurp(c);
  std::ofstream(c, std::ios::binary | std::ios::trunc) << bytes.substr(0, bytes.size() / 2);
  EXPECT_EQ(run({"decode", "--key", key, "--in", c}).code, cli::kIo);
  EXPECT_EQ(run({"decode", "--key", key, "--in", (dir / "absent").string()}).code, cli::kIo);
}

TEST_F(Cli, ConfigErrorsExitThree) {
  std::ofstream(dir / "bad.cfg") << "protocol.d = 99\n";
  EXPECT_EQ(run({"encode", "--config", (dir / "bad.cfg").string(), "--key", key, "--out",
                 (dir / "c").string()}, "x").code,
            cli::kConfig);
  EXPECT_EQ(run({"encode", "--key", key, "--out", (dir / "c").string()}, "x",
                {"PSYDUCK_PROTOCOL_R=1"}).code,
            cli::kConfig);
  EXPECT_EQ(run({"encode", "--key", key, "--out", (dir / "c").string(), "--backend", "torch"}, "x")
                .code,
            cli::kConfig);
}

TEST_F(Cli, EnvironmentOverridesMustMatchOnBothSides) {
  const std::string c = (dir / "c").string();
  ASSERT_EQ(run({"encode", "--key", key, "--out", c}, "env", {"PSYDUCK_PROTOCOL_D=4"}).code, cli::kOk);
  EXPECT_EQ(run({"decode", "--key", key, "--in", c}, "", {"PSYDUCK_PROTOCOL_D=4"}).out, "env");
  EXPECT_NE(run({"decode", "--key", key, "--in", c}).out, "env");
}

TEST_F(Cli, WarnsAboutReadableKeyFile) {
  std::filesystem::permissions(key, std::filesystem::perms::group_read,
                               std::filesystem::perm_options::add);
  const Result r = run({"encode", "--key", key, "--out", (dir / "c").string()}, "x");
  EXPECT_EQ(r.code, cli::kOk);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(Cli, UsageErrorsExitOne) {
  EXPECT_EQ(run({}).code, cli::kFailure);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kFailure);
  EXPECT_EQ(run({"encode", "--out", "x"}).code, cli::kFailure);
  EXPECT_EQ(run({"--help"}).code, cli::kOk);
}

TEST_F(Cli, EmptyGridExitsThree) {
  std::ofstream(dir / "empty.grid") << "# nothing here\n";
  EXPECT_EQ(run({"sweep", "--grid", (dir / "empty.grid").string(), "--out", "-"}).code, cli::kConfig);
}

TEST_F(Cli, SweepWritesTrialAndAggregateRows) {
  std::ofstream(dir / "g.grid") << "d = 1,2,3\nr = 2,4\n";
  const std::string csv = (dir / "out.csv").string();
  const Result r = run({"sweep", "--grid", (dir / "g.grid").string(), "--out", csv, "--trials", "10"},
                       "", {"PSYDUCK_SAMPLE_SHAPE=8x16"});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_TRUE(r.out.empty());
  const std::string text = slurp(csv);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 1 + 60 + 6);
  EXPECT_EQ(text.rfind("kind,d,r,precision,codec,bytes,bit_accuracy,E_sec,E_rec,", 0), 0u);
}

TEST_F(Cli, VerifyDefaultConfigAllPass) {
  const Result r = run({"verify"});
  EXPECT_EQ(r.code, cli::kOk) << r.out << r.err;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 5);
}

TEST_F(Cli, BridgeBackendFromFlag) {
  const std::string c = (dir / "c").string();
  const std::string backend = std::string("bridge:") + PSYDUCK_MOCK_BRIDGE + " --shape 43x96";
  const Result enc = run({"encode", "--key", key, "--out", c, "--backend", backend}, "via bridge");
  ASSERT_EQ(enc.code, cli::kOk) << enc.err;
  EXPECT_EQ(run({"decode", "--key", key, "--in", c, "--backend", backend}).out, "via bridge");
  const std::string wrong = std::string("bridge:") + PSYDUCK_MOCK_BRIDGE + " --shape 4x8";
  EXPECT_EQ(run({"encode", "--key", key, "--out", c, "--backend", wrong}, "x").code, cli::kConfig);
}

}  // namespace
