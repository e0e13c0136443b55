/*
 * Copyright 2026 The ARMIN Toolkit Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <sys/wait.h>

#include <unistd.h>

#include <bit>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "armin/bench.hpp"
#include "armin/checkpoint.hpp"
#include "armin/config.hpp"
#include "armin/diagnostics.hpp"
#include "test_util.hpp"

using namespace armin;
using namespace armin::testing;
namespace fs = std::filesystem;

namespace {

// Bitwise reflected CRC-32 (polynomial 0xEDB88320).
std::uint32_t crc32_ref(const std::vector<std::uint8_t>& bytes) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::uint8_t b : bytes) {
    crc ^= b;
    for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
  }
  return ~crc;
}

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int n) {
  for (int k = 0; k < n; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

std::vector<ConfigEntry> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path p = fs::temp_directory_path() / ("armin_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Run cli(const std::string& args) {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = "cd '" + scratch().string() + "' && '" + std::string(ARMIN_CLI_PATH) + "' " + args +
                          " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

const char* kTinyCopy =
    "task = copy\n"
    "length_max = 3\n"
    "d_h = 8\n"
    "d_r = 4\n"
    "n_mem = 4\n"
    "iterations = 40\n"
    "val_interval = 20\n"
    "val_samples = 8\n";

}  // namespace

TEST_CASE("checkpoint bytes match a hand-built encoding") {
  std::vector<NamedTensor> ts{{"ab", Tensor(Matrix{{1.5, -2.0}})}, {"s", Tensor::vector({0.25})}};
  std::vector<std::uint8_t> expected{'A', 'R', 'M', 'N'};
  put(expected, 1, 4);
  put(expected, 2, 4);
  put(expected, 2, 2);
  expected.push_back('a');
  expected.push_back('b');
  expected.push_back(2);
  put(expected, 1, 4);
  put(expected, 2, 4);
  put(expected, std::bit_cast<std::uint64_t>(1.5), 8);
  put(expected, std::bit_cast<std::uint64_t>(-2.0), 8);
  put(expected, 1, 2);
  expected.push_back('s');
  expected.push_back(1);
  put(expected, 1, 4);
  put(expected, std::bit_cast<std::uint64_t>(0.25), 8);
  put(expected, crc32_ref(expected), 4);

  CHECK(encode_checkpoint(ts) == expected);
  CHECK(crc32_ref({'1', '2', '3', '4', '5', '6', '7', '8', '9'}) == 0xCBF43926u);
}

TEST_CASE("checkpoint round trip is bitwise and corruption is detected") {
  Rng rng(3);
  std::vector<NamedTensor> ts{{"w", random_tensor(rng, Shape{3, 4})},
                              {"m", random_tensor(rng, Shape{2, 3, 5})},
                              {"tiny", Tensor::vector({std::numeric_limits<double>::denorm_min()})}};
  auto bytes = encode_checkpoint(ts);
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.size() == ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    CHECK(back[k].name == ts[k].name);
    CHECK(back[k].value.shape() == ts[k].value.shape());
    CHECK(std::memcmp(back[k].value.data(), ts[k].value.data(), sizeof(double) * std::size_t(ts[k].value.size())) ==
          0);
  }
  CHECK(encode_checkpoint(back) == bytes);

  auto flipped = bytes;
  flipped[20] ^= 0x01;
  CHECK_THROWS_AS(decode_checkpoint(flipped), ChecksumError);
  auto short_bytes = std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + 10);
  CHECK_THROWS_AS(decode_checkpoint(short_bytes), DataError);

  std::vector<std::uint8_t> bad_magic{'X', 'R', 'M', 'N'};
  put(bad_magic, 1, 4);
  put(bad_magic, 0, 4);
  put(bad_magic, crc32_ref(bad_magic), 4);
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), DataError);
  std::vector<std::uint8_t> bad_version{'A', 'R', 'M', 'N'};
  put(bad_version, 9, 4);
  put(bad_version, 0, 4);
  put(bad_version, crc32_ref(bad_version), 4);
  CHECK_THROWS_WITH_AS(decode_checkpoint(bad_version), doctest::Contains("version"), DataError);

  CHECK_THROWS_AS(find_tensor(ts, "missing"), DataError);
  CHECK(has_tensor(ts, "m"));
}

TEST_CASE("checkpoint files and model restore") {
  Rng rng(5);
  const Model m = Model::make(ModelKind::armin, {8, 6, 4, 3, 6}, OutputKind::bits, rng);
  const std::string path = (scratch() / "m.ckpt").string();
  save_checkpoint(path, model_tensors(m));
  const Model back = model_from_tensors(load_checkpoint(path));
  CHECK(back.kind == m.kind);
  CHECK(back.output == m.output);
  CHECK(back.dims == m.dims);
  const auto a = m.parameters();
  const auto b = back.parameters();
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(a[k].second->matrix() == b[k].second->matrix());

  auto ts = model_tensors(m);
  for (auto& t : ts) {
    if (t.name == "out.w") t.value = Tensor::zeros(Shape{2, 2});
  }
  CHECK_THROWS_AS(model_from_tensors(ts), DimensionError);
  CHECK_THROWS_AS(load_checkpoint((scratch() / "absent.ckpt").string()), DataError);
}

TEST_CASE("config parsing") {
  const auto e = parse("# comment\n\nd_h = 32   # trailing\n  lr=0.001\n");
  REQUIRE(e.size() == 2);
  CHECK(e[0].key == "d_h");
  CHECK(e[0].value == "32");
  CHECK(e[0].line == 3);
  CHECK(e[1].key == "lr");
  CHECK(e[1].line == 4);

  CHECK_THROWS_WITH_AS(parse("d_h = 1\nd_h = 2\n"), doctest::Contains("d_h"), ConfigError);
  try {
    parse("a = 1\njunk\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& err) {
    CHECK(err.line() == 2);
  }

  TrainConfig cfg;
  try {
    apply_config(cfg, parse("d_h = 8\nbogus = 3\n"));
    FAIL("expected ConfigError");
  } catch (const ConfigError& err) {
    CHECK(err.line() == 2);
    CHECK(std::string(err.what()).find("bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_config(cfg, parse("d_h = eight\n")), ConfigError);
  CHECK_THROWS_AS(apply_config(cfg, parse("model = gru\n")), ConfigError);
  CHECK_THROWS_AS(read_config_file((scratch() / "nope.cfg").string()), ConfigError);
  CHECK_THROWS_AS(parse_override("d_h"), ConfigError);
  CHECK(parse_override("lr=0.5").value == "0.5");
}

TEST_CASE("task applies before its ranges and the format round trips") {
  TrainConfig cfg;
  apply_config(cfg, parse("length_max = 10\ntask = repeat_copy\nrepeats_max = 4\nlr = 0.002\nmode = soft\n"));
  CHECK(cfg.task.kind == TaskKind::repeat_copy);
  CHECK(cfg.task.length.hi == 10);
  CHECK(cfg.task.repeats.hi == 4);
  CHECK(cfg.adam.lr == 0.002);
  CHECK(cfg.gumbel.mode == AddressMode::soft);

  TrainConfig back;
  apply_config(back, parse(format_config(cfg)));
  CHECK(format_config(back) == format_config(cfg));

  const auto keys = config_keys();
  TrainConfig full;
  full.corpus = "text.txt";
  const auto listed = parse(format_config(full));
  CHECK(listed.size() == keys.size());
}

TEST_CASE("model gradcheck passes and flags an injected fault") {
  GradcheckSetup setup;
  const GradcheckReport ok = gradcheck_model(setup);
  CHECK(ok.max_error < 1e-4);
  CHECK(ok.tensors.size() == 9);
  CHECK(ok.coords_checked > 0);

  setup.kind = ModelKind::lstm;
  setup.dims.d_r = setup.dims.n_mem = 0;
  const GradcheckReport lstm = gradcheck_model(setup);
  CHECK(lstm.max_error < 1e-5);
  CHECK(lstm.tensors.size() == 4);

  GradcheckSetup bad;
  bad.inject_fault = true;
  const GradcheckReport faulty = gradcheck_model(bad);
  CHECK(faulty.max_error > 1e-2);
}

TEST_CASE("cli gen") {
  const Run a = cli("gen copy 1 --seed 1");
  CHECK(a.code == 0);
  CHECK(a.out.rfind("# sample 0\n", 0) == 0);
  CHECK(cli("gen copy 1 --seed 1").out == a.out);
  CHECK(cli("gen copy 1 --seed 2").out != a.out);

  // Input block of priority sort: 40 inputs, a delimiter and 30 answer steps.
  const Run p = cli("gen priority_sort 1");
  std::istringstream in(p.out);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line) && !line.empty()) ++rows;
  CHECK(rows == 71);

  CHECK(cli("gen sorting 1").code == 2);
}

TEST_CASE("cli config errors exit 2") {
  const Run missing = cli("--config nowhere.cfg train");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nowhere.cfg") != std::string::npos);

  write_file(scratch() / "dup.cfg", "d_h = 8\nlr = 0.1\nd_h = 9\n");
  const Run dup = cli("--config dup.cfg train");
  CHECK(dup.code == 2);
  CHECK(dup.err.find("d_h") != std::string::npos);

  write_file(scratch() / "bad.cfg", "d_h = 8\nlearning_rate = 0.1\n");
  const Run bad = cli("--config bad.cfg train");
  CHECK(bad.code == 2);
  CHECK(bad.err.find("line 2") != std::string::npos);

  CHECK(cli("--set nonsense=1 train").code == 2);
  CHECK(cli("frobnicate").code == 2);
}

TEST_CASE("cli train, resume and eval") {
  write_file(scratch() / "tiny.cfg", kTinyCopy);
  const Run t = cli("--config tiny.cfg --out full --set seed=7 train --quiet");
  REQUIRE(t.code == 0);
  CHECK(fs::exists(scratch() / "full" / "metrics.csv"));
  CHECK(fs::exists(scratch() / "full" / "model.ckpt"));
  CHECK(fs::exists(scratch() / "full" / "config.used"));
  CHECK(slurp(scratch() / "full" / "config.used").find("seed = 7") != std::string::npos);

  REQUIRE(cli("--config tiny.cfg --out part --set seed=7 train --quiet --stop-after 20").code == 0);
  REQUIRE(cli("--config tiny.cfg --out part --set seed=7 train --quiet --resume part/model.ckpt").code == 0);
  auto strip = [](const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
      const auto a = line.find(','), b = line.find(',', a + 1);
      out += line.substr(0, a) + line.substr(b) + "\n";
    }
    return out;
  };
  CHECK(strip(slurp(scratch() / "part" / "metrics.csv")) == strip(slurp(scratch() / "full" / "metrics.csv")));

  const Run e = cli("--config tiny.cfg eval full/model.ckpt");
  CHECK(e.code == 0);
  CHECK(e.out.find("loss ") != std::string::npos);
  CHECK(e.out.find("accuracy ") != std::string::npos);
  CHECK(cli("--config tiny.cfg eval full/model.ckpt").out == e.out);

  const Run mismatch = cli("eval full/model.ckpt --task assoc_recall");
  CHECK(mismatch.code == 3);
  CHECK(mismatch.err.find("d_i=9") != std::string::npos);

  auto bytes = slurp(scratch() / "full" / "model.ckpt");
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x10);
  write_file(scratch() / "corrupt.ckpt", bytes);
  CHECK(cli("eval corrupt.ckpt --task copy").code == 4);
  CHECK(cli("eval missing.ckpt --task copy").code == 2);

  CHECK(cli("--config tiny.cfg --out nan --set lr=1e300 --set clip=0 train --quiet").code == 5);
}

TEST_CASE("cli gradcheck") {
  const Run ok = cli("gradcheck");
  CHECK(ok.code == 0);
  for (const char* name : {"armin.w_ig", "armin.b_ig", "armin.w_go", "armin.b_go", "armin.w_s", "armin.b_s",
                           "armin.w_m", "out.w", "out.b"}) {
    CHECK(ok.out.find(name) != std::string::npos);
  }
  const Run fault = cli("gradcheck --inject-fault");
  CHECK(fault.code == 1);
  CHECK(fault.out.find("failed:") != std::string::npos);
  CHECK(cli("gradcheck --d-h 17").code == 2);
  CHECK(cli("gradcheck --steps 9").code == 2);
  CHECK(cli("gradcheck --model lstm --tol 1e-5").code == 0);
}

TEST_CASE("cli bench") {
  const Run r = cli("bench --d-h 16 --d-r 8 --n-mem 4 --chunk 10 --warmup 0 --duration 1 --repeats 1");
  CHECK(r.code == 0);
  CHECK(r.out.rfind(std::string(kBenchHeader) + "\n", 0) == 0);
  CHECK(cli("bench --matched --budget 1000000").code == 2);
  CHECK(cli("bench --duration 0.5").code == 2);
}
