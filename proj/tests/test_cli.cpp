// Copyright 2026 The wseg Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Drives the wseg executable as a subprocess. WSEG_BIN names the binary.

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "wseg/config.hpp"
#include "wseg/data.hpp"
#include "wseg/network.hpp"
#include "wseg/raster.hpp"
#include "wseg/training.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "wseg_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

RunResult run(const std::string& args) {
  const char* bin = std::getenv("WSEG_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "WSEG_BIN is not set");
  const fs::path o = scratch() / "stdout.txt";
  const fs::path e = scratch() / "stderr.txt";
  const std::string cmd = std::string("\"") + bin + "\" " + args + " > \"" + o.string() +
                          "\" 2> \"" + e.string() + "\"";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = wseg::read_file(o);
  r.err = wseg::read_file(e);
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> v;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      v.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  v.push_back(cur);
  return v;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// Ten trivial samples at 32x64, generated once.
const fs::path& small_data() {
  static const fs::path root = [] {
    const fs::path r = scratch() / "data";
    const RunResult g = run("gen-data --out " + q(r) +
                            " --count 10 --net.height 32 --net.width 64 --seed 3");
    REQUIRE(g.code == 0);
    return r;
  }();
  return root;
}

const std::string kQuickTrain = " --net.widths 8,8,16,16 --net.stem 8 --neck.c_b 8"
                                " --train.batch 2 --aug.enabled false --seed 5 ";

// A one-epoch checkpoint over small_data().
const fs::path& small_ckpt() {
  static const fs::path ckpt = [] {
    const fs::path out = scratch() / "train1";
    const RunResult t = run("train --data " + q(small_data()) + " --out " + q(out) +
                            " --epochs 1" + kQuickTrain);
    REQUIRE_MESSAGE(t.code == 0, t.err);
    return out / "ckpt_1.wseg";
  }();
  return ckpt;
}

std::map<std::string, std::vector<std::string>> csv_rows(const std::string& text) {
  std::map<std::string, std::vector<std::string>> m;
  for (const std::string& l : lines(text)) {
    const auto f = split(l, ',');
    if (f.size() >= 2) m[f[0]] = std::vector<std::string>(f.begin() + 1, f.end());
  }
  return m;
}

}  // namespace

TEST_CASE("gen-data splits, echoes extents and is reproducible") {
  const fs::path a = scratch() / "gen_a";
  const fs::path b = scratch() / "gen_b";
  const std::string common = " --count 10 --net.height 24 --net.width 40 --seed 11";
  const RunResult ra = run("gen-data --out " + q(a) + common);
  REQUIRE(ra.code == 0);
  CHECK(ra.out.find("wrote 10 samples (9 train, 1 val)") != std::string::npos);
  REQUIRE(run("gen-data --out " + q(b) + common).code == 0);

  CHECK(lines(wseg::read_file(a / "train.txt")).size() == 9);
  CHECK(lines(wseg::read_file(a / "val.txt")).size() == 1);
  const wseg::DatasetMeta meta = wseg::read_meta(a);
  CHECK(meta.height == 24);
  CHECK(meta.width == 40);
  CHECK(meta.num_classes == 3);
  CHECK(fs::exists(a / "run_config.txt"));

  for (int i = 0; i < 10; ++i) {
    const std::string id = wseg::sample_id(i);
    CHECK(wseg::read_file(a / "img" / (id + ".ppm")) ==
          wseg::read_file(b / "img" / (id + ".ppm")));
    CHECK(wseg::read_file(a / "lab" / (id + ".pgm")) ==
          wseg::read_file(b / "lab" / (id + ".pgm")));
  }
  CHECK(wseg::read_file(a / "meta.txt") == wseg::read_file(b / "meta.txt"));
}

TEST_CASE("config errors exit nonzero with a kind line") {
  const RunResult unknown = run("params --no.such.key 1");
  CHECK(unknown.code != 0);
  CHECK(unknown.err.find("error kind=") != std::string::npos);

  const fs::path cfg = scratch() / "bad.cfg";
  wseg::write_file(cfg, "no.such.key=1\n");
  const RunResult from_file = run("params --config " + q(cfg) + " --out " + q(scratch()));
  CHECK(from_file.code == 1);
  CHECK(from_file.err.find("error kind=config") != std::string::npos);

  const RunResult bad_value = run("params --neck.kind banana --out " + q(scratch()));
  CHECK(bad_value.code == 1);
  CHECK(bad_value.err.find("error kind=config") != std::string::npos);

  const RunResult missing = run("train --data " + q(scratch() / "nowhere") + " --out " +
                                q(scratch() / "t_missing") + " --epochs 1");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error kind=") != std::string::npos);
}

TEST_CASE("train with zero epochs writes a header-only history") {
  const fs::path out = scratch() / "train0";
  const RunResult r =
      run("train --data " + q(small_data()) + " --out " + q(out) + " --epochs 0" + kQuickTrain);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto h = lines(wseg::read_file(out / "history.csv"));
  REQUIRE(h.size() == 1);
  CHECK(h[0] == "epoch,train_loss,val_miou");
  CHECK(r.out.find("finished 0 epochs") != std::string::npos);
}

TEST_CASE("train is reproducible and run_config.txt replays the run") {
  const fs::path a = scratch() / "rep_a";
  const fs::path b = scratch() / "rep_b";
  const std::string args = " --epochs 2" + kQuickTrain;
  const RunResult ra = run("train --data " + q(small_data()) + " --out " + q(a) + args);
  REQUIRE_MESSAGE(ra.code == 0, ra.err);
  REQUIRE(run("train --data " + q(small_data()) + " --out " + q(b) + args).code == 0);
  const std::string ha = wseg::read_file(a / "history.csv");
  CHECK(lines(ha).size() == 3);
  CHECK(ha == wseg::read_file(b / "history.csv"));
  // The embedded config records the output path, so compare the tensors.
  const wseg::Checkpoint ca = wseg::load_checkpoint(a / "ckpt_2.wseg");
  const wseg::Checkpoint cb = wseg::load_checkpoint(b / "ckpt_2.wseg");
  CHECK(ca.config_digest == cb.config_digest);
  REQUIRE(ca.params.size() == cb.params.size());
  for (std::size_t i = 0; i < ca.params.size(); ++i) {
    CHECK(ca.params[i].values == cb.params[i].values);
  }
  CHECK(ca.velocity == cb.velocity);
  CHECK(ra.out.find("epoch 1 train_loss ") != std::string::npos);

  // Replay from the recorded configuration with a different output directory.
  const fs::path c = scratch() / "rep_c";
  const RunResult rc =
      run("train --config " + q(a / "run_config.txt") + " --out " + q(c));
  REQUIRE_MESSAGE(rc.code == 0, rc.err);
  CHECK(wseg::read_file(c / "history.csv") == ha);
}

TEST_CASE("params reports consistent counts") {
  const RunResult r = run("params --out " + q(scratch() / "params"));
  REQUIRE(r.code == 0);
  const auto ls = lines(r.out);
  REQUIRE(!ls.empty());
  CHECK(ls[0] == "neck,block,conv_weights,conv_biases,norm_params,total");

  std::map<std::string, std::array<long long, 4>> sums;
  std::map<std::string, std::array<long long, 4>> totals;
  for (std::size_t i = 1; i < ls.size(); ++i) {
    const auto f = split(ls[i], ',');
    if (f.size() != 6 || (f[0] != "aspp" && f[0] != "wasp")) continue;
    std::array<long long, 4> v{};
    for (int k = 0; k < 4; ++k) v[k] = std::stoll(f[2 + k]);
    CHECK(v[0] + v[1] + v[2] == v[3]);
    if (f[1] == "total") {
      totals[f[0]] = v;
    } else {
      for (int k = 0; k < 4; ++k) sums[f[0]][k] += v[k];
    }
  }
  REQUIRE(totals.size() == 2);
  CHECK(sums["aspp"] == totals["aspp"]);
  CHECK(sums["wasp"] == totals["wasp"]);
  CHECK(totals["aspp"][0] == 30976);
  CHECK(totals["wasp"][0] == 17152);
  auto rows = csv_rows(r.out);
  CHECK(rows["reduction_conv_weights_pct"].at(0) == "44.63");
  CHECK(rows["configured_neck"].at(0) == "aspp");

  const RunResult w = run("params --variant hanet+wasp --out " + q(scratch() / "params"));
  REQUIRE(w.code == 0);
  CHECK(csv_rows(w.out)["configured_neck"].at(0) == "wasp");

  // With C_b equal to the backbone width the waterfall saves nothing.
  const RunResult eq = run("params --neck.c_b 64 --out " + q(scratch() / "params"));
  REQUIRE_MESSAGE(eq.code == 0, eq.err);
  CHECK(csv_rows(eq.out)["reduction_conv_weights_pct"].at(0) == "0.00");
}

TEST_CASE("eval with ground truth as prediction scores one") {
  const fs::path out = scratch() / "eval_gt";
  const RunResult r = run("eval --ckpt " + q(small_ckpt()) + " --out " + q(out) +
                          " --eval.gt_as_pred true --split train");
  REQUIRE_MESSAGE(r.code == 0, r.err);
  auto rows = csv_rows(r.out);
  CHECK(std::stod(rows["miou"].at(0)) == 1.0);
  CHECK(std::stod(rows["pixel_acc"].at(0)) == 1.0);
  CHECK(wseg::read_file(out / "metrics.csv") == r.out);
}

TEST_CASE("eval matches a brute-force confusion count") {
  const RunResult r = run("eval --ckpt " + q(small_ckpt()) + " --out " +
                          q(scratch() / "eval_model") + " --split train");
  REQUIRE_MESSAGE(r.code == 0, r.err);

  const wseg::Checkpoint ckpt = wseg::load_checkpoint(small_ckpt());
  wseg::RunConfig rc;
  rc.merge_text(ckpt.config_text, "checkpoint");
  wseg::Network net = wseg::Network::build(wseg::network_config(rc), rc.get_u64("seed"));
  wseg::load_parameters(net, ckpt);
  net.set_training(false);
  const wseg::Dataset data = wseg::load_dataset(small_data());
  const int k = data.meta.num_classes;
  std::vector<long long> tp(k), fp(k), fn(k);
  for (const wseg::Sample& s : data.train) {
    const wseg::Sample* p = &s;
    const wseg::Labels pred = net.predict(wseg::images_to_batch({&p, 1}));
    for (std::size_t i = 0; i < s.labels.data.size(); ++i) {
      const int g = s.labels.data[i];
      if (g == wseg::kIgnoreLabel) continue;
      const int y = pred.values[i];
      if (y == g) {
        ++tp[g];
      } else {
        ++fp[y];
        ++fn[g];
      }
    }
  }
  auto rows = csv_rows(r.out);
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < k; ++c) {
    const long long denom = tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    const double expect = static_cast<double>(tp[c]) / static_cast<double>(denom);
    const auto it = rows.find(data.meta.class_names[c]);
    REQUIRE(it != rows.end());
    CHECK(std::fabs(std::stod(it->second.at(0)) - expect) <= 1e-15);
    sum += expect;
    ++present;
  }
  CHECK(std::fabs(std::stod(rows["miou"].at(0)) - sum / present) <= 1e-15);
}

TEST_CASE("eval refuses a checkpoint whose config digest changes") {
  const RunResult r = run("eval --ckpt " + q(small_ckpt()) + " --out " +
                          q(scratch() / "eval_bad") + " --neck.kind wasp");
  CHECK(r.code == 1);
  CHECK(r.err.find("error kind=config") != std::string::npos);

  const fs::path junk = scratch() / "junk.wseg";
  wseg::write_file(junk, "not a checkpoint");
  const RunResult j = run("eval --ckpt " + q(junk) + " --out " + q(scratch() / "eval_bad"));
  CHECK(j.code == 1);
  CHECK(j.err.find("error kind=config") != std::string::npos);
}

TEST_CASE("predict writes a mask and overlay at the input size") {
  const fs::path img = small_data() / "img" / (wseg::sample_id(9) + ".ppm");
  const fs::path a = scratch() / "pred_a";
  const fs::path b = scratch() / "pred_b";
  const RunResult ra =
      run("predict --ckpt " + q(small_ckpt()) + " --image " + q(img) + " --out " + q(a));
  REQUIRE_MESSAGE(ra.code == 0, ra.err);
  REQUIRE(run("predict --ckpt " + q(small_ckpt()) + " --image " + q(img) + " --out " + q(b))
              .code == 0);
  CHECK(wseg::read_file(a / "mask.ppm") == wseg::read_file(b / "mask.ppm"));
  CHECK(wseg::read_file(a / "overlay.ppm") == wseg::read_file(b / "overlay.ppm"));

  const wseg::Image in = wseg::load_ppm(img);
  const wseg::Image mask = wseg::load_ppm(a / "mask.ppm");
  const wseg::Image ov = wseg::load_ppm(a / "overlay.ppm");
  CHECK(mask.height == in.height);
  CHECK(mask.width == in.width);
  CHECK(ov.height == in.height);
  CHECK(ov.width == in.width);
  int bad = 0;
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    const int x = wseg::quantize(in.data[i]);
    const int m = wseg::quantize(mask.data[i]);
    if (wseg::quantize(ov.data[i]) != (x + m + 1) / 2) ++bad;
  }
  CHECK(bad == 0);

  // A larger input is resized for the network and the mask comes back full size.
  wseg::Image big(3, 48, 80);
  for (double& v : big.data) v = 0.5;
  const fs::path big_path = scratch() / "big.ppm";
  wseg::save_ppm(big_path, big);
  const RunResult rb = run("predict --ckpt " + q(small_ckpt()) + " --image " + q(big_path) +
                           " --out " + q(scratch() / "pred_big"));
  REQUIRE_MESSAGE(rb.code == 0, rb.err);
  const wseg::Image bm = wseg::load_ppm(scratch() / "pred_big" / "mask.ppm");
  CHECK(bm.height == 48);
  CHECK(bm.width == 80);
}

TEST_CASE("predict rejects malformed or missing images") {
  const fs::path bad = scratch() / "bad.ppm";
  wseg::write_file(bad, "P6\n4 4\n255\nxx");
  const RunResult r =
      run("predict --ckpt " + q(small_ckpt()) + " --image " + q(bad) + " --out " + q(scratch()));
  CHECK(r.code == 1);
  CHECK(r.err.find("error kind=parse") != std::string::npos);

  const RunResult none = run("predict --ckpt " + q(small_ckpt()) + " --out " + q(scratch()));
  CHECK(none.code == 1);
  CHECK(none.err.find("error kind=usage") != std::string::npos);
}

TEST_CASE("bench enforces a minimum iteration count") {
  const fs::path out = scratch() / "bench";
  const std::string small = " --net.height 32 --net.width 64 --bench.batch 1 --out " + q(out);
  const RunResult few = run("bench --iters 4" + small);
  CHECK(few.code == 1);
  CHECK(few.err.find("error kind=usage") != std::string::npos);

  const RunResult ok = run("bench --iters 5" + small);
  REQUIRE_MESSAGE(ok.code == 0, ok.err);
  const auto ls = lines(ok.out);
  REQUIRE(ls.size() >= 3);
  CHECK(ls[0] == "variant,median_ms,iqr_ms");
  auto rows = csv_rows(ok.out);
  REQUIRE(rows.count("aspp") == 1);
  REQUIRE(rows.count("wasp") == 1);
  for (const char* v : {"aspp", "wasp"}) {
    CHECK(std::stod(rows[v].at(0)) > 0.0);
    CHECK(std::stod(rows[v].at(1)) >= 0.0);
  }
}
