#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = pbn::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<json> records(const std::string& text) {
  std::vector<json> recs;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) recs.push_back(json::parse(line));
  }
  return recs;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("pbn_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = path / name;
    std::ofstream(p) << text;
    return p.string();
  }
};

const char* kIdentity =
    "pbn 1\nnodes 1\nperturbation 0.1\nnode 0 x\nfunc 1.0 : 0 : 01\nend\n";

}  // namespace

TEST_CASE("safe-n0 prints the table range") {
  const Result r = call({"safe-n0", "--r", "0.001", "--s", "0.95"});
  CHECK(r.code == 0);
  const auto recs = records(r.out);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0]["range"] == "[2,1383]");
  CHECK(recs[0]["lower"] == 2);
  CHECK(recs[0]["upper"] == 1383);
}

TEST_CASE("density of the identity model") {
  TempDir dir;
  const std::string model = dir.write("id.pbn", kIdentity);
  const Result r = call({"density", "--model", model});
  CHECK(r.code == 0);
  const auto recs = records(r.out);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0]["density"].get<double>() == 1.0);
  CHECK(recs[0]["model_hash"].get<std::string>().size() == 16);
}

TEST_CASE("exit codes") {
  TempDir dir;
  const std::string model = dir.write("id.pbn", kIdentity);
  CHECK(call({}).code == 1);
  CHECK(call({"no-such-command"}).code == 1);
  CHECK(call({"steady", "--model", model, "--r", "0.01", "--seed", "1"}).code == 1);
  CHECK(call({"steady", "--model", model, "--predicate", "x=1", "--r", "0.01"}).code == 1);
  CHECK(call({"steady", "--model", model, "--predicate", "y=1", "--r", "0.01", "--seed", "1"}).code == 1);
  CHECK(call({"safe-n0", "--r", "2"}).code == 1);
  CHECK(call({"density", "--model", (dir.path / "missing.pbn").string()}).code == 2);
  const std::string bad = dir.write("bad.pbn", "pbn 1\nnodes 1\nperturbation 0.1\nnode 0\nfunc 0.6 : 0 : 01\nend\n");
  const Result parse = call({"density", "--model", bad});
  CHECK(parse.code == 2);
  CHECK(parse.err.find("line") != std::string::npos);
  // p = 0 makes the chain reducible; the estimator refuses it.
  const std::string frozen = dir.write("frozen.pbn", "pbn 1\nnodes 1\nperturbation 0\nnode 0\nfunc 1 : 0 : 01\nend\n");
  CHECK(call({"steady", "--model", frozen, "--predicate", "0=1", "--r", "0.01", "--seed", "1"}).code == 2);
  CHECK(call({"--help"}).code == 0);
}

TEST_CASE("steady records are deterministic and parseable") {
  TempDir dir;
  const std::string model = dir.write("id.pbn", kIdentity);
  const std::vector<std::string> args{"steady", "--model", model, "--predicate", "x = 1",
                                      "--r", "0.01", "--seed", "17", "--replications", "3"};
  const Result a = call(args), b = call(args);
  REQUIRE(a.code == 0);
  auto ra = records(a.out), rb = records(b.out);
  REQUIRE(ra.size() == 4);
  REQUIRE(rb.size() == 4);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ra[i]["seed"] == 17 + i);
    CHECK(ra[i]["predicate"] == "0=1");
    CHECK(ra[i]["params"]["n0_resolved"] == 136);
    CHECK(std::abs(ra[i]["q_hat"].get<double>() - 0.5) < 0.05);
    ra[i].erase("wall_time_ms");
    rb[i].erase("wall_time_ms");
    CHECK(ra[i] == rb[i]);
  }
  CHECK(ra[3]["summary"] == true);
  CHECK(ra[3]["q_hat_mean"] == rb[3]["q_hat_mean"]);

  // The job count does not change the numbers.
  auto with_jobs = args;
  with_jobs.insert(with_jobs.end(), {"--jobs", "3"});
  auto rc = records(call(with_jobs).out);
  REQUIRE(rc.size() == 4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rc[i]["q_hat"] == ra[i]["q_hat"]);
}

TEST_CASE("exact, influence and sensitivity commands") {
  TempDir dir;
  const std::string model = dir.write(
      "xor.pbn",
      "pbn 1\nnodes 3\nperturbation 0.05\n"
      "node 0 a\nfunc 0.7 : 1 : 01\nfunc 0.3 : - : 1\n"
      "node 1 b\nfunc 0.5 : 0 : 01\nfunc 0.5 : - : 0\n"
      "node 2 c\nfunc 1 : 0,1 : 0110\nend\n");

  const auto ex = records(call({"exact", "--model", model, "--predicate", "a=1&b=0", "--observe", "a,c"}).out);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0]["residual"].get<double>() < 1e-10);
  CHECK(ex[0]["joint"]["probs"].size() == 4);

  const auto inf = records(call({"influence", "--model", model, "--target", "c"}).out);
  REQUIRE(inf.size() == 1);
  CHECK(inf[0]["mode"] == "uniform");
  CHECK(inf[0]["influences"][0]["influence"].get<double>() == 1.0);

  const Result est = call({"influence", "--model", model, "--target", "c", "--mode", "estimated", "--r", "0.02"});
  CHECK(est.code == 1);  // estimated mode needs a seed

  const auto sens = records(
      call({"sensitivity", "--model", model, "--node", "c", "--observe", "a,b", "--kind", "onoff", "--exact"}).out);
  REQUIRE(sens.size() == 1);
  CHECK(sens[0]["sensitivity"].get<double>() < 1e-9);
}

TEST_CASE("generate writes a loadable model") {
  TempDir dir;
  const std::string path = (dir.path / "gen.pbn").string();
  const Result g = call({"--out", path, "generate", "--nodes", "20", "--seed", "4"});
  REQUIRE(g.code == 0);
  const auto rec = records(g.out);
  REQUIRE(rec.size() == 1);
  const auto d = records(call({"density", "--model", path}).out);
  REQUIRE(d.size() == 1);
  CHECK(d[0]["density"] == rec[0]["density"]);
  CHECK(d[0]["nodes"] == 20);

  const Result text = call({"generate", "--nodes", "20", "--seed", "4"});
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(text.out == ss.str());
}

TEST_CASE("pretty mode") {
  const Result r = call({"--pretty", "safe-n0", "--r", "0.01", "--s", "0.95"});
  CHECK(r.code == 0);
  CHECK(r.out.find("[2,136]") != std::string::npos);
  CHECK(r.out.find('{') == std::string::npos);
}

TEST_CASE("fnv1a") {
  CHECK(pbn::cli::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(pbn::cli::fnv1a_hex("a") == "af63dc4c8601ec8c");
}
