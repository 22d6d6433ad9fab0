#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace {

struct Run {
  int status = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(CLI_PATH) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

std::string model(const char* name) { return std::string("--model ") + MODELS_DIR + "/" + name; }

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run("classify").status == 1);
  CHECK(run("nosuch").status == 1);
  CHECK(run("recover " + model("gbm_log.json") + " --beta 0.05 --side up").status == 1);
  CHECK(run("recover " + model("missing.json") + " --beta 0.05 --side left").status == 1);
  CHECK(run("recover " + model("bm2d.json") + " --beta 1 --mode direction_nd --gamma 1,0").status ==
        2);
  CHECK(run("recover " + model("gbm_log.json") + " --beta 0.07 --side left").status == 2);
}

TEST_CASE("classify reports the critical value") {
  const auto r = run("classify " + model("gbm_log.json"));
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(std::abs(j["beta_bar"].get<double>() - 0.06125) <= 1e-6);
}

TEST_CASE("recover writes the recovered drift") {
  const auto r = run("recover " + model("gbm_log.json") + " --beta 0.05 --side right --paths 2000");
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["certificate"]["verdict"] == "admissible");
  for (const auto& s : j["drift_samples"])
    CHECK(s["drift"][0].get<double>() == doctest::Approx(0.03).epsilon(1e-8));
}

TEST_CASE("simulate without noise") {
  const auto r =
      run("simulate " + model("deterministic.json") + " --T 2 --dt 0.25 --paths 6 --x0 1");
  REQUIRE(r.status == 0);
  CHECK(r.out.find("terminal_mean,x1,2,0") != std::string::npos);
  CHECK(r.out.find("terminal_variance,x1,0,0") != std::string::npos);
}

TEST_CASE("outputs are reproducible") {
  namespace fs = std::filesystem;
  const fs::path tmp = fs::temp_directory_path() / "martin_cli_test";
  fs::create_directories(tmp);
  const std::string rec = (tmp / "rec.json").string();
  {
    const auto r = run("recover " + model("gbm_log.json") + " --beta 0.05 --side left --paths 2000");
    REQUIRE(r.status == 0);
    FILE* f = std::fopen(rec.c_str(), "w");
    std::fwrite(r.out.data(), 1, r.out.size(), f);
    std::fclose(f);
  }
  const std::string cmds[] = {
      "classify " + model("tanh_rate.json"),
      "kernels " + model("gbm_log.json") + " --beta 0.05 --points 9 --span 3",
      "certify " + model("gbm_log.json") + " --beta 0.05 --candidate 'exp(-1.5*x)' --paths 2000",
      "recover " + model("dh_eq_h.json") + " --beta 0 --mode mixture --weights 0.5,0.5 --paths 2000",
      "simulate --recovered " + rec + " --T 1 --paths 1000 --x0 0.1",
      "yield " + model("tanh_rate.json") + " --horizons 1,2 --paths 1000",
      "cashflow --recovered " + rec + " --payoff phi --horizons 1,2 --paths 1000",
      "verify " + model("gbm_log.json") + " --paths 1000",
  };
  for (const auto& c : cmds) {
    INFO(c);
    const auto a = run(c + " --threads 1");
    const auto b = run(c + " --threads 4");
    const auto again = run(c + " --threads 4");
    CHECK(a.status == 0);
    CHECK(!a.out.empty());
    CHECK(a.out == b.out);
    CHECK(b.out == again.out);
  }
  fs::remove_all(tmp);
}
