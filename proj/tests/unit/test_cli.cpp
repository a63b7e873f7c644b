#include "doctest.h"

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

// End-to-end checks of the installed command-line surface. The binary path
// arrives via the CRLPRUNE_BIN environment variable set by CTest.

namespace {

std::string binary() {
  const char* bin = std::getenv("CRLPRUNE_BIN");
  return bin ? bin : "";
}

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("crlprune-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

int run(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_quick_config(const std::filesystem::path& path) {
  std::ofstream out(path);
  out << R"({
  "seed": 5,
  "dataset": {"train_size": 64, "test_size": 32},
  "pretrain": {"steps": 40},
  "env": {"alpha": 100, "finetune_schedule": [0, 2, 4]},
  "ppo": {"iterations": 3, "episodes_per_iteration": 2, "epochs": 2}
})";
}

}  // namespace

TEST_CASE("pretrain is byte-reproducible for a fixed seed") {
  REQUIRE_FALSE(binary().empty());
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";
  write_quick_config(cfg);

  const std::string a = (tmp.path / "a").string();
  const std::string b = (tmp.path / "b").string();
  CHECK(run(binary() + " pretrain --config " + cfg.string() + " --out " + a) == 0);
  CHECK(run(binary() + " pretrain --config " + cfg.string() + " --out " + b) == 0);
  CHECK(slurp(tmp.path / "a" / "checkpoint.json") == slurp(tmp.path / "b" / "checkpoint.json"));
}

TEST_CASE("prune exits zero when the budget is met and writes its report") {
  REQUIRE_FALSE(binary().empty());
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";
  write_quick_config(cfg);

  const std::string pre = (tmp.path / "pre").string();
  REQUIRE(run(binary() + " pretrain --config " + cfg.string() + " --out " + pre) == 0);

  const std::string out = (tmp.path / "prune").string();
  CHECK(run(binary() + " prune --config " + cfg.string() + " --checkpoint " + pre +
            "/checkpoint.json --out " + out) == 0);
  CHECK(std::filesystem::exists(tmp.path / "prune" / "iterations.csv"));
  CHECK(std::filesystem::exists(tmp.path / "prune" / "summary.json"));

  CHECK(run(binary() + " report " + out) == 0);
}

TEST_CASE("baseline supports fixed ratios and matching a prune run") {
  REQUIRE_FALSE(binary().empty());
  TempDir tmp;
  const auto cfg = tmp.path / "config.json";
  write_quick_config(cfg);

  const std::string pre = (tmp.path / "pre").string();
  REQUIRE(run(binary() + " pretrain --config " + cfg.string() + " --out " + pre) == 0);
  const std::string prune_out = (tmp.path / "prune").string();
  REQUIRE(run(binary() + " prune --config " + cfg.string() + " --checkpoint " + pre +
              "/checkpoint.json --out " + prune_out) == 0);

  CHECK(run(binary() + " baseline --config " + cfg.string() + " --checkpoint " + pre +
            "/checkpoint.json --ratio 0.5 --out " + (tmp.path / "base").string()) == 0);
  CHECK(run(binary() + " baseline --config " + cfg.string() + " --checkpoint " + pre +
            "/checkpoint.json --match " + prune_out + " --out " +
            (tmp.path / "matched").string()) == 0);
  CHECK(std::filesystem::exists(tmp.path / "matched" / "summary.json"));
}

TEST_CASE("bad inputs produce clean nonzero exits") {
  REQUIRE_FALSE(binary().empty());
  TempDir tmp;

  // corrupt dataset path
  const auto cfg = tmp.path / "config.json";
  std::ofstream(cfg) << R"({"dataset": {"type": "binary", "path": "/nonexistent/data.bin"}})";
  CHECK(run(binary() + " pretrain --config " + cfg.string() + " --out " +
            (tmp.path / "x").string()) != 0);

  // missing checkpoint
  const auto cfg2 = tmp.path / "config2.json";
  write_quick_config(cfg2);
  CHECK(run(binary() + " prune --config " + cfg2.string() + " --checkpoint /nonexistent.json" +
            " --out " + (tmp.path / "y").string()) != 0);

  // unknown cost function
  CHECK(run(binary() + " pretrain --config " + cfg2.string() + " --cost warp_speed --out " +
            (tmp.path / "z").string()) != 0);

  // report on a directory without a summary
  CHECK(run(binary() + " report " + (tmp.path / "void").string()) != 0);
}
