#include <doctest.h>

#include <json.hpp>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gns/cli.hpp"

using namespace gns;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gnshoot_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
  fs::path file(const std::string& name) const { return path / name; }
};

fs::path write_config(const TempDir& dir, const std::string& name,
                      const std::string& body) {
  const fs::path p = dir.file(name);
  std::ofstream out(p);
  out << body;
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Strips timing columns (the trailing wall-clock field) from a solve CSV so
/// runs can be compared for bit-identical data.
std::string data_columns(const std::string& csv, int timing_fields) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '#') {
      out << line << '\n';
      continue;
    }
    for (int cut = 0; cut < timing_fields; ++cut) {
      const auto pos = line.rfind(',');
      if (pos != std::string::npos) line.erase(pos);
    }
    out << line << '\n';
  }
  return out.str();
}

const char* kSolveConfig = R"({
  "system": "scalar_unstable",
  "variant": {"type": "ilqr_gnms_m", "M": 5},
  "init": {"type": "steady_state"},
  "seed": 11,
  "threads": 1
})";

}  // namespace

TEST_CASE("config validation rejects unknown keys and bad fields") {
  TempDir dir;

  const fs::path bad_key = write_config(dir, "bad_key.json",
                                        R"({"system": "scalar_unstable", "wat": 1})");
  CHECK_THROWS_AS(load_config(bad_key), ConfigError);

  const fs::path bad_type =
      write_config(dir, "bad_type.json", R"({"system": 42})");
  CHECK_THROWS_AS(load_config(bad_type), ConfigError);

  const fs::path not_json = write_config(dir, "not_json.json", "{nope");
  CHECK_THROWS_AS(load_config(not_json), ConfigError);

  const fs::path nested = write_config(
      dir, "nested.json",
      R"({"system": "scalar_unstable", "termination": {"dmax": 1.0}})");
  try {
    load_config(nested);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("termination.dmax") != std::string::npos);
  }

  const fs::path good = write_config(dir, "good.json", kSolveConfig);
  const RunConfig cfg = load_config(good);
  CHECK(cfg.system == "scalar_unstable");
  CHECK(cfg.variant_name == "ilqr_gnms_m");
  CHECK(cfg.seed == 11);
}

TEST_CASE("solve command writes the iteration CSV and exits by status") {
  TempDir dir;
  const fs::path config = write_config(dir, "solve.json", kSolveConfig);

  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("out.csv");
  CHECK(cmd_solve(options) == exit_ok);

  const std::string csv = slurp(options.out_path);
  CHECK(csv.find("# config_hash=") == 0);
  CHECK(csv.find("seed=11") != std::string::npos);
  CHECK(csv.find("iter,cost,defect_l1,update_norm,alpha,wall_ms\n") !=
        std::string::npos);
  // Monotone-trending cost column: final below initial.
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);  // comment
  std::getline(in, line);  // header
  double first_cost = 0.0, last_cost = 0.0;
  bool first = true;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.find(',', line.find(',') + 1);
    const double cost = std::stod(line.substr(a + 1, b - a - 1));
    if (first) first_cost = cost;
    first = false;
    last_cost = cost;
  }
  CHECK(last_cost < first_cost);
}

TEST_CASE("M > N in the config exits 1 naming the field") {
  TempDir dir;
  const fs::path config = write_config(dir, "bad_m.json", R"({
    "system": "scalar_unstable",
    "N": 20,
    "variant": {"type": "gnms_m", "M": 25}
  })");
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("out.csv");
  CHECK(cmd_solve(options) == exit_config_error);
}

TEST_CASE("unstable runs exit 3") {
  TempDir dir;
  const fs::path config = write_config(dir, "ss.json", R"({
    "system": "scalar_unstable",
    "variant": {"type": "ss"},
    "init": {"type": "steady_state"}
  })");
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("out.csv");
  CHECK(cmd_solve(options) == exit_diverged);
}

TEST_CASE("dump-lq writes a JSON snapshot that round-trips") {
  TempDir dir;
  const fs::path config = write_config(dir, "solve.json", kSolveConfig);
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("out.csv");
  options.dump_lq_iter = 1;
  CHECK(cmd_solve(options) == exit_ok);

  const fs::path dump = dir.file("out.csv.lq_iter1.json");
  REQUIRE(fs::exists(dump));
  const std::string text = slurp(dump);
  CHECK(text.find("\"stages\"") != std::string::npos);
  CHECK(text.find("\"QN\"") != std::string::npos);

  // Round-trip through the JSON parser preserves the payload.
  const auto parsed = nlohmann::json::parse(text);
  CHECK(parsed["stages"].size() == 300);
  CHECK(parsed["stages"][0]["A"][0][0].is_number());
  CHECK(nlohmann::json::parse(parsed.dump()) == parsed);
}

TEST_CASE("solve runs are bit-identical apart from timing columns") {
  TempDir dir;
  const fs::path config = write_config(dir, "solve.json", kSolveConfig);
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("a.csv");
  CHECK(cmd_solve(options) == exit_ok);
  options.out_path = dir.file("b.csv");
  CHECK(cmd_solve(options) == exit_ok);
  CHECK(data_columns(slurp(dir.file("a.csv")), 1) ==
        data_columns(slurp(dir.file("b.csv")), 1));
}

TEST_CASE("mpc command writes the cycle CSV and a summary") {
  TempDir dir;
  const fs::path config = write_config(dir, "mpc.json", R"({
    "system": "scalar_unstable",
    "variant": {"type": "ilqr_gnms_m", "M": 5},
    "init": {"type": "steady_state"},
    "mpc": {"duration": 0.3},
    "threads": 1
  })");
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("cycles.csv");
  CHECK(cmd_mpc(options) == exit_ok);

  const std::string csv = slurp(options.out_path);
  CHECK(csv.find("cycle,t_sim,x_meas_0,cost_stage,feedback_ms,prep_ms\n") !=
        std::string::npos);
  int rows = 0;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#' && line[0] != 'c') ++rows;
  CHECK(rows == 30);  // 0.3 s at dt = 0.01

  SUBCASE("duration zero gives an empty log and exit 0") {
    CmdOptions zero = options;
    zero.duration = 0.0;
    zero.out_path = dir.file("empty.csv");
    CHECK(cmd_mpc(zero) == exit_ok);
    const std::string empty_csv = slurp(zero.out_path);
    int data_rows = 0;
    std::istringstream ein(empty_csv);
    while (std::getline(ein, line))
      if (!line.empty() && line[0] != '#' && line[0] != 'c') ++data_rows;
    CHECK(data_rows == 0);
  }

  SUBCASE("thread count changes timing columns only") {
    CmdOptions t1 = options;
    t1.threads = 1;
    t1.out_path = dir.file("t1.csv");
    CmdOptions t4 = options;
    t4.threads = 4;
    t4.out_path = dir.file("t4.csv");
    CHECK(cmd_mpc(t1) == exit_ok);
    CHECK(cmd_mpc(t4) == exit_ok);
    CHECK(data_columns(slurp(t1.out_path), 2) ==
          data_columns(slurp(t4.out_path), 2));
  }
}

TEST_CASE("contraction command emits the study table deterministically") {
  TempDir dir;
  const fs::path config = write_config(dir, "study.json", R"json({
    "system": "scalar_unstable",
    "N": 60,
    "variant": {"type": "ilqr"},
    "contraction": {"samples": 6, "scale": 0.1,
                    "variants": ["ilqr", "gnms", "ilqr-gnms(6)"]},
    "seed": 5,
    "threads": 2
  })json");
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("study.csv");
  options.json_summary = dir.file("study.json.out");
  CHECK(cmd_contraction(options) == exit_ok);

  const std::string csv = slurp(options.out_path);
  CHECK(csv.find("variant,M,mean_rate,std_rate,n_converged,n_excluded\n") !=
        std::string::npos);
  CHECK(csv.find("ilqr,1,") != std::string::npos);
  CHECK(csv.find("gnms,60,") != std::string::npos);
  CHECK(csv.find("ilqr-gnms(6),6,") != std::string::npos);

  const auto summary = nlohmann::json::parse(slurp(*options.json_summary));
  CHECK(summary.size() == 3);
  CHECK(summary[0]["n_converged"] == 6);

  options.out_path = dir.file("study2.csv");
  options.json_summary.reset();
  CHECK(cmd_contraction(options) == exit_ok);
  CHECK(slurp(dir.file("study.csv")) == slurp(dir.file("study2.csv")));
}

TEST_CASE("plant divergence during mpc exits 3") {
  TempDir dir;
  // Process noise violent enough to throw the plant out of any basin.
  const fs::path config = write_config(dir, "noisy.json", R"({
    "system": "scalar_unstable",
    "N": 40,
    "variant": {"type": "ilqr_gnms_m", "M": 4},
    "init": {"type": "steady_state"},
    "mpc": {"duration": 2.0, "noise_scale": 1e8},
    "threads": 1
  })");
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("cycles.csv");
  CHECK(cmd_mpc(options) == exit_diverged);
}

TEST_CASE("iteration-capped runs exit 2") {
  TempDir dir;
  const fs::path config = write_config(dir, "capped.json", R"({
    "system": "scalar_unstable",
    "variant": {"type": "gnms"},
    "init": {"type": "steady_state"},
    "termination": {"max_iters": 2}
  })");
  CmdOptions options;
  options.config_path = config;
  options.out_path = dir.file("out.csv");
  CHECK(cmd_solve(options) == exit_max_iters);
}

TEST_CASE("GNSHOOT_THREADS is the thread-count fallback") {
  TempDir dir;
  // threads omitted from the config entirely
  const fs::path config = write_config(dir, "env.json", R"({
    "system": "scalar_unstable",
    "N": 40,
    "variant": {"type": "ilqr_gnms_m", "M": 4},
    "init": {"type": "steady_state"}
  })");
  CmdOptions options;
  options.config_path = config;

  ::setenv("GNSHOOT_THREADS", "3", 1);
  options.out_path = dir.file("env3.csv");
  CHECK(cmd_solve(options) == exit_ok);
  ::setenv("GNSHOOT_THREADS", "1", 1);
  options.out_path = dir.file("env1.csv");
  CHECK(cmd_solve(options) == exit_ok);
  ::unsetenv("GNSHOOT_THREADS");

  CHECK(data_columns(slurp(dir.file("env3.csv")), 1) ==
        data_columns(slurp(dir.file("env1.csv")), 1));
}

TEST_CASE("argv interface dispatches subcommands and flag overrides") {
  TempDir dir;
  const fs::path config = write_config(dir, "solve.json", kSolveConfig);
  const fs::path out = dir.file("argv.csv");
  const std::string config_str = config.string();
  const std::string out_str = out.string();

  const char* argv[] = {"gnshoot",          "solve",
                        "--config",         config_str.c_str(),
                        "--out",            out_str.c_str(),
                        "--variant",        "ilqr_gnms_m",
                        "--intervals",      "6",
                        "--threads",        "1",
                        "--seed",           "3"};
  CHECK(run_cli(static_cast<int>(std::size(argv)), argv) == exit_ok);
  const std::string csv = slurp(out);
  CHECK(csv.find("seed=3") != std::string::npos);

  const char* bad[] = {"gnshoot", "solve"};
  CHECK(run_cli(2, bad) == exit_config_error);
}
