#include "gns/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gns/cost.hpp"
#include "gns/lq.hpp"

namespace gns {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void reject_unknown_keys(const json& obj, const std::vector<std::string>& allowed,
                         const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown config key '" + path + key + "'", path + key);
  }
}

Vector parse_vector(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError("'" + field + "' must be an array", field);
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number())
      throw ConfigError("'" + field + "' must contain numbers", field);
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

std::vector<Vector> parse_vector_list(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError("'" + field + "' must be an array", field);
  std::vector<Vector> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(parse_vector(j[i], field + "[" + std::to_string(i) + "]"));
  return out;
}

double require_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw ConfigError("'" + field + "' must be a number", field);
  return j.get<double>();
}

int require_int(const json& j, const std::string& field) {
  if (!j.is_number_integer())
    throw ConfigError("'" + field + "' must be an integer", field);
  return j.get<int>();
}

VariantConfig parse_variant(const json& j, const std::string& name, int horizon,
                            std::optional<int> intervals_override) {
  VariantConfig v;
  int m = intervals_override.value_or(0);
  if (j.contains("M")) m = require_int(j["M"], "variant.M");
  if (intervals_override) m = *intervals_override;

  if (name == "ss") {
    v = VariantConfig::single_shooting();
  } else if (name == "ilqr") {
    v = VariantConfig::ilqr();
  } else if (name == "gnms") {
    v = VariantConfig::gnms(horizon);
  } else if (name == "gnms_m") {
    if (m <= 0) throw ConfigError("variant.M is required for gnms_m", "variant.M");
    v = VariantConfig::gnms_m(m);
  } else if (name == "ilqr_gnms_m") {
    if (m <= 0)
      throw ConfigError("variant.M is required for ilqr_gnms_m", "variant.M");
    v = VariantConfig::ilqr_gnms_m(m);
  } else if (name == "custom") {
    if (m <= 0) throw ConfigError("variant.M is required for custom", "variant.M");
    if (!j.contains("closed_loop"))
      throw ConfigError("variant.closed_loop is required for custom",
                        "variant.closed_loop");
    v = VariantConfig{m, j["closed_loop"].get<bool>()};
  } else {
    throw ConfigError("unknown variant type '" + name + "'", "variant.type");
  }
  if (v.intervals < 1 || v.intervals > horizon)
    throw ConfigError("variant.M must satisfy 1 <= M <= N (M=" +
                          std::to_string(v.intervals) +
                          ", N=" + std::to_string(horizon) + ")",
                      "variant.M");
  return v;
}

/// Names as they appear in study tables: ss, ilqr, gnms, gnms(M),
/// ilqr-gnms(M).
VariantConfig parse_compact_variant(const std::string& name, int horizon) {
  const auto intervals_of = [&](const std::string& text,
                                std::size_t open) -> int {
    const std::size_t close = text.find(')', open);
    if (close == std::string::npos)
      throw ConfigError("malformed variant name '" + text + "'",
                        "contraction.variants");
    return std::stoi(text.substr(open + 1, close - open - 1));
  };
  VariantConfig v;
  if (name == "ss") {
    v = VariantConfig::single_shooting();
  } else if (name == "ilqr") {
    v = VariantConfig::ilqr();
  } else if (name == "gnms") {
    v = VariantConfig::gnms(horizon);
  } else if (name.rfind("gnms(", 0) == 0) {
    v = VariantConfig::gnms_m(intervals_of(name, 4));
  } else if (name.rfind("ilqr-gnms(", 0) == 0) {
    v = VariantConfig::ilqr_gnms_m(intervals_of(name, 9));
  } else {
    throw ConfigError("unknown variant name '" + name + "'",
                      "contraction.variants");
  }
  if (v.intervals < 1 || v.intervals > horizon)
    throw ConfigError("variant '" + name + "' needs 1 <= M <= N",
                      "contraction.variants");
  return v;
}

}  // namespace

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be an object");

  reject_unknown_keys(j, {"system", "dt", "N", "cost", "variant", "init",
                          "termination", "line_search", "mpc", "contraction",
                          "seed", "threads"},
                      "");

  RunConfig cfg;
  if (!j.contains("system") || !j["system"].is_string())
    throw ConfigError("'system' (string) is required", "system");
  cfg.system = j["system"].get<std::string>();

  if (j.contains("dt")) cfg.overrides.dt = require_number(j["dt"], "dt");
  if (j.contains("N")) cfg.overrides.horizon = require_int(j["N"], "N");

  if (j.contains("cost")) {
    const json& c = j["cost"];
    reject_unknown_keys(c, {"Q", "R", "QN", "x_des", "u_des", "seed"}, "cost.");
    if (c.contains("Q")) cfg.overrides.q_weight = require_number(c["Q"], "cost.Q");
    if (c.contains("R")) cfg.overrides.r_weight = require_number(c["R"], "cost.R");
    if (c.contains("QN"))
      cfg.overrides.q_terminal_weight = require_number(c["QN"], "cost.QN");
    if (c.contains("x_des")) cfg.overrides.x_des = parse_vector(c["x_des"], "cost.x_des");
    if (c.contains("u_des")) cfg.overrides.u_des = parse_vector(c["u_des"], "cost.u_des");
    if (c.contains("seed"))
      cfg.overrides.seed = static_cast<unsigned long long>(require_int(c["seed"], "cost.seed"));
  }

  if (j.contains("variant")) {
    const json& v = j["variant"];
    reject_unknown_keys(v, {"type", "M", "closed_loop"}, "variant.");
    if (!v.contains("type") || !v["type"].is_string())
      throw ConfigError("'variant.type' (string) is required", "variant.type");
    cfg.variant_name = v["type"].get<std::string>();
  }

  if (j.contains("init")) {
    const json& i = j["init"];
    reject_unknown_keys(i, {"type", "x_goal", "X", "U"}, "init.");
    if (!i.contains("type") || !i["type"].is_string())
      throw ConfigError("'init.type' (string) is required", "init.type");
    cfg.init_type = i["type"].get<std::string>();
    if (cfg.init_type == "interpolate") {
      if (!i.contains("x_goal"))
        throw ConfigError("'init.x_goal' is required for interpolate", "init.x_goal");
      cfg.init_x_goal = parse_vector(i["x_goal"], "init.x_goal");
    } else if (cfg.init_type == "provided") {
      if (!i.contains("X") || !i.contains("U"))
        throw ConfigError("'init.X' and 'init.U' are required for provided",
                          "init.X");
      cfg.init_states = parse_vector_list(i["X"], "init.X");
      cfg.init_controls = parse_vector_list(i["U"], "init.U");
    } else if (cfg.init_type != "steady_state") {
      throw ConfigError("unknown init type '" + cfg.init_type + "'", "init.type");
    }
  }

  if (j.contains("termination")) {
    const json& t = j["termination"];
    reject_unknown_keys(t, {"j_rel_min", "d_max", "max_iters"}, "termination.");
    if (t.contains("j_rel_min"))
      cfg.solver.cost_change_tolerance =
          require_number(t["j_rel_min"], "termination.j_rel_min");
    if (t.contains("d_max"))
      cfg.solver.defect_tolerance = require_number(t["d_max"], "termination.d_max");
    if (t.contains("max_iters"))
      cfg.solver.max_iterations = require_int(t["max_iters"], "termination.max_iters");
  }

  if (j.contains("line_search")) {
    const json& l = j["line_search"];
    reject_unknown_keys(l, {"enabled", "rho"}, "line_search.");
    if (l.contains("enabled")) {
      if (!l["enabled"].is_boolean())
        throw ConfigError("'line_search.enabled' must be a boolean",
                          "line_search.enabled");
      cfg.solver.line_search.enabled = l["enabled"].get<bool>();
    }
    if (l.contains("rho"))
      cfg.solver.line_search.merit_defect_weight =
          require_number(l["rho"], "line_search.rho");
  }

  if (j.contains("mpc")) {
    const json& m = j["mpc"];
    reject_unknown_keys(m, {"duration", "shift", "noise_scale"}, "mpc.");
    if (m.contains("duration")) cfg.mpc_duration = require_number(m["duration"], "mpc.duration");
    if (m.contains("shift")) cfg.mpc_shift = require_int(m["shift"], "mpc.shift");
    if (m.contains("noise_scale"))
      cfg.noise_scale = require_number(m["noise_scale"], "mpc.noise_scale");
  }

  if (j.contains("contraction")) {
    const json& c = j["contraction"];
    reject_unknown_keys(c, {"samples", "scale", "variants"}, "contraction.");
    if (c.contains("samples"))
      cfg.contraction_samples = require_int(c["samples"], "contraction.samples");
    if (c.contains("scale"))
      cfg.contraction_scale = require_number(c["scale"], "contraction.scale");
    if (c.contains("variants")) {
      if (!c["variants"].is_array())
        throw ConfigError("'contraction.variants' must be an array",
                          "contraction.variants");
      cfg.contraction_variants.clear();
      for (const auto& v : c["variants"]) {
        if (!v.is_string())
          throw ConfigError("'contraction.variants' must contain strings",
                            "contraction.variants");
        cfg.contraction_variants.push_back(v.get<std::string>());
      }
    }
  }

  if (j.contains("seed"))
    cfg.seed = static_cast<unsigned long long>(require_int(j["seed"], "seed"));
  if (j.contains("threads")) cfg.threads = require_int(j["threads"], "threads");
  return cfg;
}

std::string config_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned long long hash = 0xcbf29ce484222325ull;
  char c;
  while (in.get(c)) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001b3ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", hash);
  return buf;
}

namespace {

int resolve_threads(const RunConfig& cfg, const CmdOptions& options) {
  if (options.threads) return *options.threads;
  if (cfg.threads > 0) return cfg.threads;
  if (const char* env = std::getenv("GNSHOOT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return ThreadPool::resolve_thread_count(0);
}

struct LoadedRun {
  RunConfig cfg;
  OcProblem problem;
  VariantConfig variant;
  InitStrategy init;
  int threads = 1;
};

LoadedRun prepare_run(const CmdOptions& options) {
  LoadedRun run;
  run.cfg = load_config(options.config_path);
  if (options.seed) run.cfg.seed = *options.seed;
  if (options.line_search) run.cfg.solver.line_search.enabled = *options.line_search;
  if (options.variant) run.cfg.variant_name = *options.variant;
  if (options.samples) run.cfg.contraction_samples = *options.samples;
  if (options.duration) run.cfg.mpc_duration = *options.duration;
  if (options.shift) run.cfg.mpc_shift = *options.shift ? 1 : 0;

  if (!run.cfg.overrides.seed) run.cfg.overrides.seed = run.cfg.seed;
  run.problem = make_benchmark_problem(run.cfg.system, run.cfg.overrides);
  run.threads = resolve_threads(run.cfg, options);
  run.cfg.solver.threads = run.threads;

  json variant_extra = json::object();
  // Re-validate the variant against the actual horizon (flags may override).
  {
    std::ifstream in(options.config_path);
    json j;
    in >> j;
    if (j.contains("variant")) variant_extra = j["variant"];
  }
  run.variant = parse_variant(variant_extra, run.cfg.variant_name,
                              run.problem.horizon, options.intervals);

  if (run.cfg.init_type == "steady_state") {
    run.init = InitSteadyState{};
  } else if (run.cfg.init_type == "interpolate") {
    run.init = InitInterpolate{*run.cfg.init_x_goal};
  } else {
    run.init = InitProvided{run.cfg.init_states, run.cfg.init_controls};
  }
  return run;
}

void write_header_comment(std::ostream& os, const CmdOptions& options,
                          const RunConfig& cfg) {
  os << "# config_hash=" << config_hash(options.config_path) << " seed=" << cfg.seed
     << " system=" << cfg.system << "\n";
}

json lq_to_json(const LQSubproblem& lq) {
  const auto matrix_to_json = [](const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  const auto vector_to_json = [](const Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
  };

  json stages = json::array();
  for (const LQSubproblem::Stage& st : lq.stages) {
    stages.push_back({{"A", matrix_to_json(st.A)},
                      {"B", matrix_to_json(st.B)},
                      {"d", vector_to_json(st.d)},
                      {"Q", matrix_to_json(st.Q)},
                      {"q", vector_to_json(st.q)},
                      {"q0", st.q0},
                      {"R", matrix_to_json(st.R)},
                      {"r", vector_to_json(st.r)},
                      {"P", matrix_to_json(st.P)}});
  }
  return {{"stages", std::move(stages)},
          {"QN", matrix_to_json(lq.Q_terminal)},
          {"qN", vector_to_json(lq.q_terminal)},
          {"q0N", lq.q0_terminal}};
}

int status_exit_code(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged: return exit_ok;
    case SolveStatus::max_iters: return exit_max_iters;
    default: return exit_diverged;
  }
}

}  // namespace

int cmd_solve(const CmdOptions& options) {
  try {
    LoadedRun run = prepare_run(options);

    if (options.dump_lq_iter) {
      const int dump_iter = *options.dump_lq_iter;
      std::filesystem::path dump_path = options.out_path;
      dump_path += ".lq_iter" + std::to_string(dump_iter) + ".json";
      run.cfg.solver.lq_observer = [dump_iter, dump_path](int iter,
                                                          const LQSubproblem& lq) {
        if (iter != dump_iter) return;
        std::ofstream out(dump_path);
        out << lq_to_json(lq).dump(1) << "\n";
      };
    }

    std::ofstream out(options.out_path);
    if (!out) throw ConfigError("cannot open output file", "--out");
    write_header_comment(out, options, run.cfg);
    out << "iter,cost,defect_l1,update_norm,alpha,wall_ms\n";
    run.cfg.solver.record_sink = [&out](const IterationRecord& r) {
      out << r.iter << ',' << fmt(r.cost) << ',' << fmt(r.defect_l1) << ','
          << fmt(r.update_norm) << ',' << fmt(r.alpha) << ',' << fmt(r.wall_ms)
          << "\n";
    };

    const Initialization init =
        initialize(run.problem, run.variant, run.init, nullptr);
    const SolveResult result = solve(run.problem, run.variant, run.cfg.solver, init);
    std::cerr << "status=" << to_string(result.status)
              << " iterations=" << result.records.size()
              << " final_cost=" << fmt(result.records.empty()
                                           ? result.initial_cost
                                           : result.records.back().cost)
              << "\n";
    return status_exit_code(result.status);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_diverged;
  }
}

int cmd_mpc(const CmdOptions& options) {
  try {
    LoadedRun run = prepare_run(options);

    const Initialization init =
        initialize(run.problem, run.variant, run.init, nullptr);
    const SolveResult presolve = solve(run.problem, run.variant, run.cfg.solver, init);
    if (presolve.status == SolveStatus::diverged ||
        presolve.status == SolveStatus::unstable_rollout) {
      std::cerr << "error: warm-start solve failed (" << to_string(presolve.status)
                << ")\n";
      return exit_diverged;
    }

    NmpcSettings nmpc_settings;
    nmpc_settings.shift_per_cycle = run.cfg.mpc_shift;
    nmpc_settings.threads = run.threads;
    nmpc_settings.regularization = run.cfg.solver.regularization;
    NmpcController controller(
        run.problem, run.variant, nmpc_settings, presolve.trajectory,
        tracking_policy(presolve.policy, presolve.trajectory));

    NoiseConfig noise;
    noise.scale = run.cfg.noise_scale;
    noise.seed = run.cfg.seed;
    const ClosedLoopResult result = run_closed_loop(
        *run.problem.dynamics, noise, controller, run.problem, run.cfg.mpc_duration);

    std::ofstream out(options.out_path);
    if (!out) throw ConfigError("cannot open output file", "--out");
    write_header_comment(out, options, run.cfg);
    out << "cycle,t_sim";
    for (int i = 0; i < run.problem.state_dim; ++i) out << ",x_meas_" << i;
    out << ",cost_stage,feedback_ms,prep_ms\n";
    for (const CycleLog& c : result.cycles) {
      out << c.cycle << ',' << fmt(c.t_sim);
      for (int i = 0; i < run.problem.state_dim; ++i) out << ',' << fmt(c.x_meas[i]);
      out << ',' << fmt(c.cost_stage) << ',' << fmt(c.feedback_ms) << ','
          << fmt(c.prep_ms) << "\n";
    }

    std::ostringstream final_state;
    for (int i = 0; i < result.final_state.size(); ++i) {
      if (i) final_state << ' ';
      final_state << fmt(result.final_state[i]);
    }
    std::cout << "accumulated_cost=" << fmt(result.accumulated_cost)
              << " mean_frequency_hz=" << fmt(result.mean_frequency_hz)
              << " final_state=" << final_state.str() << "\n";
    return result.plant_diverged ? exit_diverged : exit_ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_diverged;
  }
}

int cmd_contraction(const CmdOptions& options) {
  try {
    LoadedRun run = prepare_run(options);

    std::vector<VariantConfig> variants;
    for (const std::string& name : run.cfg.contraction_variants)
      variants.push_back(parse_compact_variant(name, run.problem.horizon));

    ContractionStudySettings study;
    study.samples = run.cfg.contraction_samples;
    study.perturbation_scale = run.cfg.contraction_scale;
    study.seed = run.cfg.seed;
    study.threads = run.threads;
    const std::vector<ContractionStats> stats =
        run_contraction_study(run.problem, variants, study);

    std::ofstream out(options.out_path);
    if (!out) throw ConfigError("cannot open output file", "--out");
    write_header_comment(out, options, run.cfg);
    out << "variant,M,mean_rate,std_rate,n_converged,n_excluded\n";
    for (const ContractionStats& st : stats) {
      out << st.variant_name << ',' << st.variant.intervals << ','
          << (st.rates.empty() ? "degenerate" : fmt(st.mean_rate)) << ','
          << (st.rates.empty() ? "degenerate" : fmt(st.std_rate)) << ','
          << st.n_converged << ',' << st.n_excluded << "\n";
    }

    if (options.json_summary) {
      json summary = json::array();
      for (const ContractionStats& st : stats) {
        summary.push_back({{"variant", st.variant_name},
                           {"M", st.variant.intervals},
                           {"mean_rate", st.mean_rate},
                           {"std_rate", st.std_rate},
                           {"n_converged", st.n_converged},
                           {"n_excluded", st.n_excluded},
                           {"n_degenerate", st.n_degenerate}});
      }
      std::ofstream js(*options.json_summary);
      js << summary.dump(1) << "\n";
    }
    return exit_ok;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_diverged;
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Gauss-Newton shooting solvers for discrete-time optimal control"};
  app.require_subcommand(1);

  CmdOptions options;
  std::string config;
  std::string out = "out.csv";
  std::string variant, dump_lq, json_summary;
  int intervals = 0, threads = 0, samples = 0;
  long long seed = -1;
  double duration = -1.0;
  bool line_search = false, shift = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config, "JSON run configuration")->required();
    cmd->add_option("--out", out, "output CSV path");
    cmd->add_option("--variant", variant, "variant type override");
    cmd->add_option("--intervals", intervals, "shooting interval count override");
    cmd->add_option("--threads", threads, "worker thread cap");
    cmd->add_option("--seed", seed, "seed override");
    cmd->add_flag("--line-search", line_search, "enable merit line search");
  };

  CLI::App* solve_cmd = app.add_subcommand("solve", "run one trajectory optimization");
  add_common(solve_cmd);
  solve_cmd->add_option("--dump-lq", dump_lq,
                        "dump the assembled LQ subproblem of iteration K (K or iter=K)");

  CLI::App* mpc_cmd = app.add_subcommand("mpc", "run a closed-loop NMPC simulation");
  add_common(mpc_cmd);
  mpc_cmd->add_option("--duration", duration, "simulated seconds");
  mpc_cmd->add_flag("--shift", shift, "shift trajectories by one stage per cycle");

  CLI::App* contraction_cmd =
      app.add_subcommand("contraction", "perturbed-restart contraction study");
  add_common(contraction_cmd);
  contraction_cmd->add_option("--samples", samples, "number of perturbed restarts");
  contraction_cmd->add_option("--json-summary", json_summary,
                              "also write a JSON summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? exit_ok : exit_config_error;
  }

  options.config_path = config;
  options.out_path = out;
  if (!variant.empty()) options.variant = variant;
  if (intervals > 0) options.intervals = intervals;
  if (threads > 0) options.threads = threads;
  if (seed >= 0) options.seed = static_cast<unsigned long long>(seed);
  if (line_search) options.line_search = true;
  if (shift) options.shift = true;
  if (samples > 0) options.samples = samples;
  if (duration >= 0.0) options.duration = duration;
  if (!json_summary.empty()) options.json_summary = json_summary;
  if (!dump_lq.empty()) {
    std::string digits = dump_lq;
    if (digits.rfind("iter=", 0) == 0) digits = digits.substr(5);
    try {
      options.dump_lq_iter = std::stoi(digits);
    } catch (const std::exception&) {
      std::cerr << "config error: --dump-lq expects K or iter=K\n";
      return exit_config_error;
    }
  }

  if (solve_cmd->parsed()) return cmd_solve(options);
  if (mpc_cmd->parsed()) return cmd_mpc(options);
  return cmd_contraction(options);
}

}  // namespace gns
