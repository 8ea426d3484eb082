// stlplan: plan, monitor, replay and routes subcommands.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "stlplan/stlplan.hpp"

using namespace stlplan;
using nlohmann::json;

namespace {

struct Common {
  std::string scenario;
  std::string mode = "basic";
  std::optional<double> lambda, zeta;
  std::optional<int> max_iters;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_optimizer_flags(CLI::App* app, Common& c) {
  app->add_option("--mode", c.mode, "basic | attrition")->check(CLI::IsMember({"basic", "attrition", "attrition-aware"}));
  app->add_option("--lambda", c.lambda, "smoothing sharpness");
  app->add_option("--zeta", c.zeta, "robustness margin");
  app->add_option("--max-iters", c.max_iters, "optimizer iteration cap");
  app->add_option("--seed", c.seed, "seed for restart perturbations");
}

PipelineConfig make_config(const Scenario& sc, const Common& c) {
  PipelineConfig cfg = default_config(sc);
  if (c.lambda) cfg.optimizer.lambda = *c.lambda;
  if (c.zeta) cfg.optimizer.zeta = *c.zeta;
  if (c.max_iters) cfg.optimizer.max_iters = *c.max_iters;
  if (c.seed) cfg.optimizer.seed = *c.seed;
  return cfg;
}

std::string prepare_out(const std::string& dir) {
  if (!dir.empty()) std::filesystem::create_directories(dir);
  return dir;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

int plan_cmd(const Common& c) {
  const Scenario sc = load_scenario(c.scenario);
  const PipelineOutput o = run_pipeline(sc, mode_from_string(c.mode), make_config(sc, c));
  if (!prepare_out(c.out).empty()) write_outputs(c.out, o, sc);
  json s{{"mode", mode_name(o.mode)},
         {"status", status_name(o.result.status)},
         {"exact", o.result.report.exact},
         {"smooth", o.result.report.smooth},
         {"velocity_exact", o.result.velocity_exact},
         {"iterations", o.result.iterations},
         {"route_objective", o.plan.objective},
         {"timings", timings_json(o.timings)}};
  std::cout << s.dump(2) << '\n';
  return is_satisfied(o.result.status) ? 0 : 1;
}

int monitor_cmd(const Common& c, const std::string& trace_path) {
  const Scenario sc = load_scenario(c.scenario);
  std::ifstream f(trace_path);
  if (!f) throw Error("cannot read " + trace_path);
  const Trace tr = read_trace_csv(f);
  const Mission m = compile_mission(sc);
  const bool weighted = mode_from_string(c.mode) == Mode::Attrition;
  const double lambda = c.lambda.value_or(sc.thresholds.lambda);
  const double zeta = c.zeta.value_or(sc.thresholds.zeta);
  const RobustnessReport r = make_report(m.formula, tr, lambda, weighted ? &m.weights : nullptr);
  const PlanStatus st = classify(r.smooth, zeta, false);
  json j = to_json(r);
  j["status"] = status_name(st);
  if (!prepare_out(c.out).empty()) write_file(c.out + "/monitor.json", j.dump(2) + "\n");
  std::cout << json{{"status", status_name(st)}, {"exact", r.exact}, {"smooth", r.smooth}}.dump(2) << '\n';
  return is_satisfied(st) ? 0 : 1;
}

int replay_cmd(const Common& c, const std::string& dist_path) {
  const Scenario sc = load_scenario(c.scenario);
  const Mode mode = mode_from_string(c.mode);
  const PipelineConfig cfg = make_config(sc, c);
  const PipelineOutput o = run_pipeline(sc, mode, cfg);
  std::ifstream f(dist_path);
  if (!f) throw Error("cannot read " + dist_path);
  json dj;
  try {
    dj = json::parse(f);
  } catch (const json::exception& e) {
    throw ParseError(dist_path + ": " + e.what());
  }
  ReplanConfig rc;
  rc.optimizer = cfg.optimizer;
  rc.weighted = mode == Mode::Attrition;
  const SimulationResult sim = simulate_with_disturbance(o.result.trace, disturbances_from_json(dj), sc, o.mission, rc);
  const RobustnessReport r = make_report(o.mission.formula, sim.executed, cfg.optimizer.lambda, rc.weighted ? &o.mission.weights : nullptr);
  const PlanStatus st = classify(r.smooth, cfg.optimizer.zeta, false);
  if (!prepare_out(c.out).empty()) {
    write_outputs(c.out, o, sc);
    write_file(c.out + "/events.json", event_log_json(sim.state.log).dump(2) + "\n");
    std::ofstream t(c.out + "/executed_trace.csv");
    write_trace_csv(t, sim.executed);
    json j = to_json(r);
    j["status"] = status_name(st);
    write_file(c.out + "/executed_report.json", j.dump(2) + "\n");
  }
  std::cout << json{{"plan_status", status_name(o.result.status)},
                    {"events", event_log_json(sim.state.log)},
                    {"status", status_name(st)},
                    {"exact", r.exact},
                    {"smooth", r.smooth}}
                   .dump(2)
            << '\n';
  return is_satisfied(st) ? 0 : 1;
}

int routes_cmd(const Common& c) {
  const Scenario sc = load_scenario(c.scenario);
  sc.validate();
  const InspectionGraph g = build_graph(sc);
  RoutePlan plan = stitch_subtours(solve_assignment(g), g);
  if (!prepare_out(c.out).empty()) {
    write_file(c.out + "/routes.json", to_json(plan).dump(2) + "\n");
    std::ofstream f(c.out + "/graph.csv");
    write_graph_csv(f, g);
  }
  std::cout << to_json(plan).dump(2) << '\n';
  return verify_plan(plan, g).valid ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-drone inspection planning with signal temporal logic"};
  app.require_subcommand(1);
  Common c;
  std::string trace_path, dist_path;

  auto* plan = app.add_subcommand("plan", "route, seed and optimize a scenario");
  auto* monitor = app.add_subcommand("monitor", "evaluate a trace against a scenario's mission");
  auto* replay = app.add_subcommand("replay", "plan, then execute under disturbances with replanning");
  auto* routes = app.add_subcommand("routes", "routing only");
  for (auto* s : {plan, monitor, replay, routes}) {
    s->add_option("--scenario", c.scenario, "scenario JSON")->required()->check(CLI::ExistingFile);
    s->add_option("--out", c.out, "output directory");
  }
  for (auto* s : {plan, replay}) add_optimizer_flags(s, c);
  monitor->add_option("--mode", c.mode, "basic | attrition")->check(CLI::IsMember({"basic", "attrition", "attrition-aware"}));
  monitor->add_option("--lambda", c.lambda, "smoothing sharpness");
  monitor->add_option("--zeta", c.zeta, "robustness margin");
  monitor->add_option("--trace", trace_path, "trace CSV")->required()->check(CLI::ExistingFile);
  replay->add_option("--disturbances", dist_path, "disturbance JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);
  try {
    if (*plan) return plan_cmd(c);
    if (*monitor) return monitor_cmd(c, trace_path);
    if (*replay) return replay_cmd(c, dist_path);
    return routes_cmd(c);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
