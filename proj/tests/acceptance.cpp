#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "mind/aime.hpp"
#include "mind/contingency.hpp"
#include "mind/gmm.hpp"
#include "mind/policy.hpp"
#include "mind/predictor.hpp"
#include "mind/sim.hpp"
#include "oracles.hpp"

using namespace mind;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

const std::vector<std::string> kFixtures{"straight_road.json", "merge.json", "t_intersection.json",
                                         "intersection_4way.json"};

Outcome brute_force_count() {
  const auto s = test::load_fixture("t_intersection.json");
  const predict::IntentionPredictor predictor({});
  aime::BuildOptions opts;
  opts.strategy = aime::Strategy::kBruteForce;
  opts.bf_levels = 5;
  opts.node_budget = 100000;
  const auto t0 = Clock::now();
  const auto tree = aime::build_tree(s.history, s.map, s.ego_route, predictor, {}, opts);
  const double secs = seconds_since(t0);
  return {tree.leaves.size() == 7776 && secs < 60.0,
          "leaves " + std::to_string(tree.leaves.size()) + ", " + num(secs, 2) + " s"};
}

Outcome strategy_ordering() {
  const predict::IntentionPredictor predictor({});
  bool ok = true;
  std::string detail;
  for (const auto& name : kFixtures) {
    const auto s = test::load_fixture(name);
    const auto rows = aime::bench_strategies(s.history, s.map, s.ego_route, predictor, {});
    const auto& ss = rows[0];
    const auto& am = rows[1];
    const auto& bf = rows[2];
    bool row_ok = ss.coverage <= am.coverage && am.coverage <= 100.0 && ss.cost_ratio == 1.0 &&
                  ss.predictor_calls < am.predictor_calls && am.predictor_calls < bf.predictor_calls;
    if (name == "t_intersection.json") row_ok = row_ok && am.coverage - ss.coverage >= 10.0;
    ok = ok && row_ok;
    detail += name.substr(0, name.size() - 5) + " " + num(ss.coverage, 1) + "/" + num(am.coverage, 1) + "/" +
              num(bf.coverage, 1) + "% calls " + std::to_string(ss.predictor_calls) + "/" +
              std::to_string(am.predictor_calls) + "/" + std::to_string(bf.predictor_calls) + "; ";
  }
  return {ok, detail};
}

Outcome homotopy_oracle() {
  std::mt19937_64 rng(2024);
  int matches = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto ego = oracle::smooth_path(rng, 60);
    const auto agent = oracle::smooth_path(rng, 60);
    matches += aime::homotopy(ego, agent, std::numbers::pi) ==
               oracle::winding_homotopy(ego, agent, std::numbers::pi);
  }
  return {matches == 1000, std::to_string(matches) + "/1000 pairs match"};
}

Outcome gmm_monte_carlo() {
  const auto t0 = Clock::now();
  gmm::Gaussian2 start;
  start.mean = Vec2(1, 2);
  start.cov << 0.3, 0.1, 0.1, 0.2;
  std::vector<gmm::Gaussian2> actions;
  gmm::Gaussian2 g = start;
  for (int t = 1; t <= 60; ++t) {
    gmm::Gaussian2 a;
    a.mean = Vec2(8.0, 0.5);
    const double s = 0.4 * t * 0.1;
    a.cov << s * s + 0.2, 0.05 * t * 0.1, 0.05 * t * 0.1, 0.5 * s * s + 0.1;
    actions.push_back(a);
    g = gmm::propagate_linear(g, a, 0.1);
  }
  const Mat2 mc = oracle::monte_carlo_propagation(start, actions, 0.1, 100000, 42);
  const double err = oracle::relative_frobenius(g.cov, mc);
  const double secs = seconds_since(t0);
  return {err < 0.02 && secs < 10.0, "relative Frobenius " + num(100 * err, 3) + "%, " + num(secs, 2) + " s"};
}

Outcome ilqr_correctness() {
  std::mt19937_64 rng(17);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    const auto inst = oracle::random_lqr(rng);
    const auto ref = oracle::riccati_solve(inst);
    const auto tree = contingency::ilqr_solve_tree(oracle::lqr_problem(inst), inst.cfg);
    const auto& seg = tree.segments[0];
    if (seg.states.size() != ref.x.size()) return {false, "trajectory length mismatch"};
    for (std::size_t k = 0; k < ref.x.size(); ++k) {
      worst = std::max({worst, std::abs(seg.states[k].x - ref.x[k]), std::abs(seg.states[k].v - ref.v[k]),
                        std::abs(seg.controls[k].a - ref.a[k]), std::abs(seg.states[k].y),
                        std::abs(seg.states[k].theta), std::abs(seg.controls[k].kappa)});
    }
  }
  std::mt19937_64 rng2(23);
  contingency::PlannerConfig cfg;
  int monotone = 0;
  for (int i = 0; i < 50; ++i) {
    const auto pb = i % 2 ? oracle::random_problem(rng2) : oracle::lqr_problem(oracle::random_lqr(rng2));
    const auto tree = contingency::ilqr_solve_tree(pb, cfg);
    bool ok = !tree.cost_history.empty();
    for (std::size_t k = 1; k < tree.cost_history.size(); ++k) {
      ok = ok && tree.cost_history[k] <= tree.cost_history[k - 1];
    }
    monotone += ok;
  }
  std::ostringstream os;
  os << "max |iLQR - Riccati| " << worst << ", non-increasing cost on " << monotone << "/50";
  return {worst < 1e-6 && monotone == 50, os.str()};
}

Outcome finite_differences() {
  contingency::PlannerConfig cfg;
  std::mt19937_64 rng(99);
  const Polyline route({{-20, 0}, {20, 0}, {40, 15}, {60, 40}});
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    worst = std::max(worst, oracle::fd_max_relative_error(oracle::random_stage_point(rng), route, cfg));
  }
  std::ostringstream os;
  os << "max relative error " << worst << " over 100 points";
  return {worst < 1e-5, os.str()};
}

Outcome continuity() {
  double worst = 0.0;
  bool structural = true;
  int plans = 0;
  for (const auto& name : kFixtures) {
    const auto s = test::load_fixture(name);
    const predict::IntentionPredictor predictor({});
    const auto result = policy::plan(s.history, s.map, s.ego_route, predictor, {}, {});
    for (const auto& plan : result.plans) {
      ++plans;
      worst = std::max(worst, plan.max_continuity_residual(contingency::PlannerConfig{}.dt));
      int roots = 0;
      for (std::size_t j = 0; j < plan.segments.size(); ++j) {
        const int parent = plan.segments[j].parent;
        roots += parent < 0;
        structural = structural && parent < static_cast<int>(j);
      }
      structural = structural && roots == 1;
    }
  }
  std::ostringstream os;
  os << plans << " plans, max residual " << worst << (structural ? ", one shared root each" : ", bad topology");
  return {worst < 1e-9 && structural && plans > 0, os.str()};
}

Outcome chance_certification() {
  contingency::PlannerConfig cfg;
  const double bound = cfg.p + oracle::binomial_margin(cfg.p, 10000);
  double worst = 0.0;
  int certified = 0;
  for (const auto& name : kFixtures) {
    const auto s = test::load_fixture(name);
    const predict::IntentionPredictor predictor({});
    const auto result = policy::plan(s.history, s.map, s.ego_route, predictor, {}, {});
    for (const auto& plan : result.plans) {
      if (plan.status != contingency::SolveStatus::kConverged || plan.cost.collision > 0.0) continue;
      const auto chance = contingency::check_chance(plan, cfg.p, 10000, 7, cfg.footprint_radius);
      worst = std::max(worst, chance.max_violation);
      ++certified;
    }
  }
  return {certified > 0 && worst <= bound, std::to_string(certified) + " plans, max estimate " + num(worst, 4) +
                                               " <= " + num(bound, 4) + " required"};
}

Outcome closed_loop() {
  const auto s = test::load_fixture("adversarial_intersection.json");
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t k = 0; k < 10; ++k) seeds.push_back(k);
  const auto t0 = Clock::now();
  const auto table = sim::compare_planners(s, {sim::PlannerVariant::kMind, sim::PlannerVariant::kSingleShot},
                                           seeds, {});
  const double secs = seconds_since(t0);
  const auto& mind = table.means[0];
  const auto& nn = table.means[1];
  const bool ok = mind.avg_speed >= nn.avg_speed && mind.max_abs_acc <= nn.max_abs_acc && mind.collisions == 0 &&
                  secs < 900.0;
  return {ok, "avgSpd MIND " + num(mind.avg_speed) + " vs NN+CP " + num(nn.avg_speed) + ", maxAbsAcc " +
                  num(mind.max_abs_acc) + " vs " + num(nn.max_abs_acc) + ", MIND collisions " +
                  std::to_string(mind.collisions) + ", " + num(secs, 1) + " s"};
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  const std::string bin = MIND_KIT_BIN;
  const std::string fx = MIND_KIT_FIXTURE_DIR;
  struct Case {
    std::string args;
    std::vector<std::string> files;
  };
  const std::vector<Case> cases{
      {"predict --scenario " + fx + "/t_intersection.json --seed 3 --svg acc_p.svg --out acc_p.json",
       {"acc_p.json", "acc_p.svg"}},
      {"tree --scenario " + fx + "/intersection_4way.json --seed 3 --svg acc_t.svg --out acc_t.json",
       {"acc_t.json", "acc_t.svg"}},
      {"plan --scenario " + fx + "/t_intersection.json --seed 3 --svg acc_pl.svg --out acc_pl.json",
       {"acc_pl.json", "acc_pl.svg"}},
      {"sim --scenario " + fx + "/adversarial_intersection.json --seed 3 --log acc_s.jsonl --out acc_s.json",
       {"acc_s.jsonl", "acc_s.json"}},
      {"bench --seeds 2 --planners mind,nn+cp --compare " + fx + "/collision.json", {}},
  };
  int identical = 0;
  for (const auto& c : cases) {
    std::vector<std::string> first;
    bool ok = true;
    for (int run = 0; run < 2; ++run) {
      const int status = std::system((bin + " " + c.args + " > acc_stdout.txt 2> acc_stderr.txt").c_str());
      ok = ok && WIFEXITED(status) && WEXITSTATUS(status) == 0;
      std::vector<std::string> outputs{slurp("acc_stdout.txt")};
      for (const auto& f : c.files) outputs.push_back(slurp(f));
      if (run == 0) first = outputs;
      else ok = ok && outputs == first;
    }
    identical += ok;
  }
  return {identical == static_cast<int>(cases.size()),
          std::to_string(identical) + "/" + std::to_string(cases.size()) + " commands byte-identical"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"brute-force search yields 7776 leaves", brute_force_count},
      {"strategy coverage and cost ordering", strategy_ordering},
      {"homotopy matches the winding oracle", homotopy_oracle},
      {"GMM propagation matches Monte Carlo", gmm_monte_carlo},
      {"iLQR matches Riccati, monotone cost", ilqr_correctness},
      {"stage-cost finite differences", finite_differences},
      {"trajectory-tree continuity", continuity},
      {"chance-constraint certification", chance_certification},
      {"closed-loop MIND vs NN+CP", closed_loop},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
