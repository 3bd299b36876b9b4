#pragma once

#include <cstdint>
#include <exception>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mind/aime.hpp"
#include "mind/contingency.hpp"
#include "mind/errors.hpp"
#include "mind/policy.hpp"
#include "mind/predictor.hpp"
#include "mind/sim.hpp"
#include "mind/world.hpp"

namespace mind::cli {

enum ExitCode { kOk = 0, kInternal = 1, kInput = 2, kResource = 3 };

/// Every tunable of the pipeline; merged from defaults, a config file, flags.
struct RunConfig {
  predict::PredictorConfig predictor;
  aime::AimeConfig aime;
  aime::BuildOptions build;
  contingency::PlannerConfig planner;
  policy::RewardWeights reward;
  sim::SimOptions sim;  // planner variant, disc radius, goal tolerance, samples
  std::uint64_t seed = 0;
  int jobs = 1;

  /// Throws std::invalid_argument when any module rejects its fields.
  void validate() const;
  policy::PlanSettings plan_settings() const;
  sim::SimOptions sim_options() const;
};

nlohmann::json to_json(const RunConfig& c);
/// Overlays the keys present in `j`; unknown keys or wrong types raise
/// SchemaError.
void merge(RunConfig& c, const nlohmann::json& j);
/// Reads and merges a JSON config file.
void merge_file(RunConfig& c, const std::string& path);

/// left | straight | right (matched against the ego's candidate routes by
/// net heading change), none, or comma-separated lane ids.
std::optional<world::RouteCommand> resolve_command(const world::ScenarioFile& scenario,
                                                   const std::optional<std::string>& text);

nlohmann::json prediction_to_json(const gmm::ScenePrediction& pred);

struct CommandArgs {
  std::string scenario;
  std::string out;  // file path, directory for bench; empty writes to stdout
  std::string svg;
  std::optional<std::string> command;
  std::string strategy = "aime";
  std::string log;  // sim EpisodeLog JSONL
  std::vector<std::string> fixtures;      // bench strategy table
  std::string compare_scenario;            // bench planner table
  std::vector<std::string> planners{"mind", "nn+cp", "mb+cp"};
  int seeds = 10;
};

// Each command writes its outputs and returns an exit code; errors escape as
// exceptions for run_guarded to classify.
int cmd_predict(const CommandArgs& args, const RunConfig& cfg, std::ostream& out);
int cmd_tree(const CommandArgs& args, const RunConfig& cfg, std::ostream& out);
int cmd_plan(const CommandArgs& args, const RunConfig& cfg, std::ostream& out);
int cmd_sim(const CommandArgs& args, const RunConfig& cfg, std::ostream& out);
int cmd_bench(const CommandArgs& args, const RunConfig& cfg, std::ostream& out);

/// Runs `body`, mapping input errors to 2, budget overruns to 3 and anything
/// else to 1, with a diagnostic on `err`.
template <typename F>
int run_guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const ResourceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mind::cli
