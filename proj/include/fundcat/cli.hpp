#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "nlohmann/json.hpp"

#include "fundcat/featurizer.hpp"

namespace fundcat::cli {

/// Parsed run configuration: the raw JSON document plus dotted-path access
/// with defaults, so one schema drives every command.
struct RunConfig {
  nlohmann::ordered_json j;

  bool has(const std::string& dotted) const;
  nlohmann::ordered_json at(const std::string& dotted) const;

  template <typename T>
  T get(const std::string& dotted, const T& fallback) const {
    if (!has(dotted)) return fallback;
    return at(dotted).get<T>();
  }

  std::string out_dir() const;
  std::uint64_t seed() const;
};

RunConfig load_config(const std::string& path);

/// Applies one `key=value` override; the key is a dotted path and the value
/// is parsed as JSON when possible, else taken as a string.
void apply_override(nlohmann::ordered_json& config, const std::string& assignment);

/// Deterministic per-stage seed derivation from the top-level seed.
std::uint64_t stage_seed(std::uint64_t base, const std::string& stage);

int cmd_synth(const RunConfig& cfg);
int cmd_split(const RunConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_evaluate(const RunConfig& cfg);
int cmd_explain(const RunConfig& cfg);

/// Re-instantiates the featurizer persisted inside a model file. Returns
/// nullptr for the precomputed type (id-keyed, no token interface).
std::unique_ptr<featurize::Featurizer> featurizer_from_model_json(
    const nlohmann::ordered_json& model_json);

/// Full command-line entry point; returns the process exit code
/// (0 success, 1 validation/usage error, 2 numeric failure).
int run(int argc, const char* const* argv);

}  // namespace fundcat::cli
