#pragma once

// Helpers for driving the fpo binary from tests. FPO_BINARY is set by the
// build to the CLI's path.

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fpo/config.hpp"

namespace cli {

// A small configuration that runs every command in seconds.
inline nlohmann::json tiny_config(const std::string& out_dir) {
  nlohmann::json j = fpo::ExperimentConfig{}.to_json();
  j["out_dir"] = out_dir;
  j["hidden_dim"] = 16;
  j["sft_examples"] = 200;
  j["sft_epochs"] = 3;
  j["prompts"] = 40;
  j["k"] = 4;
  j["train_epochs"] = 1;
  j["eval_samples"] = 40;
  j["sweep_budgets"] = {5, 10};
  return j;
}

inline void write_config(const std::string& path, const nlohmann::json& j) { std::ofstream(path) << j.dump(2); }

// Runs the binary with `args` (and optional environment assignments),
// returning its exit status. Output goes to `log`.
inline int run(const std::string& args, const std::string& log, const std::string& env = "") {
  const std::string cmd = env + " '" FPO_BINARY "' " + args + " >>'" + log + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// The commands of a full run, in order.
inline const std::vector<std::string>& pipeline_commands() {
  static const std::vector<std::string> cmds{"gen-sft",   "train-sft", "sample", "build-pairs", "train fpo",
                                             "train dpo", "eval",      "sweep",  "gradcheck --instances 2"};
  return cmds;
}

}  // namespace cli
