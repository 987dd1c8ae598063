#include "fpo/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>

#include "fpo/error.hpp"

namespace fpo {

using nlohmann::json;

ExperimentConfig::ExperimentConfig() {
  injection.content_end = 0;

  sft.learning_rate = 3e-3;
  sft.epochs = 80;
  sft.batch_size = 16;
  sft.optimizer = OptimizerKind::kAdamW;
  sft.grad_clip = 1.0;

  pairs.sampling.k = 8;
  pairs.sampling.temperatures = {1.0};
  pairs.tau = 0.1;

  train.optimizer = OptimizerKind::kSgd;
  train.learning_rate = 3e-3;
  train.epochs = 4;
  train.batch_size = 16;
  train.beta = 1.0;

  eval.n = 1000;
}

namespace {

struct Field {
  const char* key;
  std::function<json(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const json&)> set;
};

template <class Member>
Field plain(const char* key, Member member) {
  return {key, [member](const ExperimentConfig& c) { return json(member(const_cast<ExperimentConfig&>(c))); },
          [member](ExperimentConfig& c, const json& v) {
            auto& ref = member(c);
            ref = v.get<std::remove_reference_t<decltype(ref)>>();
          }};
}

template <class Member, class ToName, class FromName>
Field named(const char* key, Member member, ToName to_name, FromName from_name) {
  return {key,
          [member, to_name](const ExperimentConfig& c) {
            return json(std::string(to_name(member(const_cast<ExperimentConfig&>(c)))));
          },
          [member, from_name](ExperimentConfig& c, const json& v) { member(c) = from_name(v.get<std::string>()); }};
}

void add_train_fields(std::vector<Field>& f, const std::string& prefix, TrainConfig ExperimentConfig::*tc) {
  // Keys must outlive the table; they are interned in a static store.
  static std::vector<std::unique_ptr<std::string>> names;
  auto key = [&](const char* suffix) {
    names.push_back(std::make_unique<std::string>(prefix + suffix));
    return names.back()->c_str();
  };
  f.push_back(plain(key("learning_rate"), [tc](ExperimentConfig& c) -> double& { return (c.*tc).learning_rate; }));
  f.push_back(plain(key("batch_size"), [tc](ExperimentConfig& c) -> int& { return (c.*tc).batch_size; }));
  f.push_back(plain(key("epochs"), [tc](ExperimentConfig& c) -> int& { return (c.*tc).epochs; }));
  f.push_back(named(key("optimizer"), [tc](ExperimentConfig& c) -> OptimizerKind& { return (c.*tc).optimizer; },
                    optimizer_name, optimizer_from_name));
  f.push_back(named(key("lr_schedule"), [tc](ExperimentConfig& c) -> LrSchedule& { return (c.*tc).schedule; },
                    schedule_name, schedule_from_name));
  f.push_back(plain(key("adam_beta1"), [tc](ExperimentConfig& c) -> double& { return (c.*tc).adam_beta1; }));
  f.push_back(plain(key("adam_beta2"), [tc](ExperimentConfig& c) -> double& { return (c.*tc).adam_beta2; }));
  f.push_back(plain(key("adam_eps"), [tc](ExperimentConfig& c) -> double& { return (c.*tc).adam_eps; }));
  f.push_back(plain(key("weight_decay"), [tc](ExperimentConfig& c) -> double& { return (c.*tc).weight_decay; }));
  f.push_back(plain(key("grad_clip"), [tc](ExperimentConfig& c) -> double& { return (c.*tc).grad_clip; }));
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    using C = ExperimentConfig;
    std::vector<Field> f;
    f.push_back(plain("seed", [](C& c) -> std::uint64_t& { return c.seed; }));
    f.push_back(plain("out_dir", [](C& c) -> std::string& { return c.out_dir; }));

    f.push_back(plain("vocab_size", [](C& c) -> int& { return c.model.vocab_size; }));
    f.push_back(plain("text_vocab", [](C& c) -> int& { return c.text_vocab; }));
    f.push_back(plain("min_words", [](C& c) -> int& { return c.min_words; }));
    f.push_back(plain("max_text_len", [](C& c) -> int& { return c.max_text_len; }));
    f.push_back(plain("pause_prob", [](C& c) -> double& { return c.pause_prob; }));
    f.push_back(plain("task_seed", [](C& c) -> std::uint64_t& { return c.task_seed; }));
    f.push_back(plain("substitution_min", [](C& c) -> int& { return c.injection.substitution_min; }));
    f.push_back(plain("substitution_max", [](C& c) -> int& { return c.injection.substitution_max; }));
    f.push_back(plain("silence_min", [](C& c) -> int& { return c.injection.silence_min; }));
    f.push_back(plain("silence_max", [](C& c) -> int& { return c.injection.silence_max; }));
    f.push_back(plain("pause_min", [](C& c) -> int& { return c.injection.pause_min; }));
    f.push_back(plain("pause_max", [](C& c) -> int& { return c.injection.pause_max; }));
    f.push_back(plain("repetition_min", [](C& c) -> int& { return c.injection.repetition_min; }));
    f.push_back(plain("repetition_max", [](C& c) -> int& { return c.injection.repetition_max; }));

    f.push_back(plain("corruption_rate", [](C& c) -> double& { return c.corruption_rate; }));
    f.push_back({"corruption_kinds",
                 [](const C& c) {
                   json a = json::array();
                   for (ErrorKind k : c.corruption_kinds) a.push_back(std::string(kind_name(k)));
                   return a;
                 },
                 [](C& c, const json& v) {
                   c.corruption_kinds.clear();
                   for (const auto& k : v) c.corruption_kinds.push_back(kind_from_name(k.get<std::string>()));
                 }});
    f.push_back(plain("hard_words", [](C& c) -> int& { return c.hard_words; }));
    f.push_back(plain("hard_word_seed", [](C& c) -> std::uint64_t& { return c.hard_word_seed; }));

    f.push_back(plain("hidden_dim", [](C& c) -> int& { return c.model.hidden_dim; }));
    f.push_back(plain("max_len", [](C& c) -> int& { return c.model.max_len; }));
    f.push_back(named("architecture", [](C& c) -> Architecture& { return c.model.architecture; },
                      architecture_name, architecture_from_name));

    f.push_back(plain("sft_examples", [](C& c) -> int& { return c.sft_examples; }));
    add_train_fields(f, "sft_", &C::sft);

    f.push_back(plain("prompts", [](C& c) -> int& { return c.prompts; }));
    f.push_back(plain("k", [](C& c) -> int& { return c.pairs.sampling.k; }));
    f.push_back(plain("temperatures", [](C& c) -> std::vector<double>& { return c.pairs.sampling.temperatures; }));
    f.push_back(plain("top_k", [](C& c) -> int& { return c.pairs.sampling.top_k; }));
    f.push_back(plain("max_prompts", [](C& c) -> int& { return c.pairs.max_prompts; }));
    f.push_back(plain("tau", [](C& c) -> double& { return c.pairs.tau; }));
    f.push_back(plain("lambda_w", [](C& c) -> double& { return c.pairs.weights.lambda_w; }));
    f.push_back(plain("lambda_m", [](C& c) -> double& { return c.pairs.weights.lambda_m; }));
    f.push_back(plain("lambda_c", [](C& c) -> double& { return c.pairs.weights.lambda_c; }));
    f.push_back(plain("lambda_d", [](C& c) -> double& { return c.pairs.weights.lambda_d; }));
    f.push_back(plain("score_p", [](C& c) -> double& { return c.pairs.weights.p; }));
    f.push_back(plain("silence_run_penalty", [](C& c) -> double& { return c.pairs.penalties.silence_run; }));
    f.push_back(plain("repeat_penalty", [](C& c) -> double& { return c.pairs.penalties.repeat; }));
    f.push_back(plain("min_silence_run", [](C& c) -> int& { return c.pairs.penalties.min_silence_run; }));
    f.push_back(plain("min_repeat", [](C& c) -> int& { return c.pairs.penalties.min_repeat; }));
    f.push_back(plain("max_repeat", [](C& c) -> int& { return c.pairs.penalties.max_repeat; }));
    f.push_back(plain("independent_winner_mask", [](C& c) -> bool& { return c.pairs.mask.independent_winner_mask; }));

    f.push_back(plain("beta", [](C& c) -> double& { return c.train.beta; }));
    f.push_back(named("length_policy", [](C& c) -> LengthPolicy& { return c.train.length_policy; },
                      length_policy_name, length_policy_from_name));
    f.push_back(named("token_reduction", [](C& c) -> TokenReduction& { return c.train.reduction; }, reduction_name,
                      reduction_from_name));
    add_train_fields(f, "train_", &C::train);
    f.push_back(plain("pair_budget", [](C& c) -> int& { return c.pair_budget; }));

    f.push_back(plain("eval_samples", [](C& c) -> int& { return c.eval.n; }));
    f.push_back(plain("eval_temperature", [](C& c) -> double& { return c.eval.temperature; }));
    f.push_back(plain("eval_top_k", [](C& c) -> int& { return c.eval.top_k; }));
    f.push_back(plain("ter_threshold", [](C& c) -> double& { return c.eval.ter_threshold; }));
    f.push_back(plain("quality_threshold", [](C& c) -> double& { return c.eval.quality_threshold; }));

    f.push_back(plain("sweep_budgets", [](C& c) -> std::vector<int>& { return c.sweep.budgets; }));
    f.push_back(plain("sweep_methods", [](C& c) -> std::vector<std::string>& { return c.sweep.methods; }));
    f.push_back(plain("sweep_seeds", [](C& c) -> std::vector<std::uint64_t>& { return c.sweep.seeds; }));
    return f;
  }();
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  model.validate();
  task().validate(model.max_len);
  corruption(task());
  if (sft_examples < 1) throw ConfigError("sft_examples must be >= 1");
  sft.validate();
  if (prompts < 1) throw ConfigError("prompts must be >= 1");
  pairs.validate();
  train.validate();
  if (pair_budget < 0) throw ConfigError("pair_budget must be >= 0");
  eval.validate();
  sweep.validate();
}

json ExperimentConfig::to_json() const {
  json j = json::object();
  j["schema_version"] = kConfigSchemaVersion;
  for (const Field& f : fields()) j[f.key] = f.get(*this);
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("schema_version")) throw ConfigError("config is missing schema_version");
  const auto& v = j.at("schema_version");
  if (!v.is_number_integer() || v.get<int>() != kConfigSchemaVersion) {
    throw ConfigError("config schema_version " + v.dump() + " does not match supported version " +
                      std::to_string(kConfigSchemaVersion));
  }
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "schema_version") continue;
    const auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return key == f.key; });
    if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->set(cfg, value);
    } catch (const json::exception& e) {
      throw ConfigError("config key '" + key + "': " + e.what());
    }
  }
  return cfg;
}

std::uint64_t ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("out_dir");
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

TaskSpec ExperimentConfig::task() const {
  TaskSpec spec = make_task(model.vocab_size, text_vocab, min_words, max_text_len, pause_prob, task_seed);
  const TokenId content_end = spec.injection.content_end;
  spec.injection = injection;
  spec.injection.content_end = content_end;
  return spec;
}

CorruptionProfile ExperimentConfig::corruption(const TaskSpec& spec) const {
  CorruptionProfile p;
  if (hard_words > 0) p = hard_word_profile(spec, corruption_rate, hard_words, hard_word_seed);
  p.rate = corruption_rate;
  p.kinds = corruption_kinds;
  p.validate(spec);
  return p;
}

void apply_env_overrides(ExperimentConfig& cfg) {
  if (const char* s = std::getenv("FPO_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw ConfigError(std::string("FPO_SEED is not an unsigned integer: ") + s);
    cfg.seed = v;
  }
  if (const char* d = std::getenv("FPO_OUT_DIR"); d != nullptr && *d != '\0') cfg.out_dir = d;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  ExperimentConfig cfg = ExperimentConfig::from_json(j);
  apply_env_overrides(cfg);
  try {
    cfg.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

std::uint64_t parse_hash_hex(std::string_view s) {
  if (s.size() != 16) throw InputError("malformed config hash '" + std::string(s) + "'");
  std::uint64_t h = 0;
  for (char c : s) {
    h <<= 4;
    if (c >= '0' && c <= '9') h |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') h |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw InputError("malformed config hash '" + std::string(s) + "'");
  }
  return h;
}

std::uint64_t stage_seed(const ExperimentConfig& cfg, std::string_view stage) {
  return derive_seed(cfg.seed, stage);
}

}  // namespace fpo
