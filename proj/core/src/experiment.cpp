#include "fpo/experiment.hpp"

namespace fpo {

std::vector<SftExample> build_sft_data(const ExperimentConfig& cfg) {
  const TaskSpec spec = cfg.task();
  auto data = make_sft_dataset(spec, cfg.sft_examples, stage_seed(cfg, stage::kSftData));
  return corrupt_dataset(spec, std::move(data), cfg.corruption(spec), stage_seed(cfg, stage::kCorrupt));
}

TrainResult train_sft_model(const ExperimentConfig& cfg, std::span<const SftExample> data, int jobs) {
  TrainConfig tc = cfg.sft;
  tc.seed = stage_seed(cfg, stage::kSftTrain);
  return sft_train(init_model(cfg.model, stage_seed(cfg, stage::kInit)), data, tc, jobs);
}

TrainConfig preference_config(const ExperimentConfig& cfg, LossVariant variant) {
  TrainConfig tc = cfg.train;
  tc.loss_variant = variant;
  tc.seed = stage_seed(cfg, stage::kTrain);
  return tc;
}

PairBuildResult build_preference_pairs(const ExperimentConfig& cfg, const ModelCheckpoint& sft, int target,
                                       int jobs) {
  return build_pairs(sft, cfg.task(), cfg.pairs, target, stage_seed(cfg, stage::kPairs), jobs);
}

EvalReport evaluate(const ExperimentConfig& cfg, const ModelCheckpoint& model, int jobs) {
  return eval_model(model, cfg.task(), cfg.eval, stage_seed(cfg, stage::kEval), jobs);
}

EndToEndResult run_end_to_end(const ExperimentConfig& cfg, int pair_target,
                              const std::vector<LossVariant>& variants, int jobs) {
  cfg.validate();
  const auto data = build_sft_data(cfg);
  const ModelCheckpoint sft = train_sft_model(cfg, data, jobs).model;

  EndToEndResult out;
  out.sft_model = sft;
  out.sft = evaluate(cfg, sft, jobs);
  const PairBuildResult pairs = build_preference_pairs(cfg, sft, pair_target, jobs);
  out.pair_stats = pairs.stats;
  out.pairs = static_cast<int>(pairs.pairs.size());
  for (LossVariant v : variants) {
    const TrainResult tr = train(sft, sft, pairs.pairs, preference_config(cfg, v), jobs);
    out.methods[std::string(variant_name(v))] = evaluate(cfg, tr.model, jobs);
  }
  return out;
}

}  // namespace fpo
