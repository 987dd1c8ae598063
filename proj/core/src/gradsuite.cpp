#include "fpo/gradsuite.hpp"

#include "fpo/annotate.hpp"
#include "fpo/error.hpp"
#include "fpo/optimloss.hpp"
#include "fpo/task.hpp"

namespace fpo {

namespace {

constexpr ModelConfig kCheckModel{24, 8, 30, Architecture::kElmanTanh};

// A non-degenerate pair: the clean render against a corrupted copy.
PreferencePair random_pair(const TaskSpec& spec, Rng& rng) {
  for (;;) {
    const TokenSeq text = random_text(spec, rng);
    const TokenSeq ref = reference_render(spec, text);
    const auto kind = kAllErrorKinds[static_cast<std::size_t>(uniform_int(rng, 0, kAllErrorKinds.size() - 1))];
    try {
      const CorruptedSample bad = inject_error(ref, kind, rng(), spec.injection);
      if (bad.corrupted.size() + text.size() > static_cast<std::size_t>(kCheckModel.max_len)) continue;
      PreferencePair p = annotate_pair(text, ref, ref, bad.corrupted);
      if (!p.masks.degenerate) return p;
    } catch (const InjectionError&) {
    }
  }
}

}  // namespace

std::vector<GradSuiteRow> gradient_suite(int instances, double h, std::uint64_t seed) {
  if (instances < 1) throw PreconditionError("gradient suite needs at least one instance");
  const TaskSpec spec = make_task(kCheckModel.vocab_size, 4, 1, 4, 0.3, derive_seed(seed, "task"));
  const int coords = static_cast<int>(kCheckModel.param_count());

  std::vector<GradSuiteRow> rows;
  for (int i = 0; i < instances; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(s, "pair"));
    const PreferencePair pair = random_pair(spec, rng);
    const ModelCheckpoint theta = init_model(kCheckModel, derive_seed(s, "theta"));
    const ModelCheckpoint ref = init_model(kCheckModel, derive_seed(s, "ref"));

    const GradCheckReport ll = gradient_check(theta, pair.condition, pair.winner, h, coords, s);
    rows.push_back({"loglik", i, ll.max_rel_error, ll.coords_checked});

    for (LossVariant v : {LossVariant::kDpoUtterance, LossVariant::kFpoTokenSigmoid,
                          LossVariant::kFpoSequenceSigmoid}) {
      TrainConfig cfg;
      cfg.loss_variant = v;
      cfg.beta = 0.5;
      const PairBatchItem item = prepare_item(pair, ref, cfg.length_policy);
      const std::span<const PairBatchItem> batch(&item, 1);
      const BatchLoss analytic = preference_loss(theta, batch, cfg);
      ModelCheckpoint probe = theta;
      auto objective = [&](const std::vector<double>& p) {
        probe.params = p;
        return preference_loss(probe, batch, cfg).loss;
      };
      const GradCheckReport r = finite_difference_check(theta.params, analytic.grad, objective, h, coords, s);
      const std::string name = v == LossVariant::kDpoUtterance ? "dpo" : std::string(variant_name(v));
      rows.push_back({name, i, r.max_rel_error, r.coords_checked});
    }
  }
  return rows;
}

}  // namespace fpo
