#include "fpo/evalrep.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "fpo/annotate.hpp"
#include "fpo/error.hpp"
#include "fpo/parallel.hpp"

namespace fpo {

void EvalSettings::validate() const {
  if (n < 1) throw PreconditionError("evaluation needs n >= 1");
  if (!(temperature > 0.0)) throw ConfigError("eval temperature must be positive");
  if (top_k < 0) throw ConfigError("eval top_k must be >= 0");
  weights.validate();
}

bool is_bad_case(double ter, double quality, const EvalSettings& settings) {
  return ter > settings.ter_threshold || quality < settings.quality_threshold;
}

double bad_case_ratio(std::span<const double> ters, std::span<const double> qualities,
                      const EvalSettings& settings) {
  if (ters.size() != qualities.size() || ters.empty()) throw PreconditionError("bad_case_ratio needs matching non-empty inputs");
  std::size_t bad = 0;
  for (std::size_t i = 0; i < ters.size(); ++i) {
    if (is_bad_case(ters[i], qualities[i], settings)) ++bad;
  }
  return static_cast<double>(bad) / static_cast<double>(ters.size());
}

namespace {

struct SampleEval {
  double ter = 0.0;
  double quality = 0.0;
  double score = 0.0;
  bool truncated = false;
  std::array<bool, kAllErrorKinds.size()> kinds{};
};

}  // namespace

EvalReport eval_generator(const Generator& generate, const TaskSpec& spec,
                          const EvalSettings& settings, std::uint64_t seed, int jobs) {
  settings.validate();
  const auto n = static_cast<std::size_t>(settings.n);
  const std::uint64_t text_seed = derive_seed(seed, "eval_text");
  const std::uint64_t sample_seed = derive_seed(seed, "eval_sample");
  std::vector<SampleEval> evals(n);
  parallel_for(n, jobs, [&](std::size_t i) {
    Rng rng(derive_seed(text_seed, i));
    const TokenSeq text = random_text(spec, rng);
    const TokenSeq ref = reference_render(spec, text);
    const GenSample gen = generate(text, derive_seed(sample_seed, i));
    const MetricComponents comp = score_components(gen.output, ref, settings.penalties);
    SampleEval& e = evals[i];
    e.ter = 1.0 - comp.w;
    e.quality = comp.m;
    e.score = composite_score(comp, settings.weights).s;
    e.truncated = gen.meta.truncated;
    for (const ErrorSpan& s : detect_spans(ref, gen.output, align(ref, gen.output))) {
      e.kinds[static_cast<std::size_t>(s.kind)] = true;
    }
  });

  EvalReport r;
  r.n_samples = settings.n;
  r.seed = seed;
  r.settings = settings;
  for (const SampleEval& e : evals) {
    r.mean_ter += e.ter;
    r.mean_quality += e.quality;
    r.mean_score += e.score;
    if (is_bad_case(e.ter, e.quality, settings)) ++r.n_bad;
    if (e.truncated) ++r.n_truncated;
    bool any = false;
    for (std::size_t k = 0; k < e.kinds.size(); ++k) {
      if (e.kinds[k]) {
        ++r.kind_counts[k];
        any = true;
      }
    }
    any ? ++r.n_with_errors : ++r.n_clean;
  }
  const double inv = 1.0 / static_cast<double>(n);
  r.mean_ter *= inv;
  r.mean_quality *= inv;
  r.mean_score *= inv;
  r.bad_case_ratio = static_cast<double>(r.n_bad) * inv;
  return r;
}

EvalReport eval_model(const ModelCheckpoint& ckpt, const TaskSpec& spec,
                      const EvalSettings& settings, std::uint64_t seed, int jobs) {
  const SampleSettings decode{settings.temperature, settings.top_k};
  return eval_generator(
      [&](std::span<const TokenId> text, std::uint64_t s) { return sample(ckpt, text, decode, s); },
      spec, settings, seed, jobs);
}

std::optional<double> percent_delta(double base, double value) {
  if (base == 0.0) {
    if (value == 0.0) return 0.0;
    return std::nullopt;
  }
  return (value - base) / base * 100.0;
}

ComparisonTable compare(const std::map<std::string, EvalReport>& reports, const std::string& base) {
  if (reports.size() < 2) throw PreconditionError("comparison needs at least two methods");
  const auto it = reports.find(base);
  if (it == reports.end()) throw PreconditionError("base method '" + base + "' missing from reports");
  const EvalReport& b = it->second;
  for (const auto& [name, r] : reports) {
    if (r.seed != b.seed || r.n_samples != b.n_samples) {
      throw ProtocolError("method '" + name + "' was evaluated with a different seed or sample count than '" +
                          base + "'");
    }
  }
  ComparisonTable t;
  t.base = base;
  for (const auto& [name, r] : reports) {  // std::map iterates in name order
    ComparisonRow row;
    row.method = name;
    row.mean_ter = r.mean_ter;
    row.bad_case_ratio = r.bad_case_ratio;
    row.mean_score = r.mean_score;
    row.ter_delta_pct = percent_delta(b.mean_ter, r.mean_ter);
    row.bad_case_delta_pct = percent_delta(b.bad_case_ratio, r.bad_case_ratio);
    row.score_delta_pct = percent_delta(b.mean_score, r.mean_score);
    t.rows.push_back(std::move(row));
  }
  return t;
}

namespace {

std::string fmt_delta(const std::optional<double>& d) {
  if (!d) return "n/a";
  std::ostringstream os;
  os << std::showpos << std::fixed << std::setprecision(1) << *d << '%';
  return os.str();
}

}  // namespace

std::string ComparisonTable::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(24) << "method" << std::right << std::setw(10) << "TER" << std::setw(10)
     << "dTER" << std::setw(10) << "bad" << std::setw(10) << "dbad" << std::setw(10) << "score"
     << std::setw(10) << "dscore" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << (r.method == base ? r.method + " (base)" : r.method) << std::right
       << std::setprecision(4) << std::setw(10) << r.mean_ter << std::setw(10) << fmt_delta(r.ter_delta_pct)
       << std::setw(10) << r.bad_case_ratio << std::setw(10) << fmt_delta(r.bad_case_delta_pct)
       << std::setw(10) << r.mean_score << std::setw(10) << fmt_delta(r.score_delta_pct) << '\n';
  }
  return os.str();
}

std::string ComparisonTable::to_csv() const {
  std::ostringstream os;
  os << "method,is_base,mean_ter,ter_delta_pct,bad_case_ratio,bad_case_delta_pct,mean_score,score_delta_pct\n";
  os << std::setprecision(17);
  auto opt = [](const std::optional<double>& d) {
    if (!d) return std::string();
    std::ostringstream s;
    s << std::setprecision(17) << *d;
    return s.str();
  };
  for (const auto& r : rows) {
    os << r.method << ',' << (r.method == base ? 1 : 0) << ',' << r.mean_ter << ',' << opt(r.ter_delta_pct)
       << ',' << r.bad_case_ratio << ',' << opt(r.bad_case_delta_pct) << ',' << r.mean_score << ','
       << opt(r.score_delta_pct) << '\n';
  }
  return os.str();
}

}  // namespace fpo
