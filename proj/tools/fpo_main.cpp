// fpo: command-line driver. Every command reads one experiment config and
// exchanges artifacts with the others through files in the config's out_dir.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpo/config.hpp"
#include "fpo/error.hpp"
#include "fpo/experiment.hpp"
#include "fpo/gradsuite.hpp"
#include "fpo/records.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kConfig = 2, kInput = 3, kRuntime = 4 };

struct Common {
  std::string config_path;
  int jobs = 1;
};

struct Context {
  fpo::ExperimentConfig cfg;
  std::uint64_t hash = 0;
  fs::path dir;
  int jobs = 1;

  std::string path(const std::string& name) const { return (dir / name).string(); }
};

Context open_context(const Common& c) {
  if (c.jobs < 1) throw fpo::ConfigError("--jobs must be >= 1");
  Context ctx;
  ctx.cfg = fpo::load_config(c.config_path);
  ctx.hash = ctx.cfg.hash();
  ctx.dir = ctx.cfg.out_dir;
  ctx.jobs = c.jobs;
  std::error_code ec;
  fs::create_directories(ctx.dir, ec);
  if (ec) throw fpo::InputError("cannot create output directory '" + ctx.dir.string() + "': " + ec.message());
  return ctx;
}

std::string method_name(fpo::LossVariant v) {
  switch (v) {
    case fpo::LossVariant::kFpoTokenSigmoid: return "fpo";
    case fpo::LossVariant::kDpoUtterance: return "dpo";
    default: return std::string(fpo::variant_name(v));
  }
}

fpo::ModelCheckpoint load_model(const Context& ctx, const std::string& name) {
  const std::string p = ctx.path(name + ".ckpt");
  fpo::LoadedCheckpoint loaded = fpo::load_checkpoint(p);
  if (loaded.config_hash != ctx.hash) {
    throw fpo::InputError("'" + p + "' was produced under config " + fpo::hash_hex(loaded.config_hash) +
                          ", current config is " + fpo::hash_hex(ctx.hash));
  }
  if (!(loaded.ckpt.config == ctx.cfg.model)) {
    throw fpo::InputError("'" + p + "' does not match the configured model shape");
  }
  return std::move(loaded.ckpt);
}

std::vector<json> read(const Context& ctx, const std::string& name, std::string_view format) {
  return fpo::read_records(ctx.path(name), format, ctx.hash);
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int cmd_gen_sft(const Context& ctx) {
  const auto data = fpo::build_sft_data(ctx.cfg);
  std::vector<json> records;
  int corrupted = 0;
  for (const auto& e : data) {
    records.push_back(fpo::to_json(e));
    corrupted += e.spans.empty() ? 0 : 1;
  }
  fpo::write_records(ctx.path("sft.jsonl"), fpo::format::kSft, ctx.hash, records);
  std::printf("wrote %zu SFT examples (%d corrupted) to %s\n", data.size(), corrupted,
              ctx.path("sft.jsonl").c_str());
  return kOk;
}

int cmd_train_sft(const Context& ctx) {
  std::vector<fpo::SftExample> data;
  for (const auto& r : read(ctx, "sft.jsonl", fpo::format::kSft)) data.push_back(fpo::sft_from_json(r));
  const fpo::TrainResult tr = fpo::train_sft_model(ctx.cfg, data, ctx.jobs);
  fpo::save_checkpoint(ctx.path("sft.ckpt"), tr.model, ctx.hash);
  fpo::write_text(ctx.path("sft_loss.csv"), fpo::loss_log_csv(tr.log, ctx.hash));
  std::printf("SFT: %zu steps, final loss %.6f -> %s\n", tr.log.size(), tr.log.empty() ? 0.0 : tr.log.back().loss,
              ctx.path("sft.ckpt").c_str());
  return kOk;
}

int cmd_sample(const Context& ctx) {
  const fpo::ModelCheckpoint sft = load_model(ctx, "sft");
  const auto groups = fpo::sample_groups(sft, ctx.cfg.task(), ctx.cfg.pairs, ctx.cfg.prompts,
                                         fpo::stage_seed(ctx.cfg, fpo::stage::kPairs), ctx.jobs);
  std::vector<json> records;
  for (const auto& g : groups) {
    records.push_back(fpo::group_to_json(g, fpo::pair_from_group(g, ctx.cfg.pairs), ctx.cfg.pairs));
  }
  fpo::write_records(ctx.path("samples.jsonl"), fpo::format::kSamples, ctx.hash, records);
  std::printf("scored %zu prompts x %d candidates -> %s\n", groups.size(), ctx.cfg.pairs.sampling.k,
              ctx.path("samples.jsonl").c_str());
  return kOk;
}

int cmd_build_pairs(const Context& ctx) {
  fpo::PairBuildStats stats;
  std::vector<json> records;
  for (const auto& r : read(ctx, "samples.jsonl", fpo::format::kSamples)) {
    const fpo::PromptGroup g = fpo::group_from_json(r);
    if (static_cast<int>(g.samples.size()) != ctx.cfg.pairs.sampling.k) {
      throw fpo::InputError("samples.jsonl holds groups of a different k than the config");
    }
    const fpo::GroupResult res = fpo::pair_from_group(g, ctx.cfg.pairs);
    ++stats.prompts;
    switch (res.outcome) {
      case fpo::GroupOutcome::kSelected: ++stats.selected; break;
      case fpo::GroupOutcome::kBelowTau: ++stats.rejected_tau; break;
      case fpo::GroupOutcome::kDegenerate: ++stats.degenerate; break;
    }
    if (res.pair) records.push_back(fpo::to_json(*res.pair));
  }
  fpo::write_records(ctx.path("pairs.jsonl"), fpo::format::kPairs, ctx.hash, records);
  const json summary = {{"config_hash", fpo::hash_hex(ctx.hash)},
                        {"prompts", stats.prompts},
                        {"selected", stats.selected},
                        {"rejected_tau", stats.rejected_tau},
                        {"degenerate", stats.degenerate},
                        {"tau", ctx.cfg.pairs.tau}};
  fpo::write_text(ctx.path("pairs_summary.json"), summary.dump(2) + "\n");
  std::printf("prompts %d: %d pairs selected, %d below tau, %d degenerate (yield %.3f) -> %s\n", stats.prompts,
              stats.selected, stats.rejected_tau, stats.degenerate,
              stats.prompts ? static_cast<double>(stats.selected) / stats.prompts : 0.0,
              ctx.path("pairs.jsonl").c_str());
  return kOk;
}

int cmd_train(const Context& ctx, const std::string& method) {
  const fpo::LossVariant variant = fpo::variant_from_name(method);
  const std::string name = method_name(variant);
  const fpo::ModelCheckpoint sft = load_model(ctx, "sft");
  // Degenerate pairs are dropped for every variant so that methods compared
  // at one budget see identical pairs.
  std::vector<fpo::PreferencePair> pairs;
  for (const auto& r : read(ctx, "pairs.jsonl", fpo::format::kPairs)) {
    fpo::PreferencePair p = fpo::pair_from_json(r);
    if (!p.masks.degenerate) pairs.push_back(std::move(p));
  }
  if (ctx.cfg.pair_budget > 0 && static_cast<int>(pairs.size()) > ctx.cfg.pair_budget) {
    pairs.resize(static_cast<std::size_t>(ctx.cfg.pair_budget));
  }
  if (pairs.empty()) throw fpo::InputError("pairs.jsonl holds no usable pairs");
  const fpo::TrainResult tr = fpo::train(sft, sft, pairs, fpo::preference_config(ctx.cfg, variant), ctx.jobs);
  fpo::save_checkpoint(ctx.path(name + ".ckpt"), tr.model, ctx.hash);
  fpo::write_text(ctx.path(name + "_loss.csv"), fpo::loss_log_csv(tr.log, ctx.hash));
  std::printf("%s: %d pairs, %zu steps, final loss %.6f -> %s\n", name.c_str(), tr.pairs_used, tr.log.size(),
              tr.log.empty() ? 0.0 : tr.log.back().loss, ctx.path(name + ".ckpt").c_str());
  return kOk;
}

int cmd_eval(const Context& ctx, const std::string& models, const std::string& base) {
  const auto names = split(models);
  if (names.empty()) throw fpo::ConfigError("--models is empty");
  std::map<std::string, fpo::EvalReport> reports;
  std::vector<std::pair<std::string, fpo::EvalReport>> ordered;
  for (const auto& n : names) {
    const fpo::EvalReport r = fpo::evaluate(ctx.cfg, load_model(ctx, n), ctx.jobs);
    reports[n] = r;
    ordered.emplace_back(n, r);
    std::printf("%-22s bad-case %.4f  TER %.4f  score %.4f\n", n.c_str(), r.bad_case_ratio, r.mean_ter,
                r.mean_score);
  }
  fpo::write_text(ctx.path("eval.csv"), fpo::eval_reports_csv(ordered, ctx.hash));
  json snapshot = ctx.cfg.to_json();
  snapshot.erase("out_dir");
  json summary = {{"config_hash", fpo::hash_hex(ctx.hash)}, {"config", snapshot}};
  for (const auto& [n, r] : ordered) summary["reports"][n] = fpo::eval_report_json(r);
  if (reports.size() >= 2) {
    const fpo::ComparisonTable table = fpo::compare(reports, base);
    fpo::write_text(ctx.path("comparison.csv"), fpo::csv_preamble(ctx.hash) + table.to_csv());
    fpo::write_text(ctx.path("comparison.txt"), table.to_text());
    summary["base"] = base;
    std::printf("%s", table.to_text().c_str());
  }
  fpo::write_text(ctx.path("eval_summary.json"), summary.dump(2) + "\n");
  return kOk;
}

int cmd_sweep(const Context& ctx) {
  const fpo::ModelCheckpoint sft = load_model(ctx, "sft");
  const fpo::SweepReport report =
      fpo::sweep(sft, ctx.cfg.task(), ctx.cfg.pairs, ctx.cfg.train, ctx.cfg.eval, ctx.cfg.sweep, ctx.jobs,
                 [](const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); });
  fpo::write_text(ctx.path("sweep_rows.csv"), fpo::sweep_rows_csv(report, ctx.hash));
  fpo::write_text(ctx.path("sweep_cells.csv"), fpo::sweep_cells_csv(report, ctx.hash));
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"budget", c.budget},
                     {"method", c.method},
                     {"n_seeds", c.n_seeds},
                     {"partial", c.partial},
                     {"mean_bad_case", c.mean_bad_case},
                     {"sd_bad_case", c.sd_bad_case}});
    std::printf("budget %4d %-22s bad-case %.4f +- %.4f%s\n", c.budget, c.method.c_str(), c.mean_bad_case,
                c.sd_bad_case, c.partial ? " (partial)" : "");
  }
  const json summary = {{"config_hash", fpo::hash_hex(ctx.hash)}, {"cells", cells}};
  fpo::write_text(ctx.path("sweep_summary.json"), summary.dump(2) + "\n");
  return kOk;
}

int cmd_gradcheck(const Context& ctx, int instances, double h, double tolerance) {
  const auto rows = fpo::gradient_suite(instances, h, fpo::stage_seed(ctx.cfg, "gradcheck"));
  std::ostringstream csv;
  csv << fpo::csv_preamble(ctx.hash) << "target,instance,coords,max_rel_error\n";
  std::map<std::string, double> worst;
  for (const auto& r : rows) {
    csv << r.target << ',' << r.instance << ',' << r.coords << ',' << fpo::format_double(r.max_rel_error) << '\n';
    worst[r.target] = std::max(worst[r.target], r.max_rel_error);
  }
  fpo::write_text(ctx.path("gradcheck.csv"), csv.str());
  bool ok = true;
  for (const auto& [target, err] : worst) {
    const bool pass = err < tolerance;
    ok = ok && pass;
    std::printf("%-22s max rel error %.3e over %d instances: %s\n", target.c_str(), err, instances,
                pass ? "ok" : "FAILED");
  }
  if (!ok) throw fpo::InternalError("gradient check exceeded tolerance " + fpo::format_double(tolerance));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fine-grained preference optimization laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fpo 0.1.0");

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Experiment config (JSON)")->required();
    sub->add_option("-j,--jobs", common.jobs, "Worker threads; results do not depend on it")
        ->capture_default_str();
  };

  auto* gen = app.add_subcommand("gen-sft", "Generate the corrupted SFT dataset -> sft.jsonl");
  auto* train_sft = app.add_subcommand("train-sft", "Train the SFT model on sft.jsonl -> sft.ckpt, sft_loss.csv");
  auto* samp = app.add_subcommand("sample", "Sample and score k candidates per prompt -> samples.jsonl");
  auto* pairs = app.add_subcommand("build-pairs",
                                   "Select, annotate and mask pairs from samples.jsonl -> pairs.jsonl");
  auto* tr = app.add_subcommand("train", "Preference-train from sft.ckpt on pairs.jsonl -> <method>.ckpt");
  std::string method;
  tr->add_option("method", method, "fpo | dpo | fpo_sequence_sigmoid")->required();
  auto* ev = app.add_subcommand("eval", "Evaluate checkpoints and compare them -> eval.csv, comparison.csv");
  std::string models = "sft,fpo,dpo";
  std::string base = "sft";
  ev->add_option("--models", models, "Comma-separated checkpoint names in out_dir")->capture_default_str();
  ev->add_option("--base", base, "Reference row of the comparison")->capture_default_str();
  auto* sw = app.add_subcommand("sweep", "Pair-budget sweep from sft.ckpt -> sweep_rows.csv, sweep_cells.csv");
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite -> gradcheck.csv");
  int instances = 20;
  double h = 1e-5;
  double tolerance = 1e-4;
  gc->add_option("--instances", instances, "Random instances per target")->capture_default_str();
  gc->add_option("--step", h, "Central-difference step")->capture_default_str();
  gc->add_option("--tolerance", tolerance, "Maximum relative error")->capture_default_str();
  auto* defaults = app.add_subcommand("default-config", "Print the default config as JSON");

  for (auto* s : {gen, train_sft, samp, pairs, tr, ev, sw, gc}) add_common(s);

  app.footer(
      "Exit codes: 0 success, 1 usage error, 2 invalid config, 3 missing or mismatched input, 4 runtime failure.\n"
      "FPO_SEED and FPO_OUT_DIR override the config's seed and out_dir.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (defaults->parsed()) {
      std::printf("%s\n", fpo::ExperimentConfig{}.to_json().dump(2).c_str());
      return kOk;
    }
    const Context ctx = open_context(common);
    if (gen->parsed()) return cmd_gen_sft(ctx);
    if (train_sft->parsed()) return cmd_train_sft(ctx);
    if (samp->parsed()) return cmd_sample(ctx);
    if (pairs->parsed()) return cmd_build_pairs(ctx);
    if (tr->parsed()) return cmd_train(ctx, method);
    if (ev->parsed()) return cmd_eval(ctx, models, base);
    if (sw->parsed()) return cmd_sweep(ctx);
    if (gc->parsed()) return cmd_gradcheck(ctx, instances, h, tolerance);
  } catch (const fpo::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const fpo::InputError& e) {
    std::fprintf(stderr, "input error: %s\n", e.what());
    return kInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
