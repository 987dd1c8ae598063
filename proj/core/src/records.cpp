#include "fpo/records.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fpo/error.hpp"

namespace fpo {

using nlohmann::json;

namespace {

TokenSeq seq_from(const json& j) { return j.get<TokenSeq>(); }

json spans_json(const std::vector<ErrorSpan>& spans) {
  json a = json::array();
  for (const auto& s : spans) a.push_back(to_json(s));
  return a;
}

std::vector<ErrorSpan> spans_from(const json& j) {
  std::vector<ErrorSpan> out;
  for (const auto& s : j) out.push_back(span_from_json(s));
  return out;
}

}  // namespace

json to_json(const ErrorSpan& s) {
  return json::array({s.start, s.end, std::string(kind_name(s.kind))});
}

ErrorSpan span_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw InputError("span record must be [start, end, kind]");
  ErrorSpan s;
  s.start = j[0].get<std::size_t>();
  s.end = j[1].get<std::size_t>();
  s.kind = kind_from_name(j[2].get<std::string>());
  if (s.end < s.start) throw InputError("span record has end < start");
  return s;
}

json to_json(const SftExample& e) {
  return {{"text", e.text}, {"target", e.target}, {"spans", spans_json(e.spans)}};
}

SftExample sft_from_json(const json& j) {
  return {seq_from(j.at("text")), seq_from(j.at("target")), spans_from(j.at("spans"))};
}

json group_to_json(const PromptGroup& group, const GroupResult& result, const PairBuildConfig& config) {
  json samples = json::array();
  for (const auto& s : group.samples) {
    samples.push_back({{"output", s.sample.output},
                       {"temperature", s.sample.meta.temperature},
                       {"top_k", s.sample.meta.top_k},
                       {"seed", s.sample.meta.seed},
                       {"index", s.sample.meta.sample_index},
                       {"truncated", s.sample.meta.truncated},
                       {"w", s.score.w},
                       {"m", s.score.m},
                       {"c", s.score.c},
                       {"dur", s.score.dur},
                       {"s", s.score.s}});
  }
  const auto& wt = config.weights;
  json decision = {{"tau", config.tau}, {"outcome", std::string(outcome_name(result.outcome))}};
  if (result.selection) {
    decision["winner"] = result.selection->winner;
    decision["loser"] = result.selection->loser;
    decision["gap"] = group.samples[result.selection->winner].score.s -
                      group.samples[result.selection->loser].score.s;
  }
  return {{"text", group.text},
          {"reference", group.reference},
          {"samples", samples},
          {"weights",
           {{"lambda_w", wt.lambda_w},
            {"lambda_m", wt.lambda_m},
            {"lambda_c", wt.lambda_c},
            {"lambda_d", wt.lambda_d},
            {"p", wt.p}}},
          {"decision", decision}};
}

PromptGroup group_from_json(const json& j) {
  PromptGroup g;
  g.text = seq_from(j.at("text"));
  g.reference = seq_from(j.at("reference"));
  for (const auto& s : j.at("samples")) {
    ScoredSample ss;
    ss.sample.condition = g.text;
    ss.sample.output = seq_from(s.at("output"));
    ss.sample.meta.temperature = s.at("temperature").get<double>();
    ss.sample.meta.top_k = s.at("top_k").get<int>();
    ss.sample.meta.seed = s.at("seed").get<std::uint64_t>();
    ss.sample.meta.sample_index = s.at("index").get<int>();
    ss.sample.meta.truncated = s.at("truncated").get<bool>();
    ss.score.w = s.at("w").get<double>();
    ss.score.m = s.at("m").get<double>();
    ss.score.c = s.at("c").get<double>();
    ss.score.dur = s.at("dur").get<double>();
    ss.score.s = s.at("s").get<double>();
    g.samples.push_back(std::move(ss));
  }
  return g;
}

json to_json(const PreferencePair& p) {
  return {{"condition", p.condition},
          {"reference", p.reference},
          {"winner", p.winner},
          {"loser", p.loser},
          {"score_w", p.score_w},
          {"score_l", p.score_l},
          {"spans_w", spans_json(p.spans_w)},
          {"spans_l", spans_json(p.spans_l)},
          {"mask_w", p.masks.winner.to_bitstring()},
          {"mask_l", p.masks.loser.to_bitstring()},
          {"degenerate", p.masks.degenerate}};
}

PreferencePair pair_from_json(const json& j) {
  PreferencePair p;
  p.condition = seq_from(j.at("condition"));
  p.reference = seq_from(j.at("reference"));
  p.winner = seq_from(j.at("winner"));
  p.loser = seq_from(j.at("loser"));
  p.score_w = j.at("score_w").get<double>();
  p.score_l = j.at("score_l").get<double>();
  p.spans_w = spans_from(j.at("spans_w"));
  p.spans_l = spans_from(j.at("spans_l"));
  p.masks.winner = IndicatorMask::from_bitstring(j.at("mask_w").get<std::string>());
  p.masks.loser = IndicatorMask::from_bitstring(j.at("mask_l").get<std::string>());
  p.masks.degenerate = j.at("degenerate").get<bool>();
  if (p.masks.winner.size() != p.winner.size() || p.masks.loser.size() != p.loser.size()) {
    throw InputError("pair record mask length does not match its sequence");
  }
  return p;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << content;
  if (!out) throw InputError("failed writing '" + path + "'");
}

void write_records(const std::string& path, std::string_view format, std::uint64_t config_hash,
                   const std::vector<json>& records) {
  std::string body;
  const json header = {{"format", std::string(format)},
                       {"schema_version", kRecordSchemaVersion},
                       {"config_hash", hash_hex(config_hash)}};
  body += header.dump() + "\n";
  for (const auto& r : records) body += r.dump() + "\n";
  write_text(path, body);
}

std::vector<json> read_records(const std::string& path, std::string_view format,
                               std::optional<std::uint64_t> expected_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("missing input artifact '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw InputError("'" + path + "' is empty");
  std::vector<json> out;
  try {
    const json header = json::parse(line);
    const std::string got = header.at("format").get<std::string>();
    if (got != format) {
      throw InputError("'" + path + "' has format '" + got + "', expected '" + std::string(format) + "'");
    }
    const int version = header.at("schema_version").get<int>();
    if (version != kRecordSchemaVersion) {
      throw InputError("'" + path + "' has schema_version " + std::to_string(version) +
                       ", this build reads schema_version " + std::to_string(kRecordSchemaVersion));
    }
    const std::uint64_t h = parse_hash_hex(header.at("config_hash").get<std::string>());
    if (expected_hash && h != *expected_hash) {
      throw InputError("'" + path + "' was produced under config " + hash_hex(h) + ", current config is " +
                       hash_hex(*expected_hash));
    }
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(json::parse(line));
    }
  } catch (const json::exception& e) {
    throw InputError("malformed record in '" + path + "': " + e.what());
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::string csv_preamble(std::uint64_t config_hash) {
  return "# schema_version=" + std::to_string(kRecordSchemaVersion) + " config_hash=" + hash_hex(config_hash) +
         "\n";
}

std::string loss_log_csv(const std::vector<StepLog>& log, std::uint64_t config_hash) {
  std::ostringstream os;
  os << csv_preamble(config_hash) << "step,epoch,variant,loss,grad_norm\n";
  for (const auto& s : log) {
    os << s.step << ',' << s.epoch << ',' << s.variant << ',' << format_double(s.loss) << ','
       << format_double(s.grad_norm) << '\n';
  }
  return os.str();
}

std::string eval_reports_csv(const std::vector<std::pair<std::string, EvalReport>>& reports,
                             std::uint64_t config_hash) {
  std::ostringstream os;
  os << csv_preamble(config_hash)
     << "method,seed,n_samples,mean_ter,bad_case_ratio,n_bad,mean_score,mean_quality,n_clean,n_with_errors,"
        "n_truncated";
  for (ErrorKind k : kAllErrorKinds) os << ',' << kind_name(k);
  os << '\n';
  for (const auto& [name, r] : reports) {
    os << name << ',' << r.seed << ',' << r.n_samples << ',' << format_double(r.mean_ter) << ','
       << format_double(r.bad_case_ratio) << ',' << r.n_bad << ',' << format_double(r.mean_score) << ','
       << format_double(r.mean_quality) << ',' << r.n_clean << ',' << r.n_with_errors << ',' << r.n_truncated;
    for (int c : r.kind_counts) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

json eval_report_json(const EvalReport& r) {
  json kinds = json::object();
  for (std::size_t i = 0; i < kAllErrorKinds.size(); ++i) {
    kinds[std::string(kind_name(kAllErrorKinds[i]))] = r.kind_counts[i];
  }
  return {{"n_samples", r.n_samples},
          {"seed", r.seed},
          {"mean_ter", r.mean_ter},
          {"bad_case_ratio", r.bad_case_ratio},
          {"n_bad", r.n_bad},
          {"mean_score", r.mean_score},
          {"mean_quality", r.mean_quality},
          {"n_clean", r.n_clean},
          {"n_with_errors", r.n_with_errors},
          {"n_truncated", r.n_truncated},
          {"kind_counts", kinds},
          {"ter_threshold", r.settings.ter_threshold},
          {"quality_threshold", r.settings.quality_threshold},
          {"temperature", r.settings.temperature},
          {"top_k", r.settings.top_k}};
}

std::string sweep_rows_csv(const SweepReport& report, std::uint64_t config_hash) {
  std::ostringstream os;
  os << csv_preamble(config_hash)
     << "budget,method,seed,pairs_used,partial,n_samples,mean_ter,bad_case_ratio,mean_score\n";
  for (const auto& r : report.rows) {
    os << r.budget << ',' << r.method << ',' << r.seed << ',' << r.pairs_used << ',' << (r.partial ? 1 : 0)
       << ',' << r.report.n_samples << ',' << format_double(r.report.mean_ter) << ','
       << format_double(r.report.bad_case_ratio) << ',' << format_double(r.report.mean_score) << '\n';
  }
  return os.str();
}

std::string sweep_cells_csv(const SweepReport& report, std::uint64_t config_hash) {
  std::ostringstream os;
  os << csv_preamble(config_hash)
     << "budget,method,n_seeds,partial,mean_bad_case,sd_bad_case,mean_ter,sd_ter,mean_score,sd_score\n";
  for (const auto& c : report.cells) {
    os << c.budget << ',' << c.method << ',' << c.n_seeds << ',' << (c.partial ? 1 : 0) << ','
       << format_double(c.mean_bad_case) << ',' << format_double(c.sd_bad_case) << ','
       << format_double(c.mean_ter) << ',' << format_double(c.sd_ter) << ',' << format_double(c.mean_score)
       << ',' << format_double(c.sd_score) << '\n';
  }
  return os.str();
}

}  // namespace fpo
