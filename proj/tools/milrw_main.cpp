// Copyright 2026 The milrw Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// milrw: operator command line for corpus building, serving, feedback
// export, reporting and log validation.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "milrw/analytics.hpp"
#include "milrw/corpus.hpp"
#include "milrw/error.hpp"
#include "milrw/events.hpp"
#include "milrw/feedback.hpp"
#include "milrw/service.hpp"
#include "milrw/session.hpp"

namespace {

using namespace milrw;
using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIoError, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& body) {
  if (path.empty() || path == "-") {
    std::cout << body;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  if (!out) fail(Errc::kIoError, "cannot write " + path);
}

std::shared_ptr<GenerationBackend> make_infiller(std::uint64_t seed, const std::string& lexicon,
                                                 const std::string& url, std::int64_t timeout_ms) {
  if (!url.empty()) {
    return std::make_shared<HttpBackend>(url, std::chrono::milliseconds(timeout_ms), "http-infiller");
  }
  std::shared_ptr<const Lexicon> lex;
  if (!lexicon.empty()) lex = std::make_shared<const Lexicon>(Lexicon::from_file(lexicon));
  return std::make_shared<StubBackend>(seed, StubMode::kRewrite, lex);
}

Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

// Exit codes: 0 ok, 1 usage or runtime error, 2 corrupt log, 3 divergence.
int replay_validate(const std::string& log_path, const std::string& snapshot_path) {
  std::vector<InteractionEvent> events;
  SessionMap replayed;
  try {
    events = read_event_log(read_file(log_path));
    replayed = replay(std::span<const InteractionEvent>(events));
  } catch (const Error& e) {
    std::cerr << "replay-validate: " << log_path;
    if (e.line) std::cerr << ":" << *e.line;
    std::cerr << ": " << e.name() << ": " << e.what() << "\n";
    return 2;
  }
  if (!snapshot_path.empty()) {
    const json snap = json::parse(read_file(snapshot_path));
    const auto last = snap.value("last_event_id", std::uint64_t{0});
    std::vector<InteractionEvent> prefix;
    for (const auto& e : events) {
      if (e.event_id <= last) prefix.push_back(e);
    }
    const auto at_snapshot = replay(std::span<const InteractionEvent>(prefix));
    SessionMap stored;
    for (const auto& [id, js] : snap.at("sessions").items()) stored[id] = session_from_json(js);
    if (stored.size() != at_snapshot.size()) {
      std::cerr << "replay-validate: snapshot has " << stored.size() << " sessions, replay has "
                << at_snapshot.size() << "\n";
      return 3;
    }
    for (const auto& [id, s] : stored) {
      auto it = at_snapshot.find(id);
      if (it == at_snapshot.end() || !(it->second == s)) {
        std::cerr << "replay-validate: session " << id << " diverges from the snapshot\n";
        return 3;
      }
    }
  }
  std::cout << "ok: " << events.size() << " events, " << replayed.size() << " sessions\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"milrw - machine-in-the-loop rewriting workbench"};
  app.require_subcommand(1);

  // corpus build / convert
  auto* corpus = app.add_subcommand("corpus", "Build or convert training corpora");
  corpus->require_subcommand(1);
  auto* build = corpus->add_subcommand("build", "Synthesize rewrite/infill pairs");
  std::vector<std::string> inputs;
  std::string out_dir = "corpus_out";
  std::uint64_t seed = 0;
  std::uint64_t infiller_seed = 0;
  std::string lexicon;
  std::string infiller_url;
  std::int64_t timeout_ms = 10000;
  bool no_filter = false;
  std::vector<double> ratios;
  build->add_option("--input", inputs, "AnnotatedSentence JSONL file(s)")->required();
  build->add_option("--out", out_dir, "Output directory");
  build->add_option("--seed", seed, "Split shuffle seed");
  build->add_option("--infiller-seed", infiller_seed, "Stub infiller seed");
  build->add_option("--lexicon", lexicon, "Stub lexicon TSV (default: built-in)");
  build->add_option("--infiller-url", infiller_url, "HTTP infiller instead of the stub");
  build->add_option("--timeout-ms", timeout_ms, "HTTP infiller timeout");
  build->add_flag("--no-filter", no_filter, "Disable the content-drift filter");
  build->add_option("--ratios", ratios, "train valid test proportions")->expected(3);

  auto* convert = corpus->add_subcommand("convert", "Convert annotations to AnnotatedSentence JSONL");
  std::string conv_format = "inline";
  std::string conv_input;
  std::string conv_out;
  std::string source_id = "converted";
  std::string open_delim = "**";
  std::string close_delim = "**";
  convert->add_option("--format", conv_format, "inline | word-index")
      ->check(CLI::IsMember({"inline", "word-index"}));
  convert->add_option("--input", conv_input, "Input file")->required();
  convert->add_option("--out", conv_out, "Output JSONL (default: stdout)");
  convert->add_option("--source-id", source_id, "source_id for every record");
  convert->add_option("--open", open_delim, "Inline opening delimiter");
  convert->add_option("--close", close_delim, "Inline closing delimiter");

  // serve
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  std::string config_path;
  std::string listen;
  std::int64_t sweep_ms = 60000;
  serve->add_option("--config", config_path, "Service config JSON")->required();
  serve->add_option("--listen", listen, "host:port, overrides config and environment");
  serve->add_option("--sweep-ms", sweep_ms, "Idle-session sweep interval");

  // feedback export
  auto* feedback = app.add_subcommand("feedback", "Feedback datasets");
  feedback->require_subcommand(1);
  auto* fexport = feedback->add_subcommand("export", "Extract pairs from an event log");
  std::string log_path;
  std::string base_path;
  std::string fb_out = "feedback_out";
  double ratio = 0.0;
  std::size_t count = 0;
  std::uint64_t fb_seed = 0;
  FeedbackOptions fb_opts;
  fexport->add_option("--log", log_path, "Event log JSONL")->required();
  fexport->add_option("--out", fb_out, "Output directory");
  fexport->add_option("--base", base_path, "Base corpus JSONL (TrainingPair)");
  auto* ratio_opt = fexport->add_option("--ratio", ratio, "Sampled originals per feedback pair");
  auto* count_opt = fexport->add_option("--count", count, "Exact number of sampled originals");
  ratio_opt->excludes(count_opt);
  fexport->add_option("--seed", fb_seed, "Sampling seed");
  fexport->add_flag("--siblings-as-rejects", fb_opts.siblings_as_rejects);
  fexport->add_flag("--reject-all-shown", fb_opts.reject_all_shown);
  fexport->add_flag("--include-closed", fb_opts.include_closed);

  // report
  auto* report = app.add_subcommand("report", "Compute the metrics report");
  std::string rep_log;
  std::string surveys_path;
  std::string votes_path;
  std::string captions_path;
  std::string format = "json";
  std::string rouge_norm = "suggestion";
  std::string rep_out;
  report->add_option("--log", rep_log, "Event log JSONL");
  report->add_option("--surveys", surveys_path, "Survey JSONL");
  report->add_option("--votes", votes_path, "Vote JSONL");
  report->add_option("--captions", captions_path, "Caption-set JSONL ({set, caption})");
  report->add_option("--format", format, "json | text")->check(CLI::IsMember({"json", "text"}));
  report->add_option("--rouge-norm", rouge_norm, "suggestion | caption")
      ->check(CLI::IsMember({"suggestion", "caption"}));
  report->add_option("--out", rep_out, "Output file (default: stdout)");

  // replay-validate
  auto* rv = app.add_subcommand("replay-validate", "Check that a log replays cleanly");
  std::string rv_log;
  std::string rv_snapshot;
  rv->add_option("--log", rv_log, "Event log JSONL")->required();
  rv->add_option("--snapshot", rv_snapshot, "Snapshot JSON from /admin/snapshot");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*build) {
      CorpusOptions opts;
      opts.seed = seed;
      opts.filter.enabled = !no_filter;
      if (!ratios.empty()) opts.ratios = {ratios[0], ratios[1], ratios[2]};
      auto infiller = make_infiller(infiller_seed, lexicon, infiller_url, timeout_ms);
      std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
      const auto result = build_corpus(paths, *infiller, opts);
      write_corpus(result, out_dir);
      const auto& m = result.manifest;
      std::cerr << "corpus: " << m.records_read << " records, " << m.pairs_pre_filter
                << " pairs before filtering, " << m.pairs_kept << " kept, "
                << m.record_errors.size() << " record errors\n";
      return 0;
    }
    if (*convert) {
      std::ifstream in(conv_input);
      if (!in) fail(Errc::kIoError, "cannot read " + conv_input);
      const auto sentences = conv_format == "inline"
                                 ? convert_inline_markup(in, source_id, open_delim, close_delim)
                                 : convert_word_index_tsv(in, source_id);
      std::string body;
      for (const auto& s : sentences) body += to_json(s).dump() + "\n";
      write_output(conv_out, body);
      return 0;
    }
    if (*serve) {
      auto cfg = ServiceConfig::from_file(config_path);
      cfg.apply_env_overrides();
      if (!listen.empty()) cfg.listen = listen;
      Service service(cfg);
      const int port = service.bind();
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "milrw: listening on port " << port << "\n";
      service.run(sweep_ms);
      g_service = nullptr;
      return 0;
    }
    if (*fexport) {
      auto pairs = extract_pairs_from_log(read_file(log_path), fb_opts);
      FeedbackDataset ds;
      if (*ratio_opt || *count_opt) {
        if (base_path.empty()) fail(Errc::kInvalidArgument, "--base is required for mixing");
        const auto base = read_training_pairs(base_path);
        ds = *ratio_opt ? mix_with_original(std::move(pairs), base, ratio, fb_seed)
                        : mix_with_count(std::move(pairs), base, count, fb_seed);
      } else {
        ds.pairs = std::move(pairs);
        ds.seed = fb_seed;
      }
      write_feedback(ds, fb_out);
      const auto m = ds.manifest();
      std::cerr << "feedback: " << m["counts"]["feedback_pairs"] << " pairs, "
                << m["counts"]["mixed_original"] << " sampled originals\n";
      return 0;
    }
    if (*report) {
      ReportInputs in;
      if (!rep_log.empty()) in.sessions = replay(std::string_view(read_file(rep_log)));
      if (!surveys_path.empty()) in.surveys = parse_surveys(read_file(surveys_path));
      if (!votes_path.empty()) in.votes = parse_votes(read_file(votes_path));
      if (!captions_path.empty()) in.caption_sets = parse_caption_sets(read_file(captions_path));
      in.rouge = rouge_norm == "caption" ? RougeNormalization::kCaption
                                         : RougeNormalization::kSuggestion;
      const auto rep = build_report(in);
      write_output(rep_out, format == "text" ? rep.to_text() : rep.to_json().dump(2) + "\n");
      return 0;
    }
    if (*rv) return replay_validate(rv_log, rv_snapshot);
  } catch (const Error& e) {
    std::cerr << "milrw: " << e.name();
    if (e.line) std::cerr << " (line " << *e.line << ")";
    std::cerr << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "milrw: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
