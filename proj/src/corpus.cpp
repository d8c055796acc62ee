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

#include "milrw/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "milrw/error.hpp"
#include "milrw/markup.hpp"
#include "milrw/rng.hpp"

namespace milrw {

using nlohmann::json;

namespace {

constexpr std::size_t kInfillPool = 8;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIoError, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::kIoError, "short write to " + path.string());
}

void check_ranges(std::span<const CharRange> ranges, std::size_t size, Errc code,
                  std::string_view what) {
  std::size_t prev_end = 0;
  for (const auto& r : ranges) {
    if (r.begin >= r.end || r.end > size || r.begin < prev_end) {
      fail(code, std::string(what) + ": range [" + std::to_string(r.begin) + ", " +
                     std::to_string(r.end) + ") is empty, overlapping or out of bounds");
    }
    prev_end = r.end;
  }
}

}  // namespace

std::string_view to_string(ExampleType t) {
  switch (t) {
    case ExampleType::kRewrite: return "rewrite";
    case ExampleType::kInfill: return "infill";
    case ExampleType::kFeedbackAccept: return "feedback_accept";
    case ExampleType::kFeedbackReject: return "feedback_reject";
  }
  return "rewrite";
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValid: return "valid";
    case Split::kTest: return "test";
    case Split::kUnsplit: return "unsplit";
  }
  return "unsplit";
}

ExampleType parse_example_type(std::string_view s) {
  for (auto t : {ExampleType::kRewrite, ExampleType::kInfill, ExampleType::kFeedbackAccept,
                 ExampleType::kFeedbackReject}) {
    if (to_string(t) == s) return t;
  }
  fail(Errc::kInvalidRecord, "unknown example_type \"" + std::string(s) + "\"");
}

Split parse_split(std::string_view s) {
  for (auto v : {Split::kTrain, Split::kValid, Split::kTest, Split::kUnsplit}) {
    if (to_string(v) == s) return v;
  }
  fail(Errc::kInvalidRecord, "unknown split \"" + std::string(s) + "\"");
}

json to_json(const TrainingPair& pair) {
  json prov = json::object();
  const auto& p = pair.provenance;
  if (!p.source_id.empty()) prov["source_id"] = p.source_id;
  if (p.record_index) prov["record_index"] = *p.record_index;
  if (!p.session_id.empty()) prov["session_id"] = p.session_id;
  if (!p.request_id.empty()) prov["request_id"] = p.request_id;
  if (p.event_id) prov["event_id"] = *p.event_id;
  return {{"source", pair.source},
          {"target", pair.target},
          {"example_type", to_string(pair.example_type)},
          {"provenance", std::move(prov)},
          {"split", to_string(pair.split)}};
}

TrainingPair training_pair_from_json(const json& j) {
  try {
    TrainingPair pair;
    pair.source = j.at("source").get<std::string>();
    pair.target = j.at("target").get<std::string>();
    pair.example_type = parse_example_type(j.at("example_type").get<std::string>());
    pair.split = j.contains("split") ? parse_split(j.at("split").get<std::string>())
                                     : Split::kUnsplit;
    if (auto it = j.find("provenance"); it != j.end() && it->is_object()) {
      auto& p = pair.provenance;
      p.source_id = it->value("source_id", "");
      if (it->contains("record_index")) p.record_index = it->at("record_index").get<std::size_t>();
      p.session_id = it->value("session_id", "");
      p.request_id = it->value("request_id", "");
      if (it->contains("event_id")) p.event_id = it->at("event_id").get<std::uint64_t>();
    }
    if (pair.source.empty() || pair.target.empty()) {
      fail(Errc::kInvalidRecord, "training pair with empty source or target");
    }
    return pair;
  } catch (const json::exception& e) {
    fail(Errc::kInvalidRecord, std::string("bad training pair: ") + e.what());
  }
}

std::string to_jsonl_line(const TrainingPair& pair) { return to_json(pair).dump(); }

std::vector<TrainingPair> read_training_pairs(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<TrainingPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      pairs.push_back(training_pair_from_json(j));
    } catch (const json::exception& e) {
      Error err(Errc::kInvalidRecord, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      err.line = line_no;
      throw err;
    } catch (Error& e) {
      e.line = line_no;
      throw;
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Annotated sentences

void AnnotatedSentence::validate() const {
  if (text.empty()) fail(Errc::kInvalidRecord, "empty sentence text");
  if (spans.empty()) fail(Errc::kInvalidRecord, "sentence has no annotated span");
  check_ranges(spans, text.size(), Errc::kInvalidRecord, "annotated span");
}

AnnotatedSentence annotated_sentence_from_json(const json& j) {
  try {
    AnnotatedSentence a;
    a.text = j.at("text").get<std::string>();
    for (const auto& s : j.at("spans")) {
      a.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
    }
    a.source_id = j.value("source_id", "");
    if (auto it = j.find("device_label"); it != j.end() && it->is_string()) {
      a.device_label = it->get<std::string>();
    }
    a.validate();
    return a;
  } catch (const json::exception& e) {
    fail(Errc::kInvalidRecord, std::string("bad annotated sentence: ") + e.what());
  }
}

json to_json(const AnnotatedSentence& a) {
  json spans = json::array();
  for (const auto& s : a.spans) spans.push_back({s.begin, s.end});
  json j = {{"text", a.text}, {"spans", std::move(spans)}, {"source_id", a.source_id}};
  if (a.device_label) j["device_label"] = *a.device_label;
  return j;
}

std::vector<AnnotatedSentence> convert_word_index_tsv(std::istream& in,
                                                      const std::string& source_id) {
  std::vector<AnnotatedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      fail(Errc::kInvalidRecord, "line " + std::to_string(line_no) + ": expected sentence<TAB>index");
    }
    AnnotatedSentence a;
    a.text = line.substr(0, tab);
    a.source_id = source_id;
    const auto words = split_words(a.text);
    std::istringstream idx(line.substr(tab + 1));
    std::string item;
    while (std::getline(idx, item, ',')) {
      std::size_t k = 0;
      try {
        k = std::stoul(std::string(trim(item)));
      } catch (const std::exception&) {
        fail(Errc::kInvalidRecord, "line " + std::to_string(line_no) + ": bad word index");
      }
      if (k >= words.size()) {
        fail(Errc::kInvalidRecord, "line " + std::to_string(line_no) + ": word index out of range");
      }
      auto r = words[k].range;
      while (r.begin < r.end && std::ispunct(static_cast<unsigned char>(a.text[r.begin]))) ++r.begin;
      while (r.end > r.begin && std::ispunct(static_cast<unsigned char>(a.text[r.end - 1]))) --r.end;
      a.spans.push_back(r);
    }
    std::sort(a.spans.begin(), a.spans.end(),
              [](const CharRange& x, const CharRange& y) { return x.begin < y.begin; });
    a.validate();
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<AnnotatedSentence> convert_inline_markup(std::istream& in,
                                                     const std::string& source_id,
                                                     std::string_view open,
                                                     std::string_view close) {
  std::vector<AnnotatedSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    AnnotatedSentence a;
    a.source_id = source_id;
    std::size_t i = 0;
    while (i < line.size()) {
      const auto o = line.find(open, i);
      if (o == std::string::npos) {
        a.text.append(line, i, std::string::npos);
        break;
      }
      const auto c = line.find(close, o + open.size());
      if (c == std::string::npos) {
        fail(Errc::kInvalidRecord, "line " + std::to_string(line_no) + ": unterminated span");
      }
      a.text.append(line, i, o - i);
      const std::size_t begin = a.text.size();
      a.text.append(line, o + open.size(), c - o - open.size());
      a.spans.push_back({begin, a.text.size()});
      i = c + close.size();
    }
    a.validate();
    out.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthesis

SynthesizedSource synthesize_source(const AnnotatedSentence& sentence,
                                    GenerationBackend& infiller) {
  sentence.validate();

  std::string plain;
  std::vector<Demarcation> blanks;
  SynthesizedSource out;
  std::size_t cursor = 0;
  for (const auto& span : sentence.spans) {
    plain.append(sentence.text, cursor, span.begin - cursor);
    blanks.push_back({SpanKind::kInfill, plain.size(), plain.size(), {}});
    out.original_spans.push_back(sentence.text.substr(span.begin, span.size()));
    cursor = span.end;
  }
  plain.append(sentence.text, cursor, std::string::npos);

  ModelInput input;
  try {
    input = to_model_input(DemarcatedDraft::make(std::move(plain), std::move(blanks)));
  } catch (const Error& e) {
    fail(Errc::kInvalidRecord, std::string("sentence cannot be masked: ") + e.what());
  }

  auto candidates = infiller.candidates(input, kInfillPool);
  if (candidates.empty()) fail(Errc::kInfillFailed, "infiller returned no completion");
  const auto best = std::max_element(
      candidates.begin(), candidates.end(),
      [](const Candidate& a, const Candidate& b) { return a.score < b.score; });
  const std::string& completion = best->text;

  // Literal pieces around the masks; every literal must reappear in order.
  std::vector<std::string> literals(1);
  for (const auto& piece : parse_model_input(input.text)) {
    if (piece.kind == ModelInputPiece::Kind::kText) {
      literals.back() += piece.text;
    } else {
      literals.emplace_back();
    }
  }
  const std::size_t masks = literals.size() - 1;

  if (!std::string_view(completion).starts_with(literals.front())) {
    fail(Errc::kInfillFailed, "completion does not preserve the text before the first mask");
  }
  std::size_t pos = literals.front().size();
  for (std::size_t m = 0; m < masks; ++m) {
    const std::string& next = literals[m + 1];
    std::size_t found;
    if (m + 1 == masks) {
      if (completion.size() < next.size() + pos + 1 ||
          completion.compare(completion.size() - next.size(), next.size(), next) != 0) {
        fail(Errc::kInfillFailed, "completion does not preserve the text after the last mask");
      }
      found = completion.size() - next.size();
    } else {
      if (next.empty()) fail(Errc::kInfillFailed, "adjacent masks cannot be separated");
      found = completion.find(next, pos + 1);
      if (found == std::string::npos) {
        fail(Errc::kInfillFailed, "completion does not contain one fill per mask");
      }
    }
    CharRange fill{pos, found};
    while (fill.begin < fill.end && is_space(completion[fill.begin])) ++fill.begin;
    while (fill.end > fill.begin && is_space(completion[fill.end - 1])) --fill.end;
    if (fill.empty()) fail(Errc::kInfillFailed, "infiller produced an empty fill");
    out.replaced_ranges.push_back(fill);
    out.infilled_spans.push_back(completion.substr(fill.begin, fill.size()));
    pos = found + next.size();
  }
  out.generic = completion;
  return out;
}

std::array<TrainingPair, 2> make_training_examples(std::string_view generic,
                                                   std::string_view creative,
                                                   std::span<const CharRange> replaced_ranges,
                                                   const Provenance& provenance) {
  if (replaced_ranges.empty()) {
    fail(Errc::kRangeOutOfBounds, "a training pair must rewrite at least one range");
  }
  check_ranges(replaced_ranges, generic.size(), Errc::kRangeOutOfBounds, "replaced range");

  std::string rewrite;
  std::string infill;
  std::size_t cursor = 0;
  for (const auto& r : replaced_ranges) {
    const auto before = generic.substr(cursor, r.begin - cursor);
    rewrite += before;
    rewrite += kReplaceOpen;
    rewrite += ' ';
    rewrite += generic.substr(r.begin, r.size());
    rewrite += ' ';
    rewrite += kReplaceClose;
    infill += before;
    infill += kMask;
    cursor = r.end;
  }
  rewrite += generic.substr(cursor);
  infill += generic.substr(cursor);

  return {TrainingPair{std::move(rewrite), std::string(creative), ExampleType::kRewrite,
                       provenance, Split::kUnsplit},
          TrainingPair{std::move(infill), std::string(creative), ExampleType::kInfill,
                       provenance, Split::kUnsplit}};
}

FilterVerdict drift_filter(const TrainingPair& pair, std::string_view original_span,
                           std::string_view infilled_span, const StopWords& stop_words,
                           const DriftFilterConfig& config) {
  if (!config.enabled || trim(original_span) == trim(infilled_span)) return {};

  const auto original = stop_words.content_tokens(original_span);
  const std::set<std::string> original_set(original.begin(), original.end());
  const auto creative = canonical_tokens(pair.target);
  const std::set<std::string> creative_set(creative.begin(), creative.end());

  std::set<std::string> infilled;
  for (auto& t : stop_words.content_tokens(infilled_span)) infilled.insert(std::move(t));

  std::size_t shared = 0;
  std::size_t novel = 0;
  for (const auto& t : infilled) {
    if (original_set.count(t)) ++shared;
    if (!creative_set.count(t)) ++novel;
  }
  if (shared <= config.max_shared_content_tokens && novel >= config.min_novel_content_tokens) {
    return {false, std::string(kDropContentDrift)};
  }
  return {};
}

// ---------------------------------------------------------------------------
// Corpus build

void SplitRatios::validate() const {
  if (train < 0 || valid < 0 || test < 0 || std::abs(train + valid + test - 1.0) > 1e-6) {
    fail(Errc::kInvalidConfig, "split ratios must be non-negative and sum to 1");
  }
}

json reference_corpus_metadata() {
  return {
      {"split_targets", {{"train", 42000}, {"valid", 2000}, {"test", 1626}}},
      {"fine_tuning",
       {{"base_model", "BART-large (fairseq checkpoint)"},
        {"epochs", 5},
        {"learning_rate", 3e-5},
        {"learning_rate_selection", "held-out perplexity on the validation split"},
        {"optimizer", "adam"},
        {"adam_betas", {0.9, 0.999}},
        {"dropout", 0.1},
        {"lr_scheduler", "polynomial_decay"},
        {"weight_decay", 0.01},
        {"loss", "cross_entropy"}}},
      {"decoding", {{"strategy", "top_k_sampling"}, {"k", 10}}},
  };
}

json CorpusManifest::to_json() const {
  json errors = json::array();
  for (const auto& e : record_errors) {
    errors.push_back({{"input", e.input}, {"line", e.line}, {"code", e.code}, {"message", e.message}});
  }
  return {
      {"counts", counts},
      {"seed", seed},
      {"split_ratios", {{"train", ratios.train}, {"valid", ratios.valid}, {"test", ratios.test}}},
      {"infiller", infiller},
      {"records_read", records_read},
      {"records_failed", record_errors.size()},
      {"sentences_processed", sentences_processed},
      {"pairs_pre_filter", pairs_pre_filter},
      {"pairs_kept", pairs_kept},
      {"pairs_dropped", pairs_dropped},
      {"drop_reasons", drop_reasons},
      {"record_errors", std::move(errors)},
      {"drift_filter",
       {{"enabled", filter.enabled},
        {"max_shared_content_tokens", filter.max_shared_content_tokens},
        {"min_novel_content_tokens", filter.min_novel_content_tokens}}},
      {"reference", reference_corpus_metadata()},
  };
}

CorpusBuild build_corpus(std::span<const std::filesystem::path> inputs,
                         GenerationBackend& infiller, const CorpusOptions& options) {
  options.ratios.validate();
  CorpusBuild build;
  auto& manifest = build.manifest;
  manifest.seed = options.seed;
  manifest.ratios = options.ratios;
  manifest.infiller = infiller.id();
  manifest.filter = options.filter;

  std::vector<std::array<TrainingPair, 2>> groups;
  std::size_t record_index = 0;
  for (const auto& path : inputs) {
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      ++manifest.records_read;
      const std::size_t index = record_index++;
      auto record_error = [&](std::string code, std::string message) {
        manifest.record_errors.push_back(
            {path.string(), line_no, std::move(code), std::move(message)});
      };
      try {
        json j = json::parse(line);
        const auto sentence = annotated_sentence_from_json(j);
        const auto synth = synthesize_source(sentence, infiller);
        Provenance prov;
        prov.source_id = sentence.source_id;
        prov.record_index = index;
        auto pairs = make_training_examples(synth.generic, sentence.text,
                                            synth.replaced_ranges, prov);
        ++manifest.sentences_processed;
        manifest.pairs_pre_filter += pairs.size();

        FilterVerdict verdict;
        for (std::size_t s = 0; s < synth.original_spans.size() && verdict.keep; ++s) {
          verdict = drift_filter(pairs[0], synth.original_spans[s], synth.infilled_spans[s],
                                 *options.stop_words, options.filter);
        }
        if (!verdict.keep) {
          manifest.pairs_dropped += pairs.size();
          manifest.drop_reasons[verdict.reason] += pairs.size();
          continue;
        }
        groups.push_back(std::move(pairs));
      } catch (const json::exception& e) {
        record_error(std::string(code_name(Errc::kInvalidRecord)), e.what());
      } catch (const Error& e) {
        record_error(std::string(e.name()), e.what());
      }
    }
  }

  Rng rng(options.seed);
  rng.shuffle(std::span(groups));

  const std::size_t total = groups.size() * 2;
  const auto n_train = static_cast<std::size_t>(std::floor(options.ratios.train * total + 1e-9));
  const auto n_valid = static_cast<std::size_t>(std::floor(options.ratios.valid * total + 1e-9));
  std::vector<TrainingPair> train, valid, test;
  std::size_t assigned = 0;
  for (auto& group : groups) {
    Split split = Split::kTest;
    std::vector<TrainingPair>* bucket = &test;
    if (assigned < n_train) {
      split = Split::kTrain;
      bucket = &train;
    } else if (assigned < n_train + n_valid) {
      split = Split::kValid;
      bucket = &valid;
    }
    for (auto& pair : group) {
      pair.split = split;
      bucket->push_back(std::move(pair));
    }
    assigned += group.size();
  }
  manifest.counts = {{"train", train.size()}, {"valid", valid.size()}, {"test", test.size()}};
  manifest.pairs_kept = total;

  build.pairs = std::move(train);
  build.pairs.insert(build.pairs.end(), std::make_move_iterator(valid.begin()),
                     std::make_move_iterator(valid.end()));
  build.pairs.insert(build.pairs.end(), std::make_move_iterator(test.begin()),
                     std::make_move_iterator(test.end()));
  return build;
}

void write_corpus(const CorpusBuild& build, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(Errc::kIoError, "cannot create " + out_dir.string() + ": " + ec.message());
  std::map<Split, std::string> files;
  for (auto s : {Split::kTrain, Split::kValid, Split::kTest}) files[s];
  for (const auto& pair : build.pairs) {
    auto& f = files[pair.split];
    f += to_jsonl_line(pair);
    f += '\n';
  }
  for (const auto& [split, bytes] : files) {
    write_file(out_dir / (std::string(to_string(split)) + ".jsonl"), bytes);
  }
  write_file(out_dir / "manifest.json", build.manifest.to_json().dump(2) + "\n");
}

}  // namespace milrw
