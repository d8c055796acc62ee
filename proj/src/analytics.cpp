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

#include "milrw/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "milrw/error.hpp"

namespace milrw {

using nlohmann::json;

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::kIoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Calls fn(line_number, json) for every non-blank line.
template <class Fn>
void for_each_jsonl(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      Error err(Errc::kMalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
      err.line = line_no;
      throw err;
    }
    try {
      fn(line_no, j);
    } catch (const json::exception& e) {
      Error err(Errc::kMalformedRecord, "line " + std::to_string(line_no) + ": " + e.what());
      err.line = line_no;
      throw err;
    }
  }
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::vector<double> midranks(std::span<const double> pooled, double* tie_term) {
  const auto n = pooled.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return pooled[x] < pooled[y]; });
  std::vector<double> ranks(n);
  double ties = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    const double t = static_cast<double>(j - i + 1);
    ties += t * t * t - t;
    i = j + 1;
  }
  if (tie_term) *tie_term = ties;
  return ranks;
}

// Exact two-sided p under the permutation null, counting subsets by their
// doubled rank sum (midranks double to integers).
double exact_p(const std::vector<double>& ranks, std::size_t n_a, double u_obs) {
  const std::size_t n = ranks.size();
  std::vector<std::size_t> r2(n);
  std::size_t total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] = static_cast<std::size_t>(std::lround(ranks[i] * 2.0));
    total += r2[i];
  }
  std::vector<std::vector<double>> ways(n_a + 1, std::vector<double>(total + 1, 0.0));
  ways[0][0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = std::min(i + 1, n_a); j >= 1; --j) {
      for (std::size_t s = total; s >= r2[i]; --s) {
        ways[j][s] += ways[j - 1][s - r2[i]];
        if (s == r2[i]) break;
      }
    }
  }
  const auto n_b = n - n_a;
  const auto mean2 = static_cast<long long>(n_a * n_b);  // 2 * mu
  const auto offset = static_cast<long long>(n_a * (n_a + 1));
  const auto obs_dev = std::llabs(std::llround(2.0 * u_obs) - mean2);
  double hit = 0;
  double all = 0;
  for (std::size_t s = 0; s <= total; ++s) {
    if (ways[n_a][s] == 0.0) continue;
    all += ways[n_a][s];
    const long long two_u = static_cast<long long>(s) - offset;
    if (std::llabs(two_u - mean2) >= obs_dev) hit += ways[n_a][s];
  }
  return std::min(1.0, hit / all);
}

double pos_quantile(const std::vector<double>& sorted, double p) {
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

bool is_skilled(const SurveyResponse& s) { return s.self_skill > kSkilledAbove; }

}  // namespace

double rouge_l_recall(std::span<const std::string> suggestion_tokens,
                      std::span<const std::string> caption_tokens, RougeNormalization norm) {
  const auto denom =
      norm == RougeNormalization::kSuggestion ? suggestion_tokens.size() : caption_tokens.size();
  if (suggestion_tokens.empty() || denom == 0) {
    fail(Errc::kEmptySuggestion, "rouge-l needs a non-empty reference length");
  }
  return static_cast<double>(lcs_length(suggestion_tokens, caption_tokens)) /
         static_cast<double>(denom);
}

double rouge_l_recall(std::string_view suggestion, std::string_view caption,
                      RougeNormalization norm) {
  const auto s = canonical_tokens(suggestion);
  const auto c = canonical_tokens(caption);
  return rouge_l_recall(s, c, norm);
}

AcceptanceStats acceptance_stats(const SessionMap& sessions, std::string_view arm) {
  AcceptanceStats st;
  for (const auto& [id, s] : sessions) {
    if (s.arm != arm) continue;
    st.n_requests += s.request_count;
    st.n_accepted += s.accepted_count;
  }
  st.rate = ratio(st.n_accepted, st.n_requests);
  return st;
}

std::size_t unique_ngrams(std::string_view text, std::size_t n) {
  const std::string owned(text);
  return unique_ngrams(std::span<const std::string>(&owned, 1), n);
}

std::size_t unique_ngrams(std::span<const std::string> texts, std::size_t n) {
  if (n == 0) fail(Errc::kInvalidArgument, "n-gram order must be at least 1");
  std::set<std::vector<std::string>> seen;
  for (const auto& text : texts) {
    const auto tokens = canonical_tokens(text);
    if (tokens.size() < n) continue;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      seen.emplace(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
    }
  }
  return seen.size();
}

MwwResult mww_test(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) fail(Errc::kInvalidArgument, "both samples must be non-empty");
  MwwResult r;
  r.n_a = a.size();
  r.n_b = b.size();
  std::vector<double> pooled(a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  double tie_term = 0;
  const auto ranks = midranks(pooled, &tie_term);

  double rank_sum_a = 0;
  for (std::size_t i = 0; i < r.n_a; ++i) rank_sum_a += ranks[i];
  const double na = static_cast<double>(r.n_a);
  const double nb = static_cast<double>(r.n_b);
  const double n = na + nb;
  r.u = rank_sum_a - na * (na + 1) / 2.0;

  const double mu = na * nb / 2.0;
  const double var = na * nb / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
  if (var <= 0.0) {
    r.degenerate = true;
    r.z = 0.0;
    r.p_normal = 1.0;
    r.p_exact = 1.0;
    r.p_two_sided = 1.0;
    return r;
  }
  r.z = (std::fabs(r.u - mu) - 0.5) / std::sqrt(var);
  r.p_normal = std::clamp(std::erfc(r.z / std::sqrt(2.0)), 0.0, 1.0);
  r.p_two_sided = r.p_normal;
  if (r.n_a * r.n_b <= kExactMwwMaxProduct) {
    r.p_exact = exact_p(ranks, r.n_a, r.u);
    r.p_two_sided = *r.p_exact;
  }
  return r;
}

SurveyMap surveys_from_sessions(const SessionMap& sessions) {
  SurveyMap out;
  for (const auto& [id, s] : sessions) {
    if (s.survey) out.emplace(id, *s.survey);
  }
  return out;
}

SurveyMap parse_surveys(std::string_view jsonl) {
  SurveyMap out;
  for_each_jsonl(jsonl, [&](std::size_t line, const json& j) {
    SurveyResponse r{j.at("helpfulness").get<int>(), j.at("grammaticality").get<int>(),
                     j.at("satisfaction").get<int>(), j.at("self_skill").get<int>()};
    try {
      r.validate();
    } catch (Error& e) {
      e.line = line;
      throw;
    }
    out[j.at("session_id").get<std::string>()] = r;
  });
  return out;
}

SurveyMap read_surveys(const std::filesystem::path& path) { return parse_surveys(read_text(path)); }

SkillBreakdown skill_breakdown(const SessionMap& sessions, const SurveyMap& surveys) {
  struct Acc {
    std::vector<double> helpfulness;
    std::vector<double> requests;
    std::size_t n_requests = 0;
    std::size_t n_accepted = 0;
  } novice, skilled;
  for (const auto& [id, s] : sessions) {
    auto it = surveys.find(id);
    if (it == surveys.end()) fail(Errc::kMissingSurvey, "no survey for session " + id);
    Acc& g = is_skilled(it->second) ? skilled : novice;
    g.helpfulness.push_back(it->second.helpfulness);
    g.requests.push_back(static_cast<double>(s.request_count));
    g.n_requests += s.request_count;
    g.n_accepted += s.accepted_count;
  }
  auto finish = [](const Acc& g) {
    SkillGroup out;
    out.users = g.helpfulness.size();
    out.mean_helpfulness = mean_of(g.helpfulness);
    out.mean_requests = mean_of(g.requests);
    out.n_requests = g.n_requests;
    out.n_accepted = g.n_accepted;
    out.acceptance_rate = ratio(g.n_accepted, g.n_requests);
    return out;
  };
  SkillBreakdown br{finish(novice), finish(skilled), std::nullopt};
  if (!novice.helpfulness.empty() && !skilled.helpfulness.empty()) {
    br.helpfulness_test = mww_test(novice.helpfulness, skilled.helpfulness);
  }
  return br;
}

std::optional<Quartiles> quartiles(std::vector<double> values) {
  if (values.empty()) return std::nullopt;
  std::sort(values.begin(), values.end());
  Quartiles q;
  q.n = values.size();
  q.min = values.front();
  q.max = values.back();
  q.q1 = pos_quantile(values, 0.25);
  q.median = pos_quantile(values, 0.5);
  q.q3 = pos_quantile(values, 0.75);
  return q;
}

std::vector<RevisionSample> revision_samples(const SessionMap& sessions) {
  std::vector<RevisionSample> out;
  for (const auto& [id, s] : sessions) {
    for (const auto& r : s.rounds) {
      if (!r.decision) continue;
      RevisionSample smp;
      smp.session_id = id;
      smp.request_id = r.request_id;
      smp.accepted = r.decision->kind == DecisionKind::kAccept;
      const std::string draft = parse_markup(r.raw_draft).plain_text();
      const auto& decided = r.suggestions.at(smp.accepted ? r.decision->index : 0);
      const auto diff = extract_revision(draft, decided);
      smp.draft_chars = utf8_length(draft);
      smp.revision_chars = diff.chars_introduced;
      std::vector<std::string> parts;
      for (const auto& seg : diff.segments) {
        const auto t = trim(seg.target_text);
        if (!t.empty()) parts.emplace_back(t);
      }
      smp.revised_text = join(parts, " ");
      out.push_back(std::move(smp));
    }
  }
  return out;
}

LengthProfiles length_profiles(const SessionMap& sessions, const SurveyMap& surveys) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> raw;
  for (const auto& smp : revision_samples(sessions)) {
    std::vector<std::string> keys = {smp.accepted ? "accepted" : "rejected"};
    if (auto it = surveys.find(smp.session_id); it != surveys.end()) {
      keys.push_back(is_skilled(it->second) ? "skilled" : "novice");
    }
    for (const auto& k : keys) {
      raw[k].first.push_back(static_cast<double>(smp.draft_chars));
      raw[k].second.push_back(static_cast<double>(smp.revision_chars));
    }
  }
  LengthProfiles lp;
  for (const char* k : {"accepted", "rejected", "novice", "skilled"}) {
    LengthGroup g;
    if (auto it = raw.find(k); it != raw.end()) {
      g.n = it->second.first.size();
      g.draft_chars = quartiles(it->second.first);
      g.revision_chars = quartiles(it->second.second);
    }
    lp.groups[k] = g;
  }
  return lp;
}

VoteRecord vote_record_from_json(const json& j) {
  VoteRecord v;
  v.image_id = j.at("image_id").get<std::string>();
  v.caption_a_id = j.at("caption_a_id").get<std::string>();
  v.caption_b_id = j.at("caption_b_id").get<std::string>();
  v.votes = j.at("votes").get<std::vector<std::string>>();
  if (auto it = j.find("condition_a"); it != j.end()) v.condition_a = it->get<std::string>();
  if (auto it = j.find("condition_b"); it != j.end()) v.condition_b = it->get<std::string>();
  return v;
}

std::vector<VoteRecord> parse_votes(std::string_view jsonl) {
  std::vector<VoteRecord> out;
  for_each_jsonl(jsonl, [&](std::size_t line, const json& j) {
    out.push_back(vote_record_from_json(j));
    try {
      majority_winner(out.back());
    } catch (Error& e) {
      e.line = line;
      throw;
    }
  });
  return out;
}

std::vector<VoteRecord> read_votes(const std::filesystem::path& path) {
  return parse_votes(read_text(path));
}

char majority_winner(const VoteRecord& record) {
  if (record.votes.size() != 3) {
    fail(Errc::kMalformedRecord, "vote record for " + record.image_id + " has " +
                                     std::to_string(record.votes.size()) + " votes, expected 3");
  }
  int a = 0;
  for (const auto& v : record.votes) {
    if (v == "A") ++a;
    else if (v != "B") fail(Errc::kMalformedRecord, "vote must be A or B, got '" + v + "'");
  }
  return a >= 2 ? 'A' : 'B';
}

std::vector<VoteTally> majority_vote(std::span<const VoteRecord> records) {
  std::map<std::pair<std::string, std::string>, VoteTally> tallies;
  for (const auto& r : records) {
    const char w = majority_winner(r);
    auto& t = tallies[{r.condition_a, r.condition_b}];
    t.condition_a = r.condition_a;
    t.condition_b = r.condition_b;
    (w == 'A' ? t.a_wins : t.b_wins) += 1;
  }
  std::vector<VoteTally> out;
  for (auto& [k, t] : tallies) out.push_back(std::move(t));
  return out;
}

std::string_view to_string(SuggestionFlag f) {
  switch (f) {
    case SuggestionFlag::kVerbatimCopy: return "verbatim_copy";
    case SuggestionFlag::kOutOfRegionEdit: return "out_of_region_edit";
    case SuggestionFlag::kPossibleDrift: return "possible_drift";
  }
  return "";
}

std::set<SuggestionFlag> flag_suggestion(const DemarcatedDraft& draft, std::string_view suggestion,
                                         const StopWords& stop_words) {
  std::set<SuggestionFlag> flags;
  const auto& plain = draft.plain_text();
  if (suggestion == plain) {
    flags.insert(SuggestionFlag::kVerbatimCopy);
    return flags;
  }
  const auto diff = extract_revision(plain, suggestion);
  auto touches = [](const CharRange& r, std::size_t s, std::size_t e) {
    return r.begin <= e && r.end >= s;
  };
  // Insertions are anchored after the separating space, so a span reaches
  // across adjacent whitespace.
  auto widen = [&](const Demarcation& d) {
    std::size_t s = d.start;
    std::size_t e = d.end;
    while (s > 0 && is_space(plain[s - 1])) --s;
    while (e < plain.size() && is_space(plain[e])) ++e;
    return CharRange{s, e};
  };

  for (const auto& seg : diff.segments) {
    const bool inside = std::any_of(draft.spans().begin(), draft.spans().end(),
                                    [&](const Demarcation& d) {
                                      const auto w = widen(d);
                                      return touches(seg.source_range, w.begin, w.end);
                                    });
    if (!inside) {
      flags.insert(SuggestionFlag::kOutOfRegionEdit);
      break;
    }
  }

  for (const auto& d : draft.spans()) {
    if (d.kind != SpanKind::kRewrite) continue;
    const auto inner = stop_words.content_tokens(d.inner);
    if (inner.empty()) continue;
    // Grow [s, e) until it absorbs every segment it touches.
    const auto w = widen(d);
    std::size_t s = w.begin;
    std::size_t e = w.end;
    std::vector<bool> used(diff.segments.size(), false);
    for (bool grew = true; grew;) {
      grew = false;
      for (std::size_t i = 0; i < diff.segments.size(); ++i) {
        const auto& src = diff.segments[i].source_range;
        if (used[i] || !touches(src, s, e)) continue;
        used[i] = true;
        s = std::min(s, src.begin);
        e = std::max(e, src.end);
        grew = true;
      }
    }
    const auto first = std::find(used.begin(), used.end(), true);
    if (first == used.end()) continue;
    const auto last = std::find(used.rbegin(), used.rend(), true);
    const auto& fs = diff.segments[static_cast<std::size_t>(first - used.begin())];
    const auto& ls = diff.segments[static_cast<std::size_t>(used.rend() - last - 1)];
    const std::size_t t1 = fs.target_range.begin - (fs.source_range.begin - s);
    const std::size_t t2 = ls.target_range.end + (e - ls.source_range.end);
    const auto replacement = stop_words.content_tokens(suggestion.substr(t1, t2 - t1));
    const bool shared = std::any_of(replacement.begin(), replacement.end(), [&](const auto& t) {
      return std::find(inner.begin(), inner.end(), t) != inner.end();
    });
    if (!shared) flags.insert(SuggestionFlag::kPossibleDrift);
  }
  return flags;
}

MetricsReport build_report(const ReportInputs& in) {
  MetricsReport rep;
  rep.rouge = in.rouge;
  rep.users = in.sessions.size();
  for (const auto& [id, s] : in.sessions) rep.session_ids.push_back(id);

  SurveyMap surveys = surveys_from_sessions(in.sessions);
  for (const auto& [id, s] : in.surveys) surveys[id] = s;

  std::map<std::string, std::vector<const Session*>> by_arm;
  for (const auto& [id, s] : in.sessions) by_arm[s.arm].push_back(&s);

  for (const auto& [arm, list] : by_arm) {
    ArmMetrics m;
    m.arm = arm;
    m.sessions = list.size();
    m.acceptance = acceptance_stats(in.sessions, arm);
    std::vector<double> help, gram, sat, rouge;
    std::vector<std::string> captions;
    for (const Session* s : list) {
      if (s->state == SessionState::kSubmitted) ++m.submitted;
      if (auto it = surveys.find(s->session_id); it != surveys.end()) {
        help.push_back(it->second.helpfulness);
        gram.push_back(it->second.grammaticality);
        sat.push_back(it->second.satisfaction);
      }
      if (s->state == SessionState::kSubmitted && s->final_caption) {
        captions.push_back(*s->final_caption);
      }
      for (const auto& r : s->rounds) {
        const auto draft = parse_markup(r.raw_draft);
        for (const auto& sug : r.suggestions) {
          ++m.suggestions_shown;
          for (auto f : flag_suggestion(draft, sug)) ++m.flags[std::string(to_string(f))];
        }
        if (s->final_caption && r.decision && r.decision->kind == DecisionKind::kAccept) {
          const auto st = canonical_tokens(r.suggestions.at(r.decision->index));
          const auto ct = canonical_tokens(*s->final_caption);
          const bool usable = in.rouge == RougeNormalization::kSuggestion ? !st.empty()
                                                                          : (!st.empty() && !ct.empty());
          if (usable) rouge.push_back(rouge_l_recall(st, ct, in.rouge));
        }
      }
    }
    for (const char* f : {"verbatim_copy", "out_of_region_edit", "possible_drift"}) {
      m.flags.emplace(f, 0);
    }
    m.mean_helpfulness = mean_of(help);
    m.mean_grammaticality = mean_of(gram);
    m.mean_satisfaction = mean_of(sat);
    m.mean_rouge_l = mean_of(rouge);
    m.rouge_samples = rouge.size();
    m.caption_unique_trigrams = unique_ngrams(captions, 3);
    rep.arms.push_back(std::move(m));
  }

  for (auto i = by_arm.begin(); i != by_arm.end(); ++i) {
    for (auto j = std::next(i); j != by_arm.end(); ++j) {
      for (const char* q : {"helpfulness", "grammaticality", "satisfaction"}) {
        auto values = [&](const std::vector<const Session*>& list) {
          std::vector<double> v;
          for (const Session* s : list) {
            auto it = surveys.find(s->session_id);
            if (it == surveys.end()) continue;
            const auto& r = it->second;
            v.push_back(std::string_view(q) == "helpfulness"      ? r.helpfulness
                        : std::string_view(q) == "grammaticality" ? r.grammaticality
                                                                  : r.satisfaction);
          }
          return v;
        };
        const auto a = values(i->second);
        const auto b = values(j->second);
        if (a.empty() || b.empty()) continue;
        rep.pairwise.push_back({i->first, j->first, q, mww_test(a, b)});
      }
    }
  }

  for (const auto& [id, s] : in.sessions) {
    if (!surveys.count(id)) rep.missing_surveys.push_back(id);
  }
  if (!in.sessions.empty() && rep.missing_surveys.empty()) {
    rep.skill = skill_breakdown(in.sessions, surveys);
  }
  rep.lengths = length_profiles(in.sessions, surveys);
  rep.votes = majority_vote(in.votes);
  for (const auto& [name, caps] : in.caption_sets) {
    rep.caption_set_trigrams[name] = unique_ngrams(caps, 3);
  }
  return rep;
}

namespace {

json quartiles_json(const std::optional<Quartiles>& q) {
  if (!q) return nullptr;
  return {{"n", q->n}, {"min", q->min}, {"q1", q->q1},
          {"median", q->median}, {"q3", q->q3}, {"max", q->max}};
}

json mww_json(const MwwResult& r) {
  return {{"U", r.u},
          {"z", r.z},
          {"p_normal", r.p_normal},
          {"p_exact", opt(r.p_exact)},
          {"p_two_sided", r.p_two_sided},
          {"significant_at_0.05", r.significant()},
          {"degenerate", r.degenerate},
          {"n_a", r.n_a},
          {"n_b", r.n_b}};
}

json group_json(const SkillGroup& g) {
  return {{"users", g.users},
          {"mean_helpfulness", opt(g.mean_helpfulness)},
          {"mean_requests", opt(g.mean_requests)},
          {"n_requests", g.n_requests},
          {"n_accepted", g.n_accepted},
          {"acceptance_rate", opt(g.acceptance_rate)}};
}

std::string fmt(const std::optional<double>& v, const char* spec = "%.2f") {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, *v);
  return buf;
}

std::string pct(const std::optional<double>& v) {
  return v ? fmt(*v * 100.0, "%.1f") : "-";
}

}  // namespace

json MetricsReport::to_json() const {
  json j;
  j["users"] = users;
  j["session_ids"] = session_ids;
  j["rouge_normalization"] = rouge == RougeNormalization::kSuggestion ? "suggestion" : "caption";
  json arms_j = json::object();
  for (const auto& m : arms) {
    arms_j[m.arm] = {{"sessions", m.sessions},
                     {"submitted", m.submitted},
                     {"mean_helpfulness", opt(m.mean_helpfulness)},
                     {"mean_grammaticality", opt(m.mean_grammaticality)},
                     {"mean_satisfaction", opt(m.mean_satisfaction)},
                     {"n_requests", m.acceptance.n_requests},
                     {"n_accepted", m.acceptance.n_accepted},
                     {"acceptance_rate", opt(m.acceptance.rate)},
                     {"mean_rouge_l_recall", opt(m.mean_rouge_l)},
                     {"rouge_samples", m.rouge_samples},
                     {"caption_unique_trigrams", m.caption_unique_trigrams},
                     {"suggestions_shown", m.suggestions_shown},
                     {"flags", m.flags}};
  }
  j["arms"] = std::move(arms_j);
  json pw = json::array();
  for (const auto& p : pairwise) {
    pw.push_back({{"arm_a", p.arm_a}, {"arm_b", p.arm_b}, {"question", p.question},
                  {"test", mww_json(p.result)}});
  }
  j["pairwise"] = std::move(pw);
  if (skill) {
    j["skill"] = {{"novice", group_json(skill->novice)},
                  {"skilled", group_json(skill->skilled)},
                  {"helpfulness_test",
                   skill->helpfulness_test ? mww_json(*skill->helpfulness_test) : json(nullptr)}};
  } else {
    j["skill"] = nullptr;
  }
  j["missing_surveys"] = missing_surveys;
  json lp = json::object();
  for (const auto& [name, g] : lengths.groups) {
    lp[name] = {{"n", g.n},
                {"draft_chars", quartiles_json(g.draft_chars)},
                {"revision_chars", quartiles_json(g.revision_chars)}};
  }
  j["length_profiles"] = std::move(lp);
  json votes_j = json::array();
  for (const auto& t : votes) {
    votes_j.push_back({{"condition_a", t.condition_a},
                       {"condition_b", t.condition_b},
                       {"a_wins", t.a_wins},
                       {"b_wins", t.b_wins},
                       {"total", t.a_wins + t.b_wins}});
  }
  j["votes"] = std::move(votes_j);
  j["caption_set_trigrams"] = caption_set_trigrams;
  return j;
}

std::string MetricsReport::to_text() const {
  std::string out;
  char line[256];
  out += "Per-arm metrics (" + std::to_string(users) + " users)\n";
  std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %9s %9s %8s %8s\n", "arm", "help",
                "gram", "satis", "#request", "#accept", "%accept", "rouge-l");
  out += line;
  for (const auto& m : arms) {
    std::snprintf(line, sizeof line, "%-16s %8s %8s %8s %9zu %9zu %8s %8s\n", m.arm.c_str(),
                  fmt(m.mean_helpfulness).c_str(), fmt(m.mean_grammaticality).c_str(),
                  fmt(m.mean_satisfaction).c_str(), m.acceptance.n_requests,
                  m.acceptance.n_accepted, pct(m.acceptance.rate).c_str(),
                  fmt(m.mean_rouge_l, "%.3f").c_str());
    out += line;
  }
  if (!pairwise.empty()) {
    out += "\nMann-Whitney-Wilcoxon\n";
    for (const auto& p : pairwise) {
      std::snprintf(line, sizeof line, "%-16s %s vs %s: U=%.1f p=%.4f%s\n", p.question.c_str(),
                    p.arm_a.c_str(), p.arm_b.c_str(), p.result.u, p.result.p_two_sided,
                    p.result.significant() ? " *" : "");
      out += line;
    }
  }
  if (skill) {
    out += "\nSkill breakdown\n";
    std::snprintf(line, sizeof line, "%-10s %6s %8s %9s %8s\n", "group", "users", "help",
                  "#request", "%accept");
    out += line;
    for (const auto& [name, g] :
         {std::pair<const char*, const SkillGroup&>{"novice", skill->novice},
          std::pair<const char*, const SkillGroup&>{"skilled", skill->skilled}}) {
      std::snprintf(line, sizeof line, "%-10s %6zu %8s %9s %8s\n", name, g.users,
                    fmt(g.mean_helpfulness).c_str(), fmt(g.mean_requests).c_str(),
                    pct(g.acceptance_rate).c_str());
      out += line;
    }
  } else if (!missing_surveys.empty()) {
    out += "\nSkill breakdown unavailable: " + std::to_string(missing_surveys.size()) +
           " session(s) without a survey\n";
  }
  out += "\nLength profiles (chars: min/q1/median/q3/max)\n";
  for (const auto& [name, g] : lengths.groups) {
    auto q = [](const std::optional<Quartiles>& v) {
      if (!v) return std::string("-");
      char b[128];
      std::snprintf(b, sizeof b, "%g/%g/%g/%g/%g", v->min, v->q1, v->median, v->q3, v->max);
      return std::string(b);
    };
    std::snprintf(line, sizeof line, "%-10s n=%-5zu draft %s  revision %s\n", name.c_str(), g.n,
                  q(g.draft_chars).c_str(), q(g.revision_chars).c_str());
    out += line;
  }
  if (!votes.empty()) {
    out += "\nPairwise votes (majority of 3)\n";
    for (const auto& t : votes) {
      std::snprintf(line, sizeof line, "%s vs %s: %zu / %zu\n", t.condition_a.c_str(),
                    t.condition_b.c_str(), t.a_wins, t.b_wins);
      out += line;
    }
  }
  if (!caption_set_trigrams.empty()) {
    out += "\nUnique trigrams per caption set\n";
    for (const auto& [name, n] : caption_set_trigrams) {
      std::snprintf(line, sizeof line, "%-16s %zu\n", name.c_str(), n);
      out += line;
    }
  }
  return out;
}

std::map<std::string, std::vector<std::string>> parse_caption_sets(std::string_view jsonl) {
  std::map<std::string, std::vector<std::string>> out;
  for_each_jsonl(jsonl, [&](std::size_t, const json& j) {
    out[j.at("set").get<std::string>()].push_back(j.at("caption").get<std::string>());
  });
  return out;
}

}  // namespace milrw
