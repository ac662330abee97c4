#include "isolex/lexicon.hpp"

#include <algorithm>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "isolex/csv.hpp"
#include "isolex/rng.hpp"
#include "isolex/util.hpp"
#include "json.hpp"

namespace isolex {

Lexicon::Lexicon(std::string name, std::string version, const std::map<TopicId, std::vector<std::string>>& patterns)
    : name_(std::move(name)), version_(std::move(version)) {
  if (patterns.empty()) throw LexiconError("lexicon has no topics");
  for (const auto& [topic, sources] : patterns) {
    if (sources.empty()) throw LexiconError("lexicon topic " + std::string(to_string(topic)) + " has no patterns");
    auto& compiled = patterns_[topic];
    for (std::size_t i = 0; i < sources.size(); ++i) {
      try {
        compiled.push_back({sources[i], std::regex(sources[i], std::regex::ECMAScript | std::regex::icase)});
      } catch (const std::regex_error& e) {
        throw LexiconError("invalid regex for topic " + std::string(to_string(topic)) + " pattern " +
                           std::to_string(i) + " (\"" + sources[i] + "\"): " + e.what());
      }
    }
  }
}

std::map<TopicId, std::vector<std::string>> Lexicon::sources() const {
  std::map<TopicId, std::vector<std::string>> out;
  for (const auto& [topic, list] : patterns_)
    for (const auto& p : list) out[topic].push_back(p.source);
  return out;
}

Lexicon parse_lexicon(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LexiconError(std::string("lexicon is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw LexiconError("lexicon must be a JSON object");
  std::string name = doc.value("name", std::string("unnamed"));
  std::string version = doc.value("version", std::string("0"));
  std::map<TopicId, std::vector<std::string>> patterns;
  for (const auto& [key, value] : doc.items()) {
    if (key == "name" || key == "version") continue;
    auto topic = parse_enum<TopicId>(key);
    if (!topic) throw LexiconError("unknown lexicon topic: " + key);
    if (!value.is_array()) throw LexiconError("patterns for " + key + " must be an array");
    auto& list = patterns[*topic];
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (!value[i].is_string())
        throw LexiconError("pattern " + std::to_string(i) + " of " + key + " must be a string");
      list.push_back(value[i].get<std::string>());
    }
  }
  return Lexicon(std::move(name), std::move(version), patterns);
}

Lexicon compile_lexicon(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw LexiconError(e.what());
  }
  return parse_lexicon(text);
}

namespace {

bool continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

Span widen_to_utf8(std::string_view text, Span s) {
  while (s.start > 0 && continuation(static_cast<unsigned char>(text[s.start]))) --s.start;
  while (s.end < text.size() && continuation(static_cast<unsigned char>(text[s.end]))) ++s.end;
  return s;
}

bool record_less(const MatchRecord& a, const MatchRecord& b) {
  return std::tie(a.decedent_id, a.field, a.span.start, a.span.end, a.topic, a.pattern_index) <
         std::tie(b.decedent_id, b.field, b.span.start, b.span.end, b.topic, b.pattern_index);
}

void finalize(MatchSet& set) {
  std::sort(set.records.begin(), set.records.end(), record_less);
  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < set.decedent_ids.size(); ++i) position.emplace(set.decedent_ids[i], i);

  set.flagged.clear();
  std::vector<char> any(set.decedent_ids.size(), 0);
  std::size_t fields = 0;
  const MatchRecord* prev = nullptr;
  for (const auto& m : set.records) {
    auto it = position.find(m.decedent_id);
    if (it == position.end()) throw LexiconError("match for unknown decedent " + m.decedent_id);
    auto& list = set.flagged[m.topic];
    if (list.empty() || list.back() != it->second) list.push_back(it->second);
    any[it->second] = 1;
    if (!prev || prev->decedent_id != m.decedent_id || prev->field != m.field) ++fields;
    prev = &m;
  }
  // Records are ordered by id, which need not follow corpus order.
  for (auto& [topic, list] : set.flagged) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  set.decedents_with_any_match = static_cast<std::size_t>(std::count(any.begin(), any.end(), 1));
  set.fields_with_any_match = fields;
}

std::size_t count_scanned_fields(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& r : corpus) {
    if (r.narratives.le_narrative && !r.narratives.le_narrative->empty()) ++n;
    if (r.narratives.cme_narrative && !r.narratives.cme_narrative->empty()) ++n;
  }
  return n;
}

}  // namespace

std::vector<MatchRecord> match_text(const Lexicon& lexicon, std::string_view text, const std::string& decedent_id,
                                    NarrativeField field) {
  std::vector<MatchRecord> out;
  if (text.empty()) return out;
  const char* begin = text.data();
  const char* end = begin + text.size();
  for (const auto& [topic, patterns] : lexicon.patterns()) {
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      for (std::cregex_iterator it(begin, end, patterns[i].regex), last; it != last; ++it) {
        const auto& m = *it;
        if (m.length(0) == 0) continue;
        Span span{static_cast<std::size_t>(m.position(0)), static_cast<std::size_t>(m.position(0) + m.length(0))};
        span = widen_to_utf8(text, span);
        out.push_back({decedent_id, topic, field, i, span, std::string(text.substr(span.start, span.end - span.start))});
      }
    }
  }
  return out;
}

std::size_t MatchSet::flagged_count(TopicId topic) const {
  auto it = flagged.find(topic);
  return it == flagged.end() ? 0 : it->second.size();
}

bool MatchSet::is_flagged(TopicId topic, std::size_t position) const {
  auto it = flagged.find(topic);
  return it != flagged.end() && std::binary_search(it->second.begin(), it->second.end(), position);
}

MatchSet match_corpus(const Corpus& corpus, const Lexicon& lexicon, unsigned workers) {
  MatchSet set;
  set.total_decedents = corpus.size();
  set.decedent_ids.reserve(corpus.size());
  for (const auto& r : corpus) set.decedent_ids.push_back(r.id);
  set.fields_scanned = count_scanned_fields(corpus);

  auto scan = [&](std::size_t lo, std::size_t hi, std::vector<MatchRecord>& out) {
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& r = corpus[i];
      if (r.narratives.le_narrative) {
        auto hits = match_text(lexicon, *r.narratives.le_narrative, r.id, NarrativeField::LeNarrative);
        out.insert(out.end(), std::make_move_iterator(hits.begin()), std::make_move_iterator(hits.end()));
      }
      if (r.narratives.cme_narrative) {
        auto hits = match_text(lexicon, *r.narratives.cme_narrative, r.id, NarrativeField::CmeNarrative);
        out.insert(out.end(), std::make_move_iterator(hits.begin()), std::make_move_iterator(hits.end()));
      }
    }
  };

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, corpus.size()))));
  if (workers == 1) {
    scan(0, corpus.size(), set.records);
  } else {
    std::vector<std::vector<MatchRecord>> parts(workers);
    std::vector<std::thread> threads;
    const std::size_t chunk = (corpus.size() + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t lo = std::min(corpus.size(), w * chunk);
      const std::size_t hi = std::min(corpus.size(), lo + chunk);
      threads.emplace_back(scan, lo, hi, std::ref(parts[w]));
    }
    for (auto& t : threads) t.join();
    for (auto& p : parts)
      set.records.insert(set.records.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  finalize(set);
  return set;
}

std::vector<MatchRateRow> match_rate_table(const MatchSet& matches, std::size_t total_decedents) {
  if (total_decedents == 0) throw LexiconError("match rate table needs a positive total");
  std::vector<MatchRateRow> rows;
  for (TopicId t : kAllTopics) {
    const std::size_t count = matches.flagged_count(t);
    if (count > total_decedents) throw LexiconError("match count exceeds total decedents");
    rows.push_back({t, count, 100.0 * static_cast<double>(count) / static_cast<double>(total_decedents)});
  }
  return rows;
}

std::string format_match_percent(double percent) { return format_fixed(percent, 2); }

std::string match_set_csv(const MatchSet& matches) {
  std::ostringstream out;
  out << "decedent_id,topic,field,pattern_index,span_start,span_end,matched_text\n";
  for (const auto& m : matches.records) {
    csv::write_row(out, {m.decedent_id, std::string(to_string(m.topic)), std::string(to_string(m.field)),
                         std::to_string(m.pattern_index), std::to_string(m.span.start), std::to_string(m.span.end),
                         m.matched_text});
  }
  return out.str();
}

MatchSet match_set_from_csv(std::string_view csv_text, const Corpus& corpus) {
  const auto rows = csv::parse(csv_text);
  if (rows.empty() || rows[0].size() != 7 || rows[0][0] != "decedent_id")
    throw LexiconError("match CSV has an unexpected header");
  MatchSet set;
  set.total_decedents = corpus.size();
  for (const auto& r : corpus) set.decedent_ids.push_back(r.id);
  set.fields_scanned = count_scanned_fields(corpus);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 7) throw LexiconError("match CSV row " + std::to_string(i) + " has wrong arity");
    auto field = parse_enum<NarrativeField>(row[2]);
    if (!field) throw LexiconError("match CSV row " + std::to_string(i) + ": bad field " + row[2]);
    set.records.push_back({row[0], parse_topic(row[1]), *field, std::stoul(row[3]),
                           Span{std::stoul(row[4]), std::stoul(row[5])}, row[6]});
  }
  finalize(set);
  return set;
}

AnnotationBatch sample_for_annotation(const MatchSet& matches, const Corpus& corpus, TopicId topic, int n,
                                      std::uint64_t seed) {
  if (n <= 0) throw LexiconError("annotation sample size must be positive");
  AnnotationBatch batch;
  batch.topic = topic;
  batch.sample_seed = seed;

  std::vector<std::size_t> pool;
  if (auto it = matches.flagged.find(topic); it != matches.flagged.end()) pool = it->second;
  const std::size_t want = static_cast<std::size_t>(n);
  batch.short_of_requested = pool.size() < want;
  const std::size_t take = std::min(want, pool.size());

  // Partial Fisher-Yates over the ascending flagged positions.
  Rng rng(seed);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(take);

  std::unordered_map<std::string, std::vector<const MatchRecord*>> by_id;
  for (const auto& m : matches.records)
    if (m.topic == topic) by_id[m.decedent_id].push_back(&m);

  for (std::size_t pos : pool) {
    const auto& record = corpus.at(pos);
    AnnotationItem item;
    item.decedent_id = record.id;
    item.text = narrative_text(record);
    const std::size_t cme = cme_offset(record);
    for (const auto* m : by_id[record.id]) {
      const std::size_t shift = m->field == NarrativeField::CmeNarrative ? cme : 0;
      item.spans.push_back({m->span.start + shift, m->span.end + shift});
    }
    std::sort(item.spans.begin(), item.spans.end());
    item.spans.erase(std::unique(item.spans.begin(), item.spans.end()), item.spans.end());
    batch.items.push_back(std::move(item));
  }
  batch.size = batch.items.size();
  return batch;
}

}  // namespace isolex
