// Copyright 2026 The cob Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Evaluation metrics: edit distance, ANLS, key-box F1 and field-level F1
// with type-aware matching, plus the file-level driver that produces
// reports.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cob/error.hpp"
#include "cob/jsonl.hpp"
#include "cob/text.hpp"
#include "json.hpp"

namespace cob::eval {

// --- edit distance ----------------------------------------------------------

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({up + 1, row[j - 1] + 1, sub});
      diag = up;
    }
  }
  return row[b.size()];
}

// Distance over Unicode scalar values of two UTF-8 strings.
inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(std::u32string_view(text::decode_utf8(a)),
                     std::u32string_view(text::decode_utf8(b)));
}

// --- ANLS -------------------------------------------------------------------

struct AnlsOptions {
  double tau = 0.5;
  bool case_insensitive = true;
};

inline double normalized_levenshtein(std::string_view pred, std::string_view gold,
                                     bool case_insensitive = true) {
  std::string p(text::trim(pred));
  std::string g(text::trim(gold));
  if (case_insensitive) {
    p = text::lower(p);
    g = text::lower(g);
  }
  const auto up = text::decode_utf8(p);
  const auto ug = text::decode_utf8(g);
  const std::size_t denom = std::max(up.size(), ug.size());
  if (denom == 0) return 0.0;
  return static_cast<double>(levenshtein(up, ug)) / static_cast<double>(denom);
}

// Best per-gold similarity; a gold contributes 1 - NL when NL < tau and 0
// otherwise.
inline double anls(std::string_view pred, const std::vector<std::string>& golds,
                   const AnlsOptions& opt = {}) {
  if (golds.empty()) throw ParameterError("anls needs at least one gold answer");
  double best = 0.0;
  for (const auto& g : golds) {
    const double nl = normalized_levenshtein(pred, g, opt.case_insensitive);
    if (nl < opt.tau) best = std::max(best, 1.0 - nl);
  }
  return best;
}

// --- counts and F1 ----------------------------------------------------------

struct Counts {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  Counts& operator+=(const Counts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  friend bool operator==(const Counts&, const Counts&) = default;
};

// 2TP / (2TP + FP + FN). With nothing predicted and nothing expected the
// score is 1.
inline double f1(const Counts& c) {
  const std::int64_t denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 1.0;
  return static_cast<double>(2 * c.tp) / static_cast<double>(denom);
}

inline Counts keybox_counts(const std::set<int>& predicted, const std::set<int>& gold_helpful) {
  Counts c;
  for (int id : predicted) {
    if (gold_helpful.count(id)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (int id : gold_helpful) {
    if (!predicted.count(id)) ++c.fn;
  }
  return c;
}

inline double micro_f1(const std::vector<Counts>& per_sample) {
  Counts total;
  for (const auto& c : per_sample) total += c;
  return f1(total);
}

// --- typed fields -----------------------------------------------------------

enum class FieldType { kString, kNumeric, kPrice, kDate };

inline const char* field_type_name(FieldType t) {
  switch (t) {
    case FieldType::kString: return "string";
    case FieldType::kNumeric: return "numeric";
    case FieldType::kPrice: return "price";
    case FieldType::kDate: break;
  }
  return "date";
}

inline FieldType parse_field_type(std::string_view s) {
  if (s == "string") return FieldType::kString;
  if (s == "numeric" || s == "number") return FieldType::kNumeric;
  if (s == "price" || s == "currency") return FieldType::kPrice;
  if (s == "date") return FieldType::kDate;
  throw ConfigError("unknown field type '" + std::string(s) + "'");
}

struct TypedField {
  std::string field_name;
  std::string value;
  FieldType value_type = FieldType::kString;
};

class FieldTable {
 public:
  FieldTable() = default;
  explicit FieldTable(std::map<std::string, FieldType> types) : types_(std::move(types)) {}

  static FieldTable from_json(const nlohmann::json& j) {
    std::map<std::string, FieldType> types;
    if (!j.is_object()) throw ConfigError("field table must map field names to types");
    for (const auto& [k, v] : j.items()) types[k] = parse_field_type(v.get<std::string>());
    return FieldTable(std::move(types));
  }

  FieldType type_of(const std::string& field) const {
    const auto it = types_.find(field);
    if (it == types_.end()) throw FieldTableError(field);
    return it->second;
  }

  TypedField make(const std::string& field, std::string value) const {
    return {field, std::move(value), type_of(field)};
  }

  bool empty() const { return types_.empty(); }

 private:
  std::map<std::string, FieldType> types_;
};

enum class DateOrder { kMonthFirst, kDayFirst };

inline DateOrder parse_date_order(std::string_view s) {
  if (s == "mdy" || s == "month_first" || s == "us") return DateOrder::kMonthFirst;
  if (s == "dmy" || s == "day_first") return DateOrder::kDayFirst;
  throw ConfigError("unknown date order '" + std::string(s) + "' (expected mdy or dmy)");
}

namespace detail {

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline void strip_prefix_bytes(std::string& s, std::string_view p) {
  while (s.size() >= p.size() && s.compare(0, p.size(), p) == 0) s.erase(0, p.size());
}

}  // namespace detail

// Parses numbers written with currency symbols or codes and thousands
// separators: "$1,200.00", "RM 12.50", "1200 USD", "-3.5".
inline std::optional<double> parse_amount(std::string_view raw) {
  std::string s(text::trim(raw));
  // Currency symbols in UTF-8 and ASCII.
  for (std::string_view sym : {"$", "\xE2\x82\xAC", "\xC2\xA3", "\xC2\xA5"}) {
    std::string out;
    std::size_t pos = 0;
    while (true) {
      const auto at = s.find(sym, pos);
      out.append(s, pos, at == std::string::npos ? std::string::npos : at - pos);
      if (at == std::string::npos) break;
      pos = at + sym.size();
    }
    s = out;
  }
  s = std::string(text::trim(s));
  // Alphabetic currency codes at either end ("USD", "RM").
  std::size_t b = 0;
  while (b < s.size() && ((s[b] >= 'A' && s[b] <= 'Z') || (s[b] >= 'a' && s[b] <= 'z'))) ++b;
  if (b > 3) return std::nullopt;
  std::size_t e = s.size();
  while (e > b && ((s[e - 1] >= 'A' && s[e - 1] <= 'Z') || (s[e - 1] >= 'a' && s[e - 1] <= 'z'))) {
    --e;
  }
  if (s.size() - e > 3) return std::nullopt;
  s = std::string(text::trim(std::string_view(s).substr(b, e - b)));
  std::string digits;
  for (char c : s) {
    if (c == ',' || c == ' ') continue;
    digits.push_back(c);
  }
  std::size_t i = 0;
  if (i < digits.size() && (digits[i] == '+' || digits[i] == '-')) ++i;
  bool seen_digit = false;
  bool seen_dot = false;
  for (std::size_t k = i; k < digits.size(); ++k) {
    if (digits[k] >= '0' && digits[k] <= '9') {
      seen_digit = true;
    } else if (digits[k] == '.' && !seen_dot) {
      seen_dot = true;
    } else {
      return std::nullopt;
    }
  }
  if (!seen_digit) return std::nullopt;
  return std::stod(digits);
}

inline bool amounts_equal(double a, double b) {
  const double scale = std::max(std::fabs(a), std::fabs(b));
  return std::fabs(a - b) <= 1e-6 * scale;
}

inline std::optional<unsigned> month_from_name(std::string_view name) {
  static constexpr std::string_view kMonths[] = {"january", "february", "march",     "april",
                                                 "may",     "june",     "july",      "august",
                                                 "september", "october", "november", "december"};
  std::string n = text::lower(name);
  if (!n.empty() && n.back() == '.') n.pop_back();
  if (n.size() < 3) return std::nullopt;
  for (unsigned m = 0; m < 12; ++m) {
    if (n == kMonths[m] || n == kMonths[m].substr(0, 3) || (m == 8 && n == "sept")) return m + 1;
  }
  return std::nullopt;
}

// Accepts YYYY-MM-DD, NN/NN/YYYY (month or day first per `order`),
// "Month D, YYYY" and "D Month YYYY"; month names may be abbreviated.
inline std::optional<std::chrono::year_month_day> parse_date(std::string_view raw,
                                                             DateOrder order = DateOrder::kMonthFirst) {
  using namespace std::chrono;
  const std::string s(text::trim(raw));
  auto make = [](int y, unsigned m, unsigned d) -> std::optional<year_month_day> {
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) return std::nullopt;
    return ymd;
  };
  auto to_u = [](std::string_view v) { return static_cast<unsigned>(std::stoul(std::string(v))); };

  if (s.size() == 10 && s[4] == '-' && s[7] == '-') {
    const std::string_view v(s);
    if (detail::all_digits(v.substr(0, 4)) && detail::all_digits(v.substr(5, 2)) &&
        detail::all_digits(v.substr(8, 2))) {
      return make(static_cast<int>(to_u(v.substr(0, 4))), to_u(v.substr(5, 2)), to_u(v.substr(8, 2)));
    }
    return std::nullopt;
  }
  if (const auto s1 = s.find('/'); s1 != std::string::npos) {
    const auto s2 = s.find('/', s1 + 1);
    if (s2 == std::string::npos) return std::nullopt;
    const std::string_view v(s);
    const auto a = v.substr(0, s1);
    const auto b = v.substr(s1 + 1, s2 - s1 - 1);
    const auto y = v.substr(s2 + 1);
    if (!detail::all_digits(a) || !detail::all_digits(b) || y.size() != 4 ||
        !detail::all_digits(y) || a.size() > 2 || b.size() > 2) {
      return std::nullopt;
    }
    const unsigned first = to_u(a);
    const unsigned second = to_u(b);
    return order == DateOrder::kMonthFirst ? make(static_cast<int>(to_u(y)), first, second)
                                           : make(static_cast<int>(to_u(y)), second, first);
  }
  // Word forms: strip commas, then expect three tokens.
  std::string flat;
  for (char c : s) flat.push_back(c == ',' ? ' ' : c);
  const auto tok = text::split_whitespace(flat);
  if (tok.size() != 3 || !detail::all_digits(tok[2]) || tok[2].size() != 4) return std::nullopt;
  const int y = static_cast<int>(to_u(tok[2]));
  auto day_of = [](std::string t) -> std::optional<unsigned> {
    // Allow ordinal suffixes such as "5th".
    for (std::string_view suf : {"st", "nd", "rd", "th"}) {
      if (t.size() > suf.size() && text::lower(t.substr(t.size() - suf.size())) == suf) {
        t.resize(t.size() - suf.size());
        break;
      }
    }
    if (!detail::all_digits(t) || t.size() > 2) return std::nullopt;
    return static_cast<unsigned>(std::stoul(t));
  };
  if (const auto m = month_from_name(tok[0])) {
    if (const auto d = day_of(tok[1])) return make(y, *m, *d);
    return std::nullopt;
  }
  if (const auto m = month_from_name(tok[1])) {
    if (const auto d = day_of(tok[0])) return make(y, *m, *d);
  }
  return std::nullopt;
}

inline bool string_match(std::string_view a, std::string_view b) {
  return text::normalize(a) == text::normalize(b);
}

struct MatchOptions {
  DateOrder date_order = DateOrder::kMonthFirst;
};

// Type-aware comparison. Values that do not parse under their declared
// type are compared with the string rule, which also accepts any pair the
// typed rule rejects but that normalizes identically.
inline bool typed_match(const TypedField& pred, const TypedField& gold, const MatchOptions& opt = {}) {
  if (pred.field_name != gold.field_name) {
    throw ParameterError("typed_match on different fields ('" + pred.field_name + "' vs '" +
                         gold.field_name + "')");
  }
  if (string_match(pred.value, gold.value)) return true;
  switch (gold.value_type) {
    case FieldType::kNumeric:
    case FieldType::kPrice: {
      const auto a = parse_amount(pred.value);
      const auto b = parse_amount(gold.value);
      return a && b && amounts_equal(*a, *b);
    }
    case FieldType::kDate: {
      const auto a = parse_date(pred.value, opt.date_order);
      const auto b = parse_date(gold.value, opt.date_order);
      return a && b && *a == *b;
    }
    case FieldType::kString: break;
  }
  return false;
}

// Strict variant used for exact field F1.
inline bool exact_match(const TypedField& pred, const TypedField& gold) {
  return pred.field_name == gold.field_name && string_match(pred.value, gold.value);
}

namespace detail {

inline bool augment(std::size_t g, const std::vector<std::vector<std::size_t>>& adj,
                    std::vector<char>& seen, std::vector<long>& pred_owner) {
  for (std::size_t p : adj[g]) {
    if (seen[p]) continue;
    seen[p] = 1;
    if (pred_owner[p] < 0 ||
        augment(static_cast<std::size_t>(pred_owner[p]), adj, seen, pred_owner)) {
      pred_owner[p] = static_cast<long>(g);
      return true;
    }
  }
  return false;
}

}  // namespace detail

// One-to-one matching of predictions to golds within each field name,
// maximizing the number of matched pairs. Golds are visited in input order
// and try predictions in input order, so ties resolve deterministically.
template <typename Matcher>
Counts match_fields(const std::vector<TypedField>& preds, const std::vector<TypedField>& golds,
                    Matcher&& matches) {
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> by_field;
  for (std::size_t i = 0; i < golds.size(); ++i) by_field[golds[i].field_name].first.push_back(i);
  for (std::size_t i = 0; i < preds.size(); ++i) by_field[preds[i].field_name].second.push_back(i);
  Counts c;
  for (const auto& [name, idx] : by_field) {
    const auto& [gi, pi] = idx;
    std::vector<std::vector<std::size_t>> adj(gi.size());
    for (std::size_t g = 0; g < gi.size(); ++g) {
      for (std::size_t p = 0; p < pi.size(); ++p) {
        if (matches(preds[pi[p]], golds[gi[g]])) adj[g].push_back(p);
      }
    }
    std::vector<long> owner(pi.size(), -1);
    std::int64_t matched = 0;
    for (std::size_t g = 0; g < gi.size(); ++g) {
      std::vector<char> seen(pi.size(), 0);
      if (detail::augment(g, adj, seen, owner)) ++matched;
    }
    c.tp += matched;
    c.fp += static_cast<std::int64_t>(pi.size()) - matched;
    c.fn += static_cast<std::int64_t>(gi.size()) - matched;
  }
  return c;
}

inline Counts typed_counts(const std::vector<TypedField>& preds, const std::vector<TypedField>& golds,
                           const MatchOptions& opt = {}) {
  return match_fields(preds, golds,
                      [&](const TypedField& p, const TypedField& g) { return typed_match(p, g, opt); });
}

inline Counts exact_counts(const std::vector<TypedField>& preds, const std::vector<TypedField>& golds) {
  return match_fields(preds, golds, exact_match);
}

inline double typed_micro_f1(const std::vector<TypedField>& preds, const std::vector<TypedField>& golds,
                             const MatchOptions& opt = {}) {
  return f1(typed_counts(preds, golds, opt));
}

// --- run evaluation ---------------------------------------------------------

enum class Metric { kAnls, kKeyboxF1, kTypedMicroF1, kFieldF1 };

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kAnls: return "anls";
    case Metric::kKeyboxF1: return "keybox-f1";
    case Metric::kTypedMicroF1: return "typed-micro-f1";
    case Metric::kFieldF1: break;
  }
  return "field-f1";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "anls") return Metric::kAnls;
  if (s == "keybox-f1") return Metric::kKeyboxF1;
  if (s == "typed-micro-f1") return Metric::kTypedMicroF1;
  if (s == "field-f1") return Metric::kFieldF1;
  throw ConfigError("unknown metric '" + std::string(s) + "'");
}

struct EvalOptions {
  AnlsOptions anls;
  MatchOptions match;
  FieldTable fields;
  std::string dataset_tag;
};

struct SampleScore {
  std::string sample_id;
  double score = 0.0;
  Counts counts;
  bool has_prediction = true;
};

struct EvalReport {
  std::string dataset_tag;
  std::string metric_name;
  double score = 0.0;
  std::size_t n_samples = 0;
  std::vector<SampleScore> rows;
  Counts totals;
};

// Gold and prediction lines share a loose schema so that dataset records,
// QA files, prediction files and inference traces can all be evaluated:
//   sample_id               required
//   answers | answer        text answers
//   annotation.helpful | helpful_ids | selected_ids | selection.ids
//   fields: [{"name", "value"}]
struct EvalEntry {
  std::string sample_id;
  std::vector<std::string> answers;
  std::optional<std::set<int>> box_ids;
  std::vector<std::pair<std::string, std::string>> fields;
};

inline EvalEntry entry_from_json(const nlohmann::json& j, bool gold) {
  EvalEntry e;
  e.sample_id = j.at("sample_id").get<std::string>();
  if (j.contains("answers") && j["answers"].is_array()) {
    e.answers = j["answers"].get<std::vector<std::string>>();
  } else if (j.contains("answer") && j["answer"].is_string()) {
    e.answers = {j["answer"].get<std::string>()};
  }
  auto read_ids = [&](const nlohmann::json& arr) {
    std::set<int> ids;
    for (const auto& v : arr) ids.insert(v.get<int>());
    e.box_ids = ids;
  };
  if (gold) {
    if (j.contains("annotation") && j["annotation"].is_object() && j["annotation"].contains("helpful")) {
      read_ids(j["annotation"]["helpful"]);
    } else if (j.contains("helpful_ids")) {
      read_ids(j["helpful_ids"]);
    }
  } else {
    if (j.contains("selected_ids") && j["selected_ids"].is_array()) {
      read_ids(j["selected_ids"]);
    } else if (j.contains("selection") && j["selection"].is_object()) {
      read_ids(j["selection"].at("ids"));
    }
  }
  // Self-evaluation: a gold file passed as predictions scores its own boxes.
  if (!gold && !e.box_ids) {
    if (j.contains("annotation") && j["annotation"].is_object() && j["annotation"].contains("helpful")) {
      read_ids(j["annotation"]["helpful"]);
    } else if (j.contains("helpful_ids")) {
      read_ids(j["helpful_ids"]);
    }
  }
  if (j.contains("fields")) {
    for (const auto& f : j["fields"]) {
      e.fields.emplace_back(f.at("name").get<std::string>(), f.at("value").get<std::string>());
    }
  }
  return e;
}

inline std::vector<EvalEntry> load_entries(const std::string& path, bool gold) {
  std::vector<EvalEntry> out;
  std::set<std::string> seen;
  for_each_jsonl_file(path, [&](const nlohmann::json& j, std::size_t line) {
    EvalEntry e;
    try {
      e = entry_from_json(j, gold);
    } catch (const nlohmann::json::exception& ex) {
      throw FormatError(path, line, ex.what());
    }
    if (!seen.insert(e.sample_id).second) {
      throw FormatError(path, line, "duplicate sample_id " + e.sample_id);
    }
    out.push_back(std::move(e));
  });
  return out;
}

// Scores predictions against gold. Every prediction must name a gold
// sample; gold samples without a prediction score as an empty answer and an
// empty selection. Rows follow gold file order.
inline EvalReport evaluate(const std::vector<EvalEntry>& preds, const std::vector<EvalEntry>& golds,
                           Metric metric, const EvalOptions& opt = {}) {
  if (preds.empty()) throw ValidationError("predictions file is empty");
  std::map<std::string, const EvalEntry*> by_id;
  for (const auto& g : golds) by_id[g.sample_id] = &g;
  std::map<std::string, const EvalEntry*> pred_by_id;
  std::vector<std::string> missing;
  for (const auto& p : preds) {
    if (!by_id.count(p.sample_id)) missing.push_back(p.sample_id);
    pred_by_id[p.sample_id] = &p;
  }
  if (!missing.empty()) throw JoinError(missing);

  EvalReport rep;
  rep.dataset_tag = opt.dataset_tag;
  rep.metric_name = metric_name(metric);
  double anls_sum = 0.0;
  const EvalEntry empty;
  for (const auto& g : golds) {
    const auto it = pred_by_id.find(g.sample_id);
    const EvalEntry& p = it == pred_by_id.end() ? empty : *it->second;
    SampleScore row;
    row.sample_id = g.sample_id;
    row.has_prediction = it != pred_by_id.end();
    switch (metric) {
      case Metric::kAnls: {
        if (g.answers.empty()) throw ValidationError("gold " + g.sample_id + " has no answers");
        row.score = anls(p.answers.empty() ? std::string() : p.answers.front(), g.answers, opt.anls);
        anls_sum += row.score;
        break;
      }
      case Metric::kKeyboxF1: {
        if (!g.box_ids) throw ValidationError("gold " + g.sample_id + " has no helpful boxes");
        row.counts = keybox_counts(p.box_ids.value_or(std::set<int>{}), *g.box_ids);
        row.score = f1(row.counts);
        break;
      }
      case Metric::kTypedMicroF1:
      case Metric::kFieldF1: {
        std::vector<TypedField> pf;
        std::vector<TypedField> gf;
        const bool typed = metric == Metric::kTypedMicroF1;
        for (const auto& [n, v] : p.fields) {
          pf.push_back(typed ? opt.fields.make(n, v) : TypedField{n, v, FieldType::kString});
        }
        for (const auto& [n, v] : g.fields) {
          gf.push_back(typed ? opt.fields.make(n, v) : TypedField{n, v, FieldType::kString});
        }
        row.counts = typed ? typed_counts(pf, gf, opt.match) : exact_counts(pf, gf);
        row.score = f1(row.counts);
        break;
      }
    }
    rep.totals += row.counts;
    rep.rows.push_back(std::move(row));
  }
  rep.n_samples = rep.rows.size();
  if (metric == Metric::kAnls) {
    rep.score = rep.rows.empty() ? 0.0 : anls_sum / static_cast<double>(rep.rows.size());
  } else {
    rep.score = f1(rep.totals);
  }
  return rep;
}

inline EvalReport evaluate_run(const std::string& predictions_path, const std::string& gold_path,
                               Metric metric, const EvalOptions& opt = {}) {
  return evaluate(load_entries(predictions_path, false), load_entries(gold_path, true), metric, opt);
}

inline std::string format_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string report_tsv(const EvalReport& r) {
  std::string out = "sample_id\tscore\ttp\tfp\tfn\thas_prediction\n";
  for (const auto& row : r.rows) {
    out += row.sample_id + "\t" + format_score(row.score) + "\t" + std::to_string(row.counts.tp) +
           "\t" + std::to_string(row.counts.fp) + "\t" + std::to_string(row.counts.fn) + "\t" +
           (row.has_prediction ? "1" : "0") + "\n";
  }
  return out;
}

inline nlohmann::json report_summary(const EvalReport& r) {
  return {{"dataset_tag", r.dataset_tag},
          {"metric", r.metric_name},
          {"score", r.score},
          {"n_samples", r.n_samples},
          {"tp", r.totals.tp},
          {"fp", r.totals.fp},
          {"fn", r.totals.fn}};
}

}  // namespace cob::eval
