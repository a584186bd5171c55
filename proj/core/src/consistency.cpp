#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <set>

#include "factscope/fact_engine.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

std::string_view to_string(MismatchKind k) {
  switch (k) {
    case MismatchKind::NUMBER_NOT_FOUND: return "NUMBER_NOT_FOUND";
    case MismatchKind::YEAR_OUT_OF_RANGE: return "YEAR_OUT_OF_RANGE";
    case MismatchKind::DIRECTION_CONFLICT: return "DIRECTION_CONFLICT";
  }
  return "NUMBER_NOT_FOUND";
}

bool ConsistencyReport::has(MismatchKind kind) const {
  return std::any_of(mismatches.begin(), mismatches.end(), [&](const Mismatch& m) { return m.kind == kind; });
}

nlohmann::json ConsistencyReport::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : mismatches) ms.push_back({{"kind", std::string(to_string(m.kind))}, {"detail", m.detail}});
  return {{"ok", ok}, {"mismatches", ms}};
}

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

bool starts_with_word(std::string_view s, std::size_t pos, std::string_view word) {
  if (s.size() - pos < word.size()) return false;
  if (!text::iequals(s.substr(pos, word.size()), word)) return false;
  std::size_t end = pos + word.size();
  return end == s.size() || !is_alpha(s[end]);
}

std::size_t skip_spaces(std::string_view s, std::size_t pos) {
  while (pos < s.size() && s[pos] == ' ') ++pos;
  return pos;
}

}  // namespace

std::vector<CitedNumber> extract_numbers(std::string_view d) {
  std::vector<CitedNumber> out;
  std::size_t i = 0;
  while (i < d.size()) {
    if (!is_digit(d[i])) {
      ++i;
      continue;
    }
    const std::size_t begin = i;
    // Digits glued to letters are identifiers such as "CO2" or "2nd".
    bool glued = begin > 0 && (is_alpha(d[begin - 1]) || d[begin - 1] == '_');
    bool negative = begin > 0 && d[begin - 1] == '-' && (begin < 2 || !is_digit(d[begin - 2]));
    std::string digits;
    bool grouped = false;
    while (i < d.size()) {
      if (is_digit(d[i])) {
        digits.push_back(d[i++]);
      } else if (d[i] == ',' && !digits.empty() && i + 3 < d.size() && is_digit(d[i + 1]) && is_digit(d[i + 2]) &&
                 is_digit(d[i + 3]) && (i + 4 >= d.size() || !is_digit(d[i + 4]))) {
        grouped = true;
        ++i;
      } else {
        break;
      }
    }
    bool fractional = false;
    if (i + 1 < d.size() && d[i] == '.' && is_digit(d[i + 1])) {
      fractional = true;
      digits.push_back('.');
      ++i;
      while (i < d.size() && is_digit(d[i])) digits.push_back(d[i++]);
    }
    if (i < d.size() && (is_alpha(d[i]) || d[i] == '_')) glued = true;
    if (glued) {
      while (i < d.size() && (is_alpha(d[i]) || is_digit(d[i]) || d[i] == '_')) ++i;
      continue;
    }
    double v = 0.0;
    std::from_chars(digits.data(), digits.data() + digits.size(), v);
    CitedNumber n{negative ? -v : v, false, false, std::string(d.substr(begin, i - begin))};
    std::size_t j = skip_spaces(d, i);
    bool magnified = false;
    if (j < d.size() && d[j] == '%') {
      n.percent = true;
      i = j + 1;
    } else if (starts_with_word(d, j, "percent")) {
      n.percent = true;
      i = j + 7;
    } else {
      static constexpr std::pair<std::string_view, double> kScales[] = {
          {"thousand", 1e3}, {"million", 1e6}, {"billion", 1e9}, {"trillion", 1e12}};
      for (const auto& [word, scale] : kScales) {
        if (starts_with_word(d, j, word)) {
          n.value *= scale;
          magnified = true;
          i = j + word.size();
          break;
        }
      }
    }
    n.year = !negative && !grouped && !fractional && !n.percent && !magnified && digits.size() == 4 &&
             v >= 1800 && v <= 2100;
    if (n.percent || magnified) n.text = std::string(d.substr(begin, i - begin));
    out.push_back(std::move(n));
  }
  return out;
}

namespace {

// Replaces digit-bearing names (series codes, text keys) by blanks so their
// digits are not read as cited numbers.
std::string mask_names(std::string_view description, const std::vector<std::string>& names) {
  std::string out(description);
  std::string lower = text::to_lower(description);
  for (const auto& name : names) {
    if (name.empty() || std::none_of(name.begin(), name.end(), is_digit)) continue;
    const std::string needle = text::to_lower(name);
    std::size_t pos = 0;
    while ((pos = lower.find(needle, pos)) != std::string::npos) {
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(pos),
                out.begin() + static_cast<std::ptrdiff_t>(pos + needle.size()), ' ');
      std::fill(lower.begin() + static_cast<std::ptrdiff_t>(pos),
                lower.begin() + static_cast<std::ptrdiff_t>(pos + needle.size()), ' ');
      pos += needle.size();
    }
  }
  return out;
}

std::optional<double> year_of(const Cell& key) {
  if (const auto* d = std::get_if<double>(&key)) {
    if (*d == std::floor(*d) && *d >= 1800 && *d <= 2100) return *d;
    return std::nullopt;
  }
  if (const auto* s = std::get_if<std::string>(&key)) {
    if (s->size() >= 4 && std::all_of(s->begin(), s->begin() + 4, is_digit) && (s->size() == 4 || (*s)[4] == '-')) {
      double y = std::stod(s->substr(0, 4));
      if (y >= 1800 && y <= 2100) return y;
    }
  }
  return std::nullopt;
}

void literal_numbers(const std::vector<FilterClause>& clauses, std::vector<double>& out) {
  for (const auto& c : clauses) {
    if (const auto* d = std::get_if<double>(&c.value)) out.push_back(*d);
    if (const auto* s = std::get_if<std::string>(&c.value)) {
      if (auto v = text::parse_number(*s)) out.push_back(*v);
    }
  }
}

struct Candidates {
  std::vector<double> values;
  std::set<double> years;
};

Candidates candidates_for(const FactResult& r) {
  Candidates c;
  for (const auto& g : r.groups) {
    for (double v : g.values) c.values.push_back(v);
    if (const auto* k = std::get_if<double>(&g.key); k && r.breakdown_kind != FieldKind::temporal) {
      c.values.push_back(*k);
    }
    c.values.push_back(static_cast<double>(g.row_count));
  }
  const std::size_t n = r.groups.size();
  c.values.push_back(static_cast<double>(n));
  for (std::size_t i = 1; i <= n; ++i) c.values.push_back(static_cast<double>(i));
  literal_numbers(r.fact.subspace, c.values);
  literal_numbers(r.fact.focus, c.values);

  std::vector<double> lits;
  literal_numbers(r.fact.subspace, lits);
  literal_numbers(r.fact.focus, lits);
  for (double v : lits) {
    if (v == std::floor(v) && v >= 1800 && v <= 2100) c.years.insert(v);
  }
  for (const auto& k : r.focus_keys) {
    if (auto y = year_of(k)) c.years.insert(*y);
  }

  std::visit(
      [&](const auto& d) {
        using T = std::decay_t<decltype(d)>;
        auto& v = c.values;
        if constexpr (std::is_same_v<T, ValueResult>) {
          v.push_back(d.scalar);
        } else if constexpr (std::is_same_v<T, DifferenceResult>) {
          v.insert(v.end(), {d.a, d.b, d.abs_diff, d.rel_diff});
          if (d.a != 0.0) v.push_back((d.b - d.a) / d.a);
          if (d.b != 0.0) v.push_back(d.a / d.b);
          if (d.a != 0.0) v.push_back(d.b / d.a);
        } else if constexpr (std::is_same_v<T, ProportionResult>) {
          v.push_back(d.share);
          v.insert(v.end(), d.shares.begin(), d.shares.end());
        } else if constexpr (std::is_same_v<T, TrendResult>) {
          v.insert(v.end(), {d.slope, d.start, d.end, d.end - d.start});
          if (d.start != 0.0) v.insert(v.end(), {(d.end - d.start) / d.start, d.end / d.start});
        } else if constexpr (std::is_same_v<T, CategorizationResult>) {
          for (auto cnt : d.counts) v.push_back(static_cast<double>(cnt));
        } else if constexpr (std::is_same_v<T, DistributionResult>) {
          v.insert(v.end(), {d.mean, d.std, d.min, d.max, d.max - d.min});
        } else if constexpr (std::is_same_v<T, RankResult>) {
          if (d.focus_position) v.push_back(static_cast<double>(*d.focus_position));
        } else if constexpr (std::is_same_v<T, AssociationResult>) {
          v.insert(v.end(), {d.pearson_r, static_cast<double>(d.points), d.pearson_r * d.pearson_r});
        } else if constexpr (std::is_same_v<T, ExtremeResult>) {
          v.push_back(d.value);
          if (auto y = year_of(d.key)) c.years.insert(*y);
        } else {
          v.push_back(static_cast<double>(d.outlier_keys.size()));
          for (const auto& k : d.outlier_keys) {
            if (auto y = year_of(k)) c.years.insert(*y);
          }
        }
      },
      r.derived);

  if (const auto* t = std::get_if<TrendResult>(&r.derived)) {
    // A trend caption may name its endpoints and the years of its peak and trough.
    for (const Cell* k : {&t->start_key, &t->end_key}) {
      if (auto y = year_of(*k)) c.years.insert(*y);
    }
    auto [lo, hi] = std::minmax_element(r.groups.begin(), r.groups.end(),
                                        [](const FactGroup& a, const FactGroup& b) { return a.value() < b.value(); });
    for (auto it : {lo, hi}) {
      if (auto y = year_of(it->key)) c.years.insert(*y);
    }
  } else {
    for (const auto& g : r.groups) {
      if (auto y = year_of(g.key)) c.years.insert(*y);
    }
  }
  return c;
}

bool close_to(double cited, double candidate) {
  cited = std::abs(cited);
  candidate = std::abs(candidate);
  if (candidate == 0.0) return cited == 0.0;
  return std::abs(cited - candidate) <= kCaptionRelativeTolerance * candidate;
}

bool matches_any(const CitedNumber& n, const std::vector<double>& values) {
  return std::any_of(values.begin(), values.end(), [&](double c) {
    return close_to(n.value, c) || (n.percent && close_to(n.value, 100.0 * c));
  });
}

bool has_word(const std::vector<std::string>& tokens, std::initializer_list<std::string_view> stems) {
  for (const auto& t : tokens) {
    for (auto s : stems) {
      if (t.rfind(s, 0) == 0) return true;
    }
  }
  return false;
}

}  // namespace

ConsistencyReport check_description(const FactResult& r, std::string_view description) {
  ConsistencyReport report;
  std::vector<std::string> names{r.breakdown_field};
  for (const auto& m : r.fact.measure) names.push_back(m.field);
  for (const auto& c : r.fact.subspace) {
    names.push_back(c.field);
    if (const auto* s = std::get_if<std::string>(&c.value)) names.push_back(*s);
  }
  for (const auto& c : r.fact.focus) {
    names.push_back(c.field);
    if (const auto* s = std::get_if<std::string>(&c.value)) names.push_back(*s);
  }
  for (const auto& g : r.groups) {
    if (const auto* s = std::get_if<std::string>(&g.key)) {
      if (!year_of(g.key) || s->size() != 4) names.push_back(*s);
    }
  }
  // Longest first so a name is not split by a shorter one it contains.
  std::sort(names.begin(), names.end(), [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
  const std::string masked = mask_names(description, names);
  const Candidates cands = candidates_for(r);

  for (const auto& n : extract_numbers(masked)) {
    if (n.year) {
      if (cands.years.count(n.value) == 0 && !matches_any(n, cands.values)) {
        report.add(MismatchKind::YEAR_OUT_OF_RANGE, "year " + n.text + " is not one the result refers to");
      }
    } else if (!matches_any(n, cands.values)) {
      report.add(MismatchKind::NUMBER_NOT_FOUND, "number '" + n.text + "' matches no computed value");
    }
  }

  if (const auto* t = std::get_if<TrendResult>(&r.derived)) {
    const auto tokens = text::tokenize(masked);
    const bool up = has_word(tokens, {"increas", "rise", "rising", "rose", "risen", "grow", "grew", "climb"});
    const bool down = has_word(tokens, {"decreas", "declin", "fall", "fell", "drop", "shrank", "shrink"});
    if (t->direction == Direction::increasing && down && !up) {
      report.add(MismatchKind::DIRECTION_CONFLICT, "caption describes a decline but the trend is increasing");
    } else if (t->direction == Direction::decreasing && up && !down) {
      report.add(MismatchKind::DIRECTION_CONFLICT, "caption describes a rise but the trend is decreasing");
    }
  }
  return report;
}

namespace {

// Six significant digits, plain decimal notation.
std::string fmt(double v) {
  if (v == 0.0 || !std::isfinite(v)) return "0";
  const int mag = static_cast<int>(std::floor(std::log10(std::abs(v))));
  const int decimals = std::clamp(5 - mag, 0, 40);
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

std::string pct(double share) { return fmt(100.0 * share) + "%"; }

std::string subject(const FactResult& r) {
  const Measure& m = r.fact.measure.front();
  std::string s;
  switch (m.aggregate) {
    case Aggregate::none: s = m.field; break;
    case Aggregate::count: s = "count of " + m.field; break;
    case Aggregate::sum: s = "total " + m.field; break;
    case Aggregate::avg: s = "average " + m.field; break;
    case Aggregate::min: s = "minimum " + m.field; break;
    case Aggregate::max: s = "maximum " + m.field; break;
  }
  return s;
}

}  // namespace

std::string canonical_description(const FactResult& r) {
  const std::string what = subject(r);
  return std::visit(
      [&](const auto& d) -> std::string {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, ValueResult>) {
          return "The " + what + " is " + fmt(d.scalar) + ".";
        } else if constexpr (std::is_same_v<T, DifferenceResult>) {
          return "The " + what + " of " + cell_text(d.key_a) + " is " + fmt(d.a) + " versus " + fmt(d.b) + " for " +
                 cell_text(d.key_b) + ", a relative difference of " + pct(d.rel_diff) + ".";
        } else if constexpr (std::is_same_v<T, ProportionResult>) {
          return cell_text(d.focus_key) + " accounts for " + pct(d.share) + " of the " + what + ".";
        } else if constexpr (std::is_same_v<T, TrendResult>) {
          if (d.direction == Direction::flat) {
            return "The " + what + " stayed roughly stable between " + cell_text(d.start_key) + " and " +
                   cell_text(d.end_key) + ".";
          }
          return "The " + what + (d.direction == Direction::increasing ? " increased" : " decreased") + " from " +
                 fmt(d.start) + " in " + cell_text(d.start_key) + " to " + fmt(d.end) + " in " +
                 cell_text(d.end_key) + ".";
        } else if constexpr (std::is_same_v<T, CategorizationResult>) {
          return "The data covers " + fmt(static_cast<double>(d.categories.size())) + " categories of " +
                 r.breakdown_field + ".";
        } else if constexpr (std::is_same_v<T, DistributionResult>) {
          return "The " + what + " averages " + fmt(d.mean) + " and ranges from " + fmt(d.min) + " to " +
                 fmt(d.max) + ".";
        } else if constexpr (std::is_same_v<T, RankResult>) {
          std::string s = cell_text(d.ordering.front()) + " ranks first by " + what;
          if (d.focus_position) {
            s += ", and " + cell_text(r.focus_keys.front()) + " is at position " +
                 fmt(static_cast<double>(*d.focus_position));
          }
          return s + ".";
        } else if constexpr (std::is_same_v<T, AssociationResult>) {
          return "The correlation between " + r.fact.measure.front().field + " and " + r.fact.measure.back().field +
                 " is " + fmt(d.pearson_r) + ".";
        } else if constexpr (std::is_same_v<T, ExtremeResult>) {
          return cell_text(d.key) + " has the " + (d.kind == ExtremeKind::max ? "highest " : "lowest ") + what +
                 " at " + fmt(d.value) + ".";
        } else {
          if (d.outlier_keys.empty()) return "No group stands out in " + what + ".";
          std::string s = "Outliers in " + what + ":";
          for (std::size_t i = 0; i < d.outlier_keys.size(); ++i) s += (i ? ", " : " ") + cell_text(d.outlier_keys[i]);
          return s + ".";
        }
      },
      r.derived);
}

}  // namespace factscope
