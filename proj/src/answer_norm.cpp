// Copyright 2026 The w2s-curate Authors.
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

#include "w2s/answer_norm.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include <fmt/format.h>

#include "json.hpp"
#include "w2s/digest.hpp"
#include "w2s/error.hpp"

namespace w2s {
namespace {

using boost::multiprecision::cpp_int;

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  if (from.empty()) return;
  std::size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

bool ends_with_ci(std::string_view s, std::string_view suffix) {
  if (suffix.size() > s.size()) return false;
  return ascii_lower(s.substr(s.size() - suffix.size())) == ascii_lower(suffix);
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
  }
  return out;
}

// Index of the brace matching the '{' at `open`, or npos.
std::size_t matching_brace(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i;
  }
  return std::string::npos;
}

// Replaces every `\cmd{X}` by X.
bool unwrap_command(std::string& s, std::string_view cmd) {
  bool changed = false;
  std::string needle = std::string(cmd) + "{";
  std::size_t pos;
  while ((pos = s.find(needle)) != std::string::npos) {
    std::size_t open = pos + needle.size() - 1;
    std::size_t close = matching_brace(s, open);
    if (close == std::string::npos) break;
    s = s.substr(0, pos) + s.substr(open + 1, close - open - 1) + s.substr(close + 1);
    changed = true;
  }
  return changed;
}

// Keeps only the content of the last \boxed{...}, if any.
bool take_boxed(std::string& s) {
  for (std::string_view cmd : {"\\boxed{", "\\fbox{"}) {
    std::size_t pos = s.rfind(cmd);
    if (pos == std::string::npos) continue;
    std::size_t open = pos + cmd.size() - 1;
    std::size_t close = matching_brace(s, open);
    if (close == std::string::npos) continue;
    s = s.substr(open + 1, close - open - 1);
    return true;
  }
  return false;
}

bool strip_edges(std::string& s) {
  static constexpr std::string_view kTrailing = ".,;:!?\"'`*";
  static constexpr std::string_view kLeading = ":,;\"'`*";
  std::string before = s;
  s = trim(s);
  while (!s.empty() && kTrailing.find(s.back()) != std::string_view::npos) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && kLeading.find(s[b]) != std::string_view::npos) ++b;
  s = trim(std::string_view(s).substr(b));
  for (auto [open, close] : {std::pair<std::string_view, std::string_view>{"\\(", "\\)"},
                             {"\\[", "\\]"}}) {
    if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close))
      s = trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
  }
  return s != before;
}

bool strip_currency(std::string& s) {
  std::string before = s;
  replace_all(s, "\\$", "");
  for (std::string_view sym : {"$", "\xE2\x82\xAC" /* € */, "\xC2\xA3" /* £ */, "\xC2\xA5" /* ¥ */})
    replace_all(s, sym, "");
  return s != before;
}

bool strip_percent(std::string& s, bool& percent) {
  for (std::string_view suffix : {"\\%", "%", " percent"}) {
    if (ends_with_ci(s, suffix)) {
      s = trim(std::string_view(s).substr(0, s.size() - suffix.size()));
      percent = true;
      return true;
    }
  }
  return false;
}

bool strip_units(std::string& s, const std::vector<std::string>& units) {
  for (const auto& unit : units) {
    if (unit.empty() || s.size() <= unit.size() || !ends_with_ci(s, unit)) continue;
    char prev = s[s.size() - unit.size() - 1];
    if (is_space(prev) || std::isdigit(static_cast<unsigned char>(prev))) {
      s = trim(std::string_view(s).substr(0, s.size() - unit.size()));
      return true;
    }
  }
  return false;
}

std::optional<Rational> parse_decimal(const std::string& s) {
  static const std::regex re(R"(^([+-]?)(\d*)(?:\.(\d*))?$)");
  std::smatch m;
  if (!std::regex_match(s, m, re)) return std::nullopt;
  std::string int_part = m[2].str(), frac_part = m[3].str();
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  cpp_int num(int_part.empty() ? std::string("0") : int_part);
  cpp_int den = 1;
  for (char c : frac_part) {
    num = num * 10 + (c - '0');
    den *= 10;
  }
  Rational r(num, den);
  if (m[1].str() == "-") r = -r;
  return r;
}

std::optional<Rational> parse_fraction(const std::string& num, const std::string& den,
                                       bool negative) {
  auto n = parse_decimal(num);
  auto d = parse_decimal(den);
  if (!n || !d || *d == 0) return std::nullopt;
  Rational r = *n / *d;
  return negative ? -r : r;
}

std::optional<Rational> parse_numeric(std::string s) {
  static const std::regex thousands(R"(^[+-]?\d{1,3}(,\d{3})+(\.\d*)?$)");
  static const std::regex slash(R"(^([+-]?)\s*(\d+(?:\.\d+)?)\s*/\s*(\d+(?:\.\d+)?)$)");
  static const std::regex latex_frac(
      R"(^([+-]?)\s*\\frac\s*\{\s*([+-]?\d+(?:\.\d+)?)\s*\}\s*\{\s*(\d+(?:\.\d+)?)\s*\}$)");
  static const std::regex latex_short(R"(^([+-]?)\s*\\frac\s*(\d)(\d)$)");

  if (std::regex_match(s, thousands)) s.erase(std::remove(s.begin(), s.end(), ','), s.end());
  if (auto d = parse_decimal(s)) return d;
  std::smatch m;
  if (std::regex_match(s, m, slash)) return parse_fraction(m[2], m[3], m[1] == "-");
  if (std::regex_match(s, m, latex_frac)) return parse_fraction(m[2], m[3], m[1] == "-");
  if (std::regex_match(s, m, latex_short)) return parse_fraction(m[2], m[3], m[1] == "-");
  return std::nullopt;
}

bool terminating(const Rational& r) {
  cpp_int d = boost::multiprecision::denominator(r);
  while (d % 2 == 0) d /= 2;
  while (d % 5 == 0) d /= 5;
  return d == 1;
}

AnswerKey numeric_key(const Rational& value) {
  AnswerKey key;
  key.numeric = value;
  key.canonical = render_rational(value);
  bool integral = boost::multiprecision::denominator(value) == 1;
  key.kind = (!integral && terminating(value)) ? AnswerKind::Decimal : AnswerKind::Rational;
  return key;
}

}  // namespace

std::string_view to_string(AnswerKind kind) {
  switch (kind) {
    case AnswerKind::Rational: return "rational";
    case AnswerKind::Decimal: return "decimal";
    case AnswerKind::Text: return "text";
    case AnswerKind::Unparseable: return "unparseable";
  }
  return "unparseable";
}

std::string render_rational(const Rational& value) {
  cpp_int num = boost::multiprecision::numerator(value);
  cpp_int den = boost::multiprecision::denominator(value);
  if (den == 1) return num.str();
  if (!terminating(value)) return num.str() + "/" + den.str();
  // Scale to the smallest power of ten that clears the denominator.
  std::size_t digits = 0;
  cpp_int scale = 1;
  while ((scale % den) != 0) {
    scale *= 10;
    ++digits;
  }
  cpp_int scaled = num * (scale / den);
  bool negative = scaled < 0;
  if (negative) scaled = -scaled;
  std::string s = scaled.str();
  if (s.size() <= digits) s.insert(0, digits - s.size() + 1, '0');
  s.insert(s.size() - digits, ".");
  return negative ? "-" + s : s;
}

AnswerKey normalize_answer(std::string_view raw, const ExtractionProfile& profile) {
  std::string s(raw);
  replace_all(s, "\xE2\x88\x92", "-");  // U+2212 minus sign
  replace_all(s, "\xC2\xA0", " ");      // no-break space
  for (std::string_view thin : {"\\,", "\\!", "\\;", "\\ "}) replace_all(s, thin, "");
  replace_all(s, "{,}", ",");
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  replace_all(s, "\\left", "");
  replace_all(s, "\\right", "");

  bool percent = false;
  for (int guard = 0; guard < 64; ++guard) {
    bool changed = false;
    changed |= take_boxed(s);
    for (std::string_view cmd : {"\\text", "\\textbf", "\\mbox", "\\mathrm", "\\textrm"})
      changed |= unwrap_command(s, cmd);
    changed |= strip_currency(s);
    changed |= strip_edges(s);
    changed |= strip_percent(s, percent);
    changed |= strip_units(s, profile.strip_units);
    std::string collapsed = collapse_whitespace(s);
    changed |= collapsed != s;
    s = std::move(collapsed);
    if (!changed) break;
  }
  if (s.empty()) return AnswerKey::unparseable();

  if (auto value = parse_numeric(s)) {
    if (percent && profile.percent_as_fraction) *value /= 100;
    return numeric_key(*value);
  }
  AnswerKey key;
  key.kind = AnswerKind::Text;
  key.canonical = ascii_lower(s);
  return key;
}

AnswerKey extract_final_answer(std::string_view response, const ExtractionProfile& profile) {
  const std::string lower = ascii_lower(response);
  std::size_t best_start = std::string::npos, best_end = 0;
  for (const auto& cue : profile.cues) {
    if (cue.empty()) continue;
    std::size_t pos = lower.rfind(ascii_lower(cue));
    if (pos == std::string::npos) continue;
    std::size_t end = pos + cue.size();
    if (best_start == std::string::npos || pos > best_start ||
        (pos == best_start && end > best_end)) {
      best_start = pos;
      best_end = end;
    }
  }
  if (best_start == std::string::npos) return AnswerKey::unparseable();

  std::string_view span = response.substr(best_end);
  if (auto nl = span.find('\n'); nl != std::string_view::npos) span = span.substr(0, nl);
  // A period followed by whitespace ends the sentence; "4.2" stays intact.
  for (std::size_t i = 0; i + 1 < span.size(); ++i) {
    if (span[i] == '.' && is_space(span[i + 1])) {
      span = span.substr(0, i);
      break;
    }
  }
  return normalize_answer(span, profile);
}

bool answers_equal(const AnswerKey& a, const AnswerKey& b) {
  if (!a.parseable() || !b.parseable()) return false;
  if (a.is_numeric() != b.is_numeric()) return false;
  if (a.is_numeric()) return *a.numeric == *b.numeric;
  return a.canonical == b.canonical;
}

ExtractionProfile ExtractionProfile::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("extraction profile: malformed JSON ({})", e.what()));
  }
  ExtractionProfile p;
  try {
    if (j.contains("cues")) p.cues = j["cues"].get<std::vector<std::string>>();
    if (j.contains("strip_units")) p.strip_units = j["strip_units"].get<std::vector<std::string>>();
    if (j.contains("percent_as_fraction")) p.percent_as_fraction = j["percent_as_fraction"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("extraction profile: {}", e.what()));
  }
  if (p.cues.empty()) throw DataError("extraction profile: 'cues' must not be empty");
  // Longer units first so "dollars" wins over "s"-style suffixes.
  std::stable_sort(p.strip_units.begin(), p.strip_units.end(),
                   [](const auto& a, const auto& b) { return a.size() > b.size(); });
  return p;
}

ExtractionProfile ExtractionProfile::load(const std::filesystem::path& path) {
  return from_json_text(read_file(path));
}

std::string ExtractionProfile::to_json_text() const {
  nlohmann::json j;
  j["cues"] = cues;
  j["strip_units"] = strip_units;
  j["percent_as_fraction"] = percent_as_fraction;
  return j.dump();
}

}  // namespace w2s
