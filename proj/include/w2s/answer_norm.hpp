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

// Final-answer extraction and equality.
//
// Numeric answers are compared as exact rationals, never with a floating
// tolerance. The canonical string of a numeric key is a function of its
// value alone: integers render as "25", terminating fractions as decimals
// ("0.5", "-4.2"), everything else as a reduced "p/q".

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace w2s {

using Rational = boost::multiprecision::cpp_rational;

enum class AnswerKind { Rational, Decimal, Text, Unparseable };

std::string_view to_string(AnswerKind kind);

struct AnswerKey {
  AnswerKind kind = AnswerKind::Unparseable;
  std::string canonical;
  std::optional<Rational> numeric;

  bool parseable() const { return kind != AnswerKind::Unparseable; }
  bool is_numeric() const { return numeric.has_value(); }

  static AnswerKey unparseable() { return {}; }

  // Structural equality (kind, canonical, value). Two Unparseable keys are
  // structurally equal here; answer equality is answers_equal().
  bool operator==(const AnswerKey&) const = default;
};

// Per-dataset answer surface rules. Loaded from
//   {"cues": [str], "strip_units": [str], "percent_as_fraction": bool}
struct ExtractionProfile {
  std::vector<std::string> cues{"The answer is"};
  std::vector<std::string> strip_units;
  bool percent_as_fraction = true;

  static ExtractionProfile load(const std::filesystem::path& path);
  static ExtractionProfile from_json_text(const std::string& text);
  std::string to_json_text() const;
};

// Finds the last occurrence of any cue (case-insensitive) and normalizes the
// span that follows it, up to the end of that line or sentence. No cue or an
// empty span yields Unparseable.
AnswerKey extract_final_answer(std::string_view response, const ExtractionProfile& profile = {});

AnswerKey normalize_answer(std::string_view raw, const ExtractionProfile& profile = {});

// Numeric keys compare by exact value, text keys by canonical string. Any
// comparison involving an Unparseable key is false.
bool answers_equal(const AnswerKey& a, const AnswerKey& b);

// Canonical rendering used for numeric keys.
std::string render_rational(const Rational& value);

}  // namespace w2s
