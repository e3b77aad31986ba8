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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "w2s/datamodel.hpp"

namespace w2s {

inline constexpr const char* kAnswerCue = "The answer is";

// Two-stage zero-shot prompting: the first prompt elicits a reasoning path,
// the second appends the answer cue to that path to elicit the final answer.
struct ZeroShotPrompts {
  std::string reasoning_prompt;

  // reasoning_prompt + reasoning + " The answer is"
  std::string answer_prompt(const std::string& reasoning) const;
};

// "Question: {text}\nAnswer:" or, with CoT,
// "Question: {text}\nLet's think step by step.\nAnswer:".
ZeroShotPrompts build_zero_shot_prompts(const Question& q, bool with_cot);

struct Demonstration {
  std::string question;
  std::string response;
};

// Worked demonstrations in Question/Answer layout followed by the target
// question. With no demonstrations this is the standard zero-shot prompt.
// Throws DataError when fewer than k demonstrations are supplied.
std::string build_icl_prompt(const Question& q, const std::vector<Demonstration>& demos,
                             std::size_t k);

// Renders only the demonstration block (shared by every question in a run).
std::string render_demo_block(const std::vector<Demonstration>& demos);

}  // namespace w2s
