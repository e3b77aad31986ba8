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

#include "w2s/prompts.hpp"

#include <fmt/format.h>

#include "w2s/error.hpp"

namespace w2s {

std::string ZeroShotPrompts::answer_prompt(const std::string& reasoning) const {
  return reasoning_prompt + reasoning + " " + kAnswerCue;
}

ZeroShotPrompts build_zero_shot_prompts(const Question& q, bool with_cot) {
  if (with_cot) return {"Question: " + q.text + "\nLet's think step by step.\nAnswer:"};
  return {"Question: " + q.text + "\nAnswer:"};
}

std::string render_demo_block(const std::vector<Demonstration>& demos) {
  std::string out;
  for (const auto& d : demos) {
    out += "Question: " + d.question + "\nAnswer: " + d.response + "\n\n";
  }
  return out;
}

std::string build_icl_prompt(const Question& q, const std::vector<Demonstration>& demos,
                             std::size_t k) {
  if (k > demos.size())
    throw DataError(fmt::format("build_icl_prompt: k={} exceeds the {} available demonstrations",
                                k, demos.size()));
  std::vector<Demonstration> used(demos.begin(), demos.begin() + static_cast<long>(k));
  return render_demo_block(used) + build_zero_shot_prompts(q, false).reasoning_prompt;
}

}  // namespace w2s
