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

// Self-contained demo bundle: synthetic manifests, one simulator config per
// role and a run config wiring them together. Used by `w2s synth` and tests.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace w2s {

struct SynthOptions {
  std::size_t train = 200;
  std::size_t aux = 100;
  std::size_t test = 100;
  std::uint64_t seed = 7;
  int rounds = 1;
  // role -> probability of the correct answer on every question
  std::map<std::string, double> accuracy = {
      {"weak", 0.40},       {"strong_base", 0.50}, {"weak_ft.r1", 0.45},
      {"icl_ft.r1", 0.55},  {"m_plus", 0.60},      {"m_pro", 0.65},
      {"strong_gold", 0.70},
  };
  bool judge = true;  // add a simulated process judge
};

// Writes <dir>/{data,sim}/... plus profile.json and config.json. Returns the
// config path.
std::filesystem::path write_synthetic_bundle(const std::filesystem::path& dir,
                                             const SynthOptions& options = {});

}  // namespace w2s
