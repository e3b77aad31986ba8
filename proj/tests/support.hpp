// Shared helpers for the unit tests.

#pragma once

#include <stdlib.h>

#include <filesystem>
#include <string>
#include <vector>

#include "w2s/answer_norm.hpp"
#include "w2s/backend.hpp"
#include "w2s/datamodel.hpp"
#include "w2s/digest.hpp"

namespace w2s::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "w2s_test_XXXXXX").string();
    path_ = ::mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

inline GenResponse response(const std::string& id, const std::string& answer, int sample = 0,
                            const std::string& origin = "test") {
  GenResponse r;
  r.question_id = id;
  r.text = "Reasoning for " + id + ". The answer is " + answer + ".";
  r.answer = extract_final_answer(r.text);
  r.origin = origin;
  r.sample_index = sample;
  return r;
}

inline GenResponse garbled(const std::string& id, int sample = 0) {
  GenResponse r;
  r.question_id = id;
  r.text = "I could not finish this one.";
  r.answer = AnswerKey::unparseable();
  r.origin = "test";
  r.sample_index = sample;
  return r;
}

inline DatasetManifest manifest_of(const std::vector<std::string>& ids, bool gold = false) {
  DatasetManifest m;
  m.name = "t";
  m.has_gold = gold;
  for (const auto& id : ids) {
    Question q;
    q.id = id;
    q.text = "What is question " + id + "?";
    if (gold) q.gold_answer = "1";
    m.questions.push_back(q);
  }
  return m;
}

}  // namespace w2s::testing
