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

#include <stdexcept>
#include <string>
#include <vector>

namespace w2s {

// Malformed input data (manifests, JSONL records, config files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A configuration that violates one or more invariants. Carries every
// diagnostic, not only the first.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> diagnostics);
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  std::vector<std::string> diagnostics_;
};

// A required upstream artifact or endpoint registration is missing, or a
// recorded digest no longer matches the file on disk.
class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An endpoint could not serve enough of a batch to continue.
class EndpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Endpoint misconfiguration detected before any request is sent (for
// example a credential variable that is not set).
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace w2s
