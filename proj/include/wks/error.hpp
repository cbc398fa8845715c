// Copyright 2026 The wkselect Authors
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

#ifndef WKS_ERROR_HPP_
#define WKS_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace wks {

enum class ErrorKind {
  kConfiguration,
  kDomain,
  kNumerical,
  kInfeasible,
  kIo,
  kInternal,
};

const char* ErrorKindName(ErrorKind kind);

// Every failure raised by the library carries a kind so the C layer can map
// it onto a status code without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace wks

#endif  // WKS_ERROR_HPP_
