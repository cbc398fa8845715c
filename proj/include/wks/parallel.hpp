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

#ifndef WKS_PARALLEL_HPP_
#define WKS_PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace wks {

// Caps the number of worker threads used by ParallelFor. 0 means "use the
// hardware concurrency".
void SetMaxThreads(int threads);
int MaxThreads();

// Runs body(i) for i in [0, count). Work is split into contiguous chunks; each
// index is processed exactly once, so results written per index do not depend
// on scheduling.
void ParallelFor(std::size_t count, const std::function<void(std::size_t)>& body,
                 std::size_t min_chunk = 1);

}  // namespace wks

#endif  // WKS_PARALLEL_HPP_
