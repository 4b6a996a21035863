// Copyright 2026 The CycleFlow Authors
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


// Git-style content hashes used for provenance records.

#ifndef CYCLEFLOW_HASHING_H_
#define CYCLEFLOW_HASHING_H_

#include <filesystem>
#include <string>
#include <string_view>

namespace cycleflow {

// SHA-1 of "blob <size>\0<bytes>", lower-case hex. Matches `git hash-object`.
std::string git_blob_hash(std::string_view bytes);
std::string git_blob_hash_file(const std::filesystem::path& path);

}  // namespace cycleflow

#endif  // CYCLEFLOW_HASHING_H_
