// Copyright 2026 The PKRE Authors.
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

// Lexico-syntactic patterns rendered from the shortest dependency path
// between the two target entities.

#ifndef PKRE_PATTERN_HPP_
#define PKRE_PATTERN_HPP_

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "pkre/corpus.hpp"

namespace pkre {

enum class PatternVariant : unsigned char {
  kSdp = 0,
  kSdpNer = 1,
  kSdpDep = 2,
  kSdpDepNer = 3,
  kSentenceFallback = 4,
};

inline constexpr std::array<PatternVariant, 4> kSdpVariants = {
    PatternVariant::kSdp, PatternVariant::kSdpNer, PatternVariant::kSdpDep,
    PatternVariant::kSdpDepNer};

inline constexpr std::array<PatternVariant, 5> kAllVariants = {
    PatternVariant::kSdp, PatternVariant::kSdpNer, PatternVariant::kSdpDep,
    PatternVariant::kSdpDepNer, PatternVariant::kSentenceFallback};

/// "SDP", "SDP_NER", "SDP_DEP", "SDP_DEP_NER", "SENTENCE_FALLBACK".
std::string_view variant_name(PatternVariant variant);
PatternVariant parse_variant(std::string_view name);

struct Pattern {
  std::string instance_id;
  PatternVariant variant = PatternVariant::kSdp;
  std::string text;
  std::vector<std::size_t> path;  // empty for the sentence fallback

  bool operator==(const Pattern&) const = default;
};

struct RenderOptions {
  // When false, the plain SDP variant keeps the surface words of the target
  // entities instead of their dataset types.
  bool substitute_targets_in_sdp = true;
};

/// The syntactic head of a span: the token whose head lies outside the
/// span (leftmost if several), else the leftmost span token.
std::size_t entity_head(const DependencyParse& parse, TokenSpan span);

/// Undirected tree path from `from` to `to`, both inclusive, ordered
/// from -> to. Throws kPathFailure when the two tokens are not connected
/// through a single root (cycles, multiple roots, bad heads).
std::vector<std::size_t> shortest_dep_path(const DependencyParse& parse,
                                           std::size_t from, std::size_t to);

/// Renders one variant. SDP variants throw kPathFailure for parse-failed
/// instances or when path extraction fails.
Pattern render_pattern(const ParsedInstance& pi, PatternVariant variant,
                       const RenderOptions& options = {});

/// The four SDP patterns (when the path exists) followed by the sentence
/// fallback pattern, which is always present.
std::vector<Pattern> render_all(const ParsedInstance& pi,
                                const RenderOptions& options = {});

/// True when all SDP variants can be rendered for this instance.
bool has_dependency_path(const ParsedInstance& pi);

}  // namespace pkre

#endif  // PKRE_PATTERN_HPP_
