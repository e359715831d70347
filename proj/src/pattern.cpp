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

#include "pkre/pattern.hpp"

#include <algorithm>
#include <unordered_map>

#include "pkre/error.hpp"

namespace pkre {

std::string_view variant_name(PatternVariant variant) {
  switch (variant) {
    case PatternVariant::kSdp: return "SDP";
    case PatternVariant::kSdpNer: return "SDP_NER";
    case PatternVariant::kSdpDep: return "SDP_DEP";
    case PatternVariant::kSdpDepNer: return "SDP_DEP_NER";
    case PatternVariant::kSentenceFallback: return "SENTENCE_FALLBACK";
  }
  return "SDP";
}

PatternVariant parse_variant(std::string_view name) {
  for (PatternVariant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  // Accept the hyphenated spelling too ("SDP-DEP-NER").
  std::string alt(name);
  std::replace(alt.begin(), alt.end(), '-', '_');
  for (PatternVariant v : kAllVariants) {
    if (variant_name(v) == alt) return v;
  }
  throw Error(ErrorCode::kConfig, "unknown pattern variant: " + std::string(name));
}

std::size_t entity_head(const DependencyParse& parse, TokenSpan span) {
  for (std::size_t t = span.begin; t < span.end; ++t) {
    if (t >= parse.heads.size()) break;
    const int h = parse.heads[t];
    if (h == kRootHead || !span.contains(static_cast<std::size_t>(h))) {
      return t;
    }
  }
  return span.begin;
}

namespace {

// Chain of ancestors starting at `token` and ending at the root.
std::vector<std::size_t> root_chain(const DependencyParse& parse,
                                    std::size_t token) {
  std::vector<std::size_t> chain{token};
  const std::size_t n = parse.heads.size();
  while (parse.heads[chain.back()] != kRootHead) {
    if (chain.size() > n) {
      throw Error(ErrorCode::kPathFailure, "head cycle");
    }
    chain.push_back(static_cast<std::size_t>(parse.heads[chain.back()]));
  }
  return chain;
}

}  // namespace

std::vector<std::size_t> shortest_dep_path(const DependencyParse& parse,
                                           std::size_t from, std::size_t to) {
  const std::size_t n = parse.heads.size();
  if (from >= n || to >= n) {
    throw Error(ErrorCode::kPathFailure, "path endpoint outside the sentence");
  }
  if (!is_well_formed_tree(parse)) {
    throw Error(ErrorCode::kPathFailure, "dependency graph is not a tree");
  }
  const auto up_from = root_chain(parse, from);
  const auto up_to = root_chain(parse, to);

  std::unordered_map<std::size_t, std::size_t> depth_in_from;
  for (std::size_t i = 0; i < up_from.size(); ++i) depth_in_from[up_from[i]] = i;

  for (std::size_t j = 0; j < up_to.size(); ++j) {
    auto it = depth_in_from.find(up_to[j]);
    if (it == depth_in_from.end()) continue;
    // up_to[j] is the lowest common ancestor.
    std::vector<std::size_t> path(up_from.begin(),
                                  up_from.begin() + static_cast<long>(it->second) + 1);
    for (std::size_t k = j; k-- > 0;) path.push_back(up_to[k]);
    return path;
  }
  throw Error(ErrorCode::kPathFailure, "entity heads are not connected");
}

namespace {

bool uses_ner(PatternVariant v) {
  return v == PatternVariant::kSdpNer || v == PatternVariant::kSdpDepNer;
}

bool uses_dep(PatternVariant v) {
  return v == PatternVariant::kSdpDep || v == PatternVariant::kSdpDepNer;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

Pattern render_pattern(const ParsedInstance& pi, PatternVariant variant,
                       const RenderOptions& options) {
  const Instance& inst = pi.instance;
  Pattern out;
  out.instance_id = inst.id;
  out.variant = variant;

  if (variant == PatternVariant::kSentenceFallback) {
    out.text = join(inst.tokens);
    return out;
  }
  if (pi.parse_failed) {
    throw Error(ErrorCode::kPathFailure,
                "instance " + inst.id + " has no usable dependency parse");
  }
  const std::size_t a = entity_head(pi.parse, inst.e1);
  const std::size_t b = entity_head(pi.parse, inst.e2);
  out.path = shortest_dep_path(pi.parse, a, b);

  const bool substitute_targets =
      variant != PatternVariant::kSdp || options.substitute_targets_in_sdp;
  std::vector<std::string> words;
  words.reserve(out.path.size());
  for (std::size_t t : out.path) {
    std::string word;
    if (substitute_targets && inst.e1.contains(t)) {
      word = inst.e1_type;
    } else if (substitute_targets && inst.e2.contains(t)) {
      word = inst.e2_type;
    } else if (uses_ner(variant) && !inst.e1.contains(t) &&
               !inst.e2.contains(t) && t < pi.ner.tags.size() &&
               pi.ner.tags[t].has_value()) {
      word = *pi.ner.tags[t];
    } else {
      word = inst.tokens[t];
    }
    if (uses_dep(variant)) {
      word += '/';
      word += pi.parse.labels[t];
    }
    words.push_back(std::move(word));
  }
  out.text = join(words);
  return out;
}

bool has_dependency_path(const ParsedInstance& pi) {
  if (pi.parse_failed) return false;
  try {
    shortest_dep_path(pi.parse, entity_head(pi.parse, pi.instance.e1),
                      entity_head(pi.parse, pi.instance.e2));
    return true;
  } catch (const Error&) {
    return false;
  }
}

std::vector<Pattern> render_all(const ParsedInstance& pi,
                                const RenderOptions& options) {
  std::vector<Pattern> out;
  if (has_dependency_path(pi)) {
    for (PatternVariant v : kSdpVariants) {
      out.push_back(render_pattern(pi, v, options));
    }
  }
  out.push_back(render_pattern(pi, PatternVariant::kSentenceFallback, options));
  return out;
}

}  // namespace pkre
