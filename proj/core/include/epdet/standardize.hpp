#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "epdet/actions.hpp"

namespace epdet {

// Special tokens emitted for volatile substrings. Frozen: changing any of
// these invalidates every stored vocabulary and feature cache.
inline constexpr std::string_view kTokenMac = "<macaddress>";
inline constexpr std::string_view kTokenSid = "<sid>";
inline constexpr std::string_view kTokenHash = "<hash>";
inline constexpr std::string_view kTokenEpoch = "<epoch>";

struct AliasRule {
  // Path component patterns matched against the start of the component
  // list; "*" matches exactly one arbitrary component.
  std::vector<std::string> pattern;
  std::string replacement;
};

// The frozen directory alias table, applied before any splitting.
const std::vector<AliasRule>& directory_alias_rules();

// Turns one raw name/value string into its canonical token list.
//
// Pipeline, in order:
//   1. ASCII lowercase, '\' normalized to '/'.
//   2. Split on '/', drop empty components.
//   3. Directory alias rules applied to the leading components.
//   4. Volatile-substring scan per component: MAC addresses, Windows SIDs,
//      hex digests of exactly 32/40/64 chars, and 9-10 digit epoch
//      timestamps become special tokens. This runs before punctuation
//      removal; stripping first would destroy the match boundaries.
//   5. Remaining pieces split on '.' (extension dots).
//   6. Cleanup per piece: every char outside [a-z0-9] is removed.
//      Special tokens pass through unchanged.
//   7. One more volatile-substring scan, because cleanup can fuse digit
//      or hex runs across removed punctuation. This makes the whole
//      function idempotent on its own output.
//
// Empty and all-punctuation inputs produce an empty list.
std::vector<std::string> standardize_string(std::string_view raw);

// Convenience: standardize one raw action value under a given kind.
Action standardize_action(ActionType kind, std::string_view raw);

}  // namespace epdet
