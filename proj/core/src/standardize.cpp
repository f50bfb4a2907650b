#include "epdet/standardize.hpp"

namespace epdet {

namespace {

bool is_digit_c(char c) { return c >= '0' && c <= '9'; }
bool is_hex_c(char c) { return is_digit_c(c) || (c >= 'a' && c <= 'f'); }
bool is_alnum_c(char c) { return is_digit_c(c) || (c >= 'a' && c <= 'z'); }

// Six hex pairs with a consistent ':' or '-' separator, e.g.
// 00:1a:2b:3c:4d:5e. Must not touch adjacent hex digits.
size_t match_mac(std::string_view s, size_t i) {
  if (i > 0 && is_hex_c(s[i - 1])) return 0;
  if (i + 17 > s.size()) return 0;
  char sep = s[i + 2];
  if (sep != ':' && sep != '-') return 0;
  for (size_t g = 0; g < 6; ++g) {
    size_t p = i + g * 3;
    if (!is_hex_c(s[p]) || !is_hex_c(s[p + 1])) return 0;
    if (g < 5 && s[p + 2] != sep) return 0;
  }
  if (i + 17 < s.size() && is_hex_c(s[i + 17])) return 0;
  return 17;
}

// Windows security identifier: s-1-<n>(-<n>)*, greedy over the trailing
// numeric groups.
size_t match_sid(std::string_view s, size_t i) {
  if (i > 0 && is_alnum_c(s[i - 1])) return 0;
  if (i + 5 > s.size()) return 0;
  if (s[i] != 's' || s[i + 1] != '-' || s[i + 2] != '1' || s[i + 3] != '-')
    return 0;
  size_t p = i + 4;
  if (!is_digit_c(s[p])) return 0;
  while (true) {
    while (p < s.size() && is_digit_c(s[p])) ++p;
    if (p + 1 < s.size() && s[p] == '-' && is_digit_c(s[p + 1])) {
      ++p;
      continue;
    }
    break;
  }
  if (p < s.size() && is_alnum_c(s[p])) return 0;
  return p - i;
}

// Maximal hex run of exactly 32, 40 or 64 chars (md5 / sha1 / sha256).
size_t match_hash(std::string_view s, size_t i) {
  if (i > 0 && is_hex_c(s[i - 1])) return 0;
  size_t p = i;
  while (p < s.size() && is_hex_c(s[p])) ++p;
  size_t len = p - i;
  if (len == 32 || len == 40 || len == 64) return len;
  return 0;
}

// Maximal digit run of 9 or 10 chars: a plausible unix timestamp.
size_t match_epoch(std::string_view s, size_t i) {
  if (i > 0 && is_digit_c(s[i - 1])) return 0;
  size_t p = i;
  while (p < s.size() && is_digit_c(s[p])) ++p;
  size_t len = p - i;
  if (len == 9 || len == 10) return len;
  return 0;
}

struct Piece {
  std::string text;
  bool special;
};

// Splits s into literal pieces and special tokens. Match priority at each
// position: MAC, SID, hash, epoch.
void scan_volatile(std::string_view s, std::vector<Piece>& out) {
  size_t start = 0;
  size_t i = 0;
  auto flush = [&](size_t upto) {
    if (upto > start) out.push_back({std::string(s.substr(start, upto - start)), false});
  };
  while (i < s.size()) {
    size_t len;
    std::string_view tok;
    if ((len = match_mac(s, i)) != 0) {
      tok = kTokenMac;
    } else if ((len = match_sid(s, i)) != 0) {
      tok = kTokenSid;
    } else if ((len = match_hash(s, i)) != 0) {
      tok = kTokenHash;
    } else if ((len = match_epoch(s, i)) != 0) {
      tok = kTokenEpoch;
    } else {
      ++i;
      continue;
    }
    flush(i);
    out.push_back({std::string(tok), true});
    i += len;
    start = i;
  }
  flush(s.size());
}

std::string strip_to_alnum(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (is_alnum_c(c)) out += c;
  }
  return out;
}

void apply_alias(std::vector<std::string>& comps) {
  for (const AliasRule& rule : directory_alias_rules()) {
    if (comps.size() < rule.pattern.size()) continue;
    bool ok = true;
    for (size_t i = 0; i < rule.pattern.size(); ++i) {
      if (rule.pattern[i] != "*" && rule.pattern[i] != comps[i]) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    comps.erase(comps.begin(), comps.begin() + rule.pattern.size());
    comps.insert(comps.begin(), rule.replacement);
    return;
  }
}

}  // namespace

const std::vector<AliasRule>& directory_alias_rules() {
  // Frozen. More specific prefixes come first; the first match wins and the
  // table is applied at most once per string.
  static const std::vector<AliasRule> kRules = {
      {{"c:", "windows", "system32"}, "<system32>"},
      {{"c:", "windows", "syswow64"}, "<system32>"},
      {{"c:", "windows", "temp"}, "<tempdir>"},
      {{"c:", "windows"}, "<windir>"},
      {{"c:", "users", "*"}, "<userdir>"},
      {{"c:", "documents and settings", "*"}, "<userdir>"},
      {{"c:", "program files (x86)"}, "<programfiles>"},
      {{"c:", "program files"}, "<programfiles>"},
      {{"c:", "programdata"}, "<programdata>"},
  };
  return kRules;
}

std::vector<std::string> standardize_string(std::string_view raw) {
  std::string s;
  s.reserve(raw.size());
  for (char c : raw) {
    if (c >= 'A' && c <= 'Z')
      s += static_cast<char>(c - 'A' + 'a');
    else if (c == '\\')
      s += '/';
    else
      s += c;
  }

  std::vector<std::string> comps;
  size_t pos = 0;
  while (pos <= s.size()) {
    size_t sep = s.find('/', pos);
    if (sep == std::string::npos) sep = s.size();
    if (sep > pos) comps.push_back(s.substr(pos, sep - pos));
    pos = sep + 1;
  }
  apply_alias(comps);

  std::vector<std::string> tokens;
  std::vector<Piece> pieces;
  std::vector<Piece> rescan;
  for (const std::string& comp : comps) {
    if (is_special_token(comp)) {
      tokens.push_back(comp);
      continue;
    }
    pieces.clear();
    scan_volatile(comp, pieces);
    for (const Piece& piece : pieces) {
      if (piece.special) {
        tokens.push_back(piece.text);
        continue;
      }
      size_t dpos = 0;
      const std::string& pt = piece.text;
      while (dpos <= pt.size()) {
        size_t dot = pt.find('.', dpos);
        if (dot == std::string::npos) dot = pt.size();
        if (dot > dpos) {
          std::string clean = strip_to_alnum(std::string_view(pt).substr(dpos, dot - dpos));
          if (!clean.empty()) {
            // Cleanup may have fused digit or hex runs; extract again so
            // the output is a fixed point of this function.
            rescan.clear();
            scan_volatile(clean, rescan);
            for (const Piece& p2 : rescan) tokens.push_back(p2.text);
          }
        }
        dpos = dot + 1;
      }
    }
  }
  return tokens;
}

Action standardize_action(ActionType kind, std::string_view raw) {
  return Action{kind, standardize_string(raw)};
}

}  // namespace epdet
