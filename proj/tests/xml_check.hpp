#pragma once

// Minimal XML well-formedness check: one root element, balanced tags,
// quoted attributes, known entities only, no stray text outside the root.

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace fdcnet::testing {

inline bool xml_well_formed(std::string_view s, std::string* why = nullptr) {
  auto fail = [&](std::string msg, std::size_t at) {
    if (why) *why = msg + " at offset " + std::to_string(at);
    return false;
  };
  auto name_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == ':' || c == '.'; };
  auto entity_ok = [&](std::size_t amp) {
    for (std::string_view e : {"&amp;", "&lt;", "&gt;", "&quot;", "&apos;"})
      if (s.substr(amp, e.size()) == e) return true;
    return false;
  };
  std::vector<std::string> stack;
  std::size_t roots = 0;
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '<') {
      if (s[i] == '&' && !entity_ok(i)) return fail("bad entity", i);
      if (stack.empty() && !std::isspace(static_cast<unsigned char>(s[i]))) return fail("text outside root", i);
      ++i;
      continue;
    }
    if (s.substr(i, 4) == "<!--") {
      const auto end = s.find("-->", i + 4);
      if (end == std::string_view::npos) return fail("unterminated comment", i);
      i = end + 3;
      continue;
    }
    if (s.substr(i, 2) == "<?") {
      const auto end = s.find("?>", i + 2);
      if (end == std::string_view::npos || roots || !stack.empty()) return fail("bad declaration", i);
      i = end + 2;
      continue;
    }
    const bool closing = s.substr(i, 2) == "</";
    std::size_t j = i + (closing ? 2 : 1);
    const std::size_t name_start = j;
    while (j < s.size() && name_char(s[j])) ++j;
    if (j == name_start) return fail("missing tag name", i);
    const std::string name(s.substr(name_start, j - name_start));
    if (closing) {
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j >= s.size() || s[j] != '>') return fail("bad closing tag", i);
      if (stack.empty() || stack.back() != name) return fail("mismatched </" + name + ">", i);
      stack.pop_back();
      i = j + 1;
      continue;
    }
    bool self_closing = false;
    for (;;) {
      while (j < s.size() && std::isspace(static_cast<unsigned char>(s[j]))) ++j;
      if (j >= s.size()) return fail("unterminated tag", i);
      if (s[j] == '>') break;
      if (s.substr(j, 2) == "/>") {
        self_closing = true;
        ++j;
        break;
      }
      const std::size_t attr = j;
      while (j < s.size() && name_char(s[j])) ++j;
      if (j == attr || j >= s.size() || s[j] != '=') return fail("bad attribute", attr);
      ++j;
      if (j >= s.size() || (s[j] != '"' && s[j] != '\'')) return fail("unquoted attribute", j);
      const char q = s[j];
      const auto end = s.find(q, j + 1);
      if (end == std::string_view::npos) return fail("unterminated attribute", j);
      for (std::size_t k = j + 1; k < end; ++k) {
        if (s[k] == '<') return fail("'<' in attribute", k);
        if (s[k] == '&' && !entity_ok(k)) return fail("bad entity", k);
      }
      j = end + 1;
    }
    if (stack.empty()) {
      if (++roots > 1) return fail("second root element", i);
    }
    if (!self_closing) stack.push_back(name);
    i = j + 1;
  }
  if (!stack.empty()) return fail("unclosed <" + stack.back() + ">", s.size());
  if (roots != 1) return fail("no root element", 0);
  return true;
}

}  // namespace fdcnet::testing
