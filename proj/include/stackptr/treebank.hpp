#pragma once

// CoNLL-X treebank reading and writing.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/utf8.hpp"

namespace stackptr {

inline constexpr std::string_view kRootSymbol = "<ROOT>";
inline constexpr int kNoHead = -1;
inline constexpr std::size_t kConllColumns = 10;

struct Token {
  std::string form;
  std::string pos;
  std::u32string chars;
  // The ten original columns when read from CoNLL; empty otherwise.
  std::vector<std::string> columns;
};

// Position 0 is always the artificial ROOT token.
struct Sentence {
  std::vector<Token> tokens;

  Sentence() { tokens.push_back({std::string(kRootSymbol), std::string(kRootSymbol), {}, {}}); }

  Token& add(std::string form, std::string pos) {
    std::u32string chars = utf8::decode(form);
    tokens.push_back({std::move(form), std::move(pos), std::move(chars), {}});
    return tokens.back();
  }

  // Token count excluding ROOT.
  std::size_t n() const { return tokens.size() - 1; }
};

// heads[i] is the head position of token i (heads[0] == kNoHead);
// labels[0] is empty.
struct DependencyTree {
  std::vector<int> heads{kNoHead};
  std::vector<std::string> labels{std::string()};

  void add(int head, std::string label) {
    heads.push_back(head);
    labels.push_back(std::move(label));
  }

  std::size_t n() const { return heads.size() - 1; }

  friend bool operator==(const DependencyTree&, const DependencyTree&) = default;
};

struct AnnotatedSentence {
  Sentence sentence;
  DependencyTree tree;
};

// Returns an empty string for a well-formed tree, else the first defect.
inline std::string tree_defect(const DependencyTree& tree, bool single_root) {
  const std::size_t n = tree.n();
  if (tree.heads.empty() || tree.heads[0] != kNoHead) return "ROOT must have no head";
  if (tree.labels.size() != tree.heads.size()) return "label count differs from head count";
  if (n == 0) return "sentence has no tokens";
  std::size_t roots = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const int h = tree.heads[i];
    if (h < 0 || static_cast<std::size_t>(h) > n) return "head of token " + std::to_string(i) + " out of range";
    if (static_cast<std::size_t>(h) == i) return "token " + std::to_string(i) + " is its own head";
    if (h == 0) ++roots;
  }
  if (roots == 0) return "no token attaches to ROOT";
  if (single_root && roots > 1) return "multiple tokens attach to ROOT";
  // Every token must reach ROOT within n hops.
  for (std::size_t i = 1; i <= n; ++i) {
    std::size_t cur = i;
    std::size_t hops = 0;
    while (cur != 0) {
      cur = static_cast<std::size_t>(tree.heads[cur]);
      if (++hops > n) return "head cycle through token " + std::to_string(i);
    }
  }
  return {};
}

inline void validate_tree(const DependencyTree& tree, bool single_root = true) {
  if (auto d = tree_defect(tree, single_root); !d.empty()) throw InvariantError("ill-formed tree: " + d);
}

struct ConllOptions {
  bool single_root = true;
  // Accept "_" in HEAD (unparsed input); such sentences skip tree validation.
  bool heads_optional = false;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

inline bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace detail

inline std::vector<AnnotatedSentence> parse_conll(std::string_view text, ConllOptions opt = {}) {
  std::vector<AnnotatedSentence> out;
  AnnotatedSentence cur;
  std::vector<std::size_t> token_lines;
  std::size_t line_no = 0;

  auto finish = [&]() {
    if (cur.sentence.n() == 0) return;
    const std::size_t n = cur.sentence.n();
    for (std::size_t i = 1; i <= n; ++i)
      if (cur.tree.heads[i] > static_cast<int>(n))
        throw FormatError("HEAD " + std::to_string(cur.tree.heads[i]) + " out of range", token_lines[i - 1]);
    const bool unparsed = std::find(cur.tree.heads.begin() + 1, cur.tree.heads.end(), kNoHead) != cur.tree.heads.end();
    if (auto d = unparsed ? std::string() : tree_defect(cur.tree, opt.single_root); !d.empty())
      throw FormatError("ill-formed tree: " + d, token_lines.front());
    out.push_back(std::move(cur));
    cur = AnnotatedSentence{};
    token_lines.clear();
  };

  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      finish();
      if (nl == text.size()) break;
      continue;
    }
    if (line.front() == '#') continue;
    auto cols = detail::split_tabs(line);
    if (cols.size() != kConllColumns)
      throw FormatError("expected 10 tab-separated columns, found " + std::to_string(cols.size()), line_no);
    int id = 0;
    if (!detail::parse_int(cols[0], id) || id != static_cast<int>(cur.sentence.n()) + 1)
      throw FormatError("non-monotone token ID '" + std::string(cols[0]) + "'", line_no);
    int head = kNoHead;
    if (!(opt.heads_optional && cols[6] == "_")) {
      if (!detail::parse_int(cols[6], head)) throw FormatError("non-integer HEAD '" + std::string(cols[6]) + "'", line_no);
      if (head < 0) throw FormatError("HEAD out of range", line_no);
    }
    if (cols[1].empty()) throw FormatError("empty FORM", line_no);
    token_lines.push_back(line_no);
    std::string_view pos_tag = cols[3] != "_" ? cols[3] : cols[4];
    Token& tok = cur.sentence.add(std::string(cols[1]), std::string(pos_tag));
    tok.columns.assign(cols.begin(), cols.end());
    cur.tree.add(head, std::string(cols[7]));
    if (nl == text.size()) {
      finish();
      break;
    }
  }
  finish();
  return out;
}

inline std::string write_conll(std::span<const AnnotatedSentence> corpus) {
  std::ostringstream os;
  for (const auto& [sent, tree] : corpus) {
    validate_tree(tree, false);
    if (tree.n() != sent.n()) throw InvariantError("ill-formed tree: length differs from sentence");
    for (std::size_t i = 1; i <= sent.n(); ++i) {
      const Token& t = sent.tokens[i];
      std::vector<std::string> c = t.columns;
      if (c.size() != kConllColumns) c = {"", t.form, "_", t.pos, t.pos, "_", "", "", "_", "_"};
      c[0] = std::to_string(i);
      c[6] = std::to_string(tree.heads[i]);
      c[7] = tree.labels[i].empty() ? "_" : tree.labels[i];
      for (std::size_t k = 0; k < kConllColumns; ++k) os << (k ? "\t" : "") << (c[k].empty() ? "_" : c[k]);
      os << '\n';
    }
    os << '\n';
  }
  return os.str();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<AnnotatedSentence> read_conll_file(const std::string& path, ConllOptions opt = {}) {
  try {
    return parse_conll(read_file(path), opt);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

}  // namespace stackptr
