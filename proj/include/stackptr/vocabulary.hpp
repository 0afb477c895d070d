#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/rng.hpp"
#include "stackptr/tensor.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/utf8.hpp"

namespace stackptr {

inline constexpr int kPadId = 0;
inline constexpr int kUnkId = 1;
inline constexpr int kRootId = 2;

class SymbolTable {
 public:
  SymbolTable() = default;
  explicit SymbolTable(bool with_reserved) {
    if (with_reserved) {
      add("<PAD>");
      add("<UNK>");
      add(std::string(kRootSymbol));
    }
  }

  int add(const std::string& s) {
    if (frozen) throw InvariantError("insertion into a frozen vocabulary: " + s);
    auto [it, inserted] = ids_.emplace(s, static_cast<int>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  // -1 when absent.
  int find(const std::string& s) const {
    auto it = ids_.find(s);
    return it == ids_.end() ? -1 : it->second;
  }

  int lookup(const std::string& s, int fallback) const {
    int id = find(s);
    return id < 0 ? fallback : id;
  }

  const std::string& symbol(int id) const { return symbols_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return symbols_.size(); }
  const std::vector<std::string>& symbols() const { return symbols_; }

  friend bool operator==(const SymbolTable& a, const SymbolTable& b) { return a.symbols_ == b.symbols_; }

  bool frozen = false;

 private:
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, int> ids_;
};

struct Vocabulary {
  SymbolTable words{true};
  SymbolTable chars{true};
  SymbolTable pos{true};
  SymbolTable labels{false};

  void freeze(bool f = true) { words.frozen = chars.frozen = pos.frozen = labels.frozen = f; }
  bool frozen() const { return words.frozen; }

  int word_id(const std::string& form) const { return words.lookup(form, kUnkId); }
  int char_id(char32_t c) const { return chars.lookup(utf8::encode(c), kUnkId); }
  int pos_id(const std::string& tag) const { return pos.lookup(tag, kUnkId); }
  int label_id(const std::string& label) const { return labels.find(label); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words == b.words && a.chars == b.chars && a.pos == b.pos && a.labels == b.labels;
  }
};

namespace detail {

// Symbols ordered by descending count, ties lexicographic (byte order).
inline std::vector<std::string> by_frequency(const std::map<std::string, std::size_t>& counts, std::size_t min_count) {
  std::vector<std::pair<std::string, std::size_t>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> out;
  for (auto& [s, c] : items)
    if (c >= min_count) out.push_back(s);
  return out;
}

struct CorpusCounts {
  std::map<std::string, std::size_t> words, chars, pos, labels;
};

inline CorpusCounts count_symbols(std::span<const AnnotatedSentence> corpus) {
  CorpusCounts c;
  for (const auto& [sent, tree] : corpus) {
    for (std::size_t i = 1; i <= sent.n(); ++i) {
      const Token& t = sent.tokens[i];
      ++c.words[t.form];
      ++c.pos[t.pos];
      for (char32_t ch : t.chars) ++c.chars[utf8::encode(ch)];
      ++c.labels[tree.labels[i]];
    }
  }
  return c;
}

}  // namespace detail

// Appends symbols of `corpus` that `vocab` lacks; existing ids never move.
inline Vocabulary extend_vocabulary(Vocabulary vocab, std::span<const AnnotatedSentence> corpus,
                                    std::size_t min_word_count) {
  vocab.freeze(false);
  auto counts = detail::count_symbols(corpus);
  for (const auto& s : detail::by_frequency(counts.words, std::max<std::size_t>(min_word_count, 1))) vocab.words.add(s);
  for (const auto& s : detail::by_frequency(counts.chars, 1)) vocab.chars.add(s);
  for (const auto& s : detail::by_frequency(counts.pos, 1)) vocab.pos.add(s);
  for (const auto& s : detail::by_frequency(counts.labels, 1)) vocab.labels.add(s);
  vocab.freeze();
  return vocab;
}

inline Vocabulary build_vocabulary(std::span<const AnnotatedSentence> corpus, std::size_t min_word_count = 2) {
  return extend_vocabulary(Vocabulary{}, corpus, min_word_count);
}

// Text form: one "<table> <symbol>" line per entry in id order.
inline std::string vocabulary_to_text(const Vocabulary& v) {
  std::string out;
  auto dump = [&](const char* name, const SymbolTable& t) {
    for (const auto& s : t.symbols()) out += std::string(name) + "\t" + s + "\n";
  };
  dump("word", v.words);
  dump("char", v.chars);
  dump("pos", v.pos);
  dump("label", v.labels);
  return out;
}

inline Vocabulary vocabulary_from_text(std::string_view text) {
  Vocabulary v;
  v.words = SymbolTable(false);
  v.chars = SymbolTable(false);
  v.pos = SymbolTable(false);
  v.labels = SymbolTable(false);
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError("vocabulary entry without table name", line_no);
    std::string table = line.substr(0, tab);
    std::string sym = line.substr(tab + 1);
    SymbolTable* t = table == "word"    ? &v.words
                     : table == "char"  ? &v.chars
                     : table == "pos"   ? &v.pos
                     : table == "label" ? &v.labels
                                        : nullptr;
    if (!t) throw FormatError("unknown vocabulary table '" + table + "'", line_no);
    if (t->find(sym) >= 0) throw FormatError("duplicate vocabulary entry '" + sym + "'", line_no);
    t->add(sym);
  }
  for (const SymbolTable* t : {&v.words, &v.chars, &v.pos})
    if (t->size() < 3 || t->symbol(kPadId) != "<PAD>" || t->symbol(kUnkId) != "<UNK>" ||
        t->symbol(kRootId) != kRootSymbol)
      throw FormatError("vocabulary is missing reserved symbols");
  v.freeze();
  return v;
}

// Word embedding matrix |words| × dim. Rows for words present in the file
// are copied from it; every other row is drawn from uniform[−0.05, 0.05].
inline Tensor load_pretrained_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  Tensor table = uniform_tensor({vocab.words.size(), dim}, -0.05, 0.05, rng);
  std::string line;
  std::size_t line_no = 0;
  std::size_t file_dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string token;
    if (!(ls >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (ls >> field) {
      try {
        std::size_t used = 0;
        double x = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument(field);
        vec.push_back(x);
      } catch (const std::exception&) {
        throw FormatError("non-numeric embedding value '" + field + "'", line_no);
      }
    }
    // word2vec-style "count dim" header
    if (line_no == 1 && vec.size() == 1 && token.find_first_not_of("0123456789") == std::string::npos) continue;
    if (file_dim == 0) {
      file_dim = vec.size();
      if (file_dim != dim)
        throw ConfigError("embedding file has dimension " + std::to_string(file_dim) + " but d_w is " +
                          std::to_string(dim));
    } else if (vec.size() != file_dim) {
      throw FormatError("expected " + std::to_string(file_dim) + " values, found " + std::to_string(vec.size()),
                        line_no);
    }
    const int id = vocab.words.find(token);
    if (id < 0) continue;
    std::copy(vec.begin(), vec.end(), table.values.begin() + static_cast<std::ptrdiff_t>(id) * dim);
  }
  return table;
}

inline Tensor load_pretrained_embeddings(const std::string& path, const Vocabulary& vocab, std::size_t dim, Rng& rng) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_pretrained_embeddings(in, vocab, dim, rng);
}

}  // namespace stackptr
