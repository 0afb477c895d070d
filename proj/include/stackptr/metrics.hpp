#pragma once

// Attachment scores and cross-domain averaging.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stackptr/errors.hpp"
#include "stackptr/treebank.hpp"

namespace stackptr {

struct AttachmentCounts {
  std::size_t tokens = 0;
  std::size_t correct_heads = 0;
  std::size_t correct_labeled = 0;

  double uas() const { return tokens ? 100.0 * static_cast<double>(correct_heads) / static_cast<double>(tokens) : 0.0; }
  double las() const {
    return tokens ? 100.0 * static_cast<double>(correct_labeled) / static_cast<double>(tokens) : 0.0;
  }
};

struct AttachmentScores {
  double uas = 0.0;
  double las = 0.0;
};

// Counts every non-ROOT token unless its POS is in `excluded_pos`.
inline AttachmentCounts count_attachments(std::span<const DependencyTree> gold, std::span<const DependencyTree> predicted,
                                          std::span<const Sentence> sentences = {},
                                          const std::set<std::string>& excluded_pos = {}) {
  if (gold.size() != predicted.size())
    throw InvariantError("alignment error: sentence " + std::to_string(std::min(gold.size(), predicted.size())) +
                         " has no counterpart (" + std::to_string(gold.size()) + " gold vs " +
                         std::to_string(predicted.size()) + " predicted)");
  if (!excluded_pos.empty() && sentences.size() != gold.size())
    throw InvariantError("alignment error: POS exclusion needs the sentences");
  AttachmentCounts c;
  for (std::size_t s = 0; s < gold.size(); ++s) {
    const auto& g = gold[s];
    const auto& p = predicted[s];
    if (g.n() != p.n()) throw InvariantError("alignment error: sentence " + std::to_string(s) + " length differs");
    for (std::size_t i = 1; i <= g.n(); ++i) {
      if (!excluded_pos.empty() && excluded_pos.count(sentences[s].tokens[i].pos)) continue;
      ++c.tokens;
      if (g.heads[i] == p.heads[i]) {
        ++c.correct_heads;
        if (g.labels[i] == p.labels[i]) ++c.correct_labeled;
      }
    }
  }
  return c;
}

inline AttachmentScores attachment_scores(std::span<const DependencyTree> gold,
                                          std::span<const DependencyTree> predicted) {
  auto c = count_attachments(gold, predicted);
  return {c.uas(), c.las()};
}

// Half-up rounding to one decimal.
inline double round1(double x) { return std::floor(x * 10.0 + 0.5 + 1e-9) / 10.0; }

inline std::string format1(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", round1(x));
  return buf;
}

// Unweighted mean of per-domain LAS, rounded to one decimal.
inline double average_domains(std::span<const double> las_by_domain) {
  if (las_by_domain.empty()) throw InvariantError("average_domains: no domains");
  double s = 0.0;
  for (double x : las_by_domain) s += x;
  return round1(s / static_cast<double>(las_by_domain.size()));
}

struct DomainReport {
  std::string domain;
  AttachmentCounts counts;
};

struct EvalReport {
  std::vector<DomainReport> domains;

  double average_las() const {
    std::vector<double> las;
    for (const auto& d : domains) las.push_back(d.counts.las());
    return average_domains(las);
  }

  std::string table() const {
    std::string out = "domain\ttokens\tUAS\tLAS\n";
    for (const auto& d : domains)
      out += d.domain + "\t" + std::to_string(d.counts.tokens) + "\t" + format1(d.counts.uas()) + "\t" +
             format1(d.counts.las()) + "\n";
    out += "average\t-\t-\t" + format1(average_las()) + "\n";
    return out;
  }

  std::string key_values() const {
    std::string out;
    for (const auto& d : domains) {
      out += "domain=" + d.domain + "\n";
      out += d.domain + ".tokens=" + std::to_string(d.counts.tokens) + "\n";
      out += d.domain + ".correct_heads=" + std::to_string(d.counts.correct_heads) + "\n";
      out += d.domain + ".correct_heads_and_labels=" + std::to_string(d.counts.correct_labeled) + "\n";
      out += d.domain + ".UAS=" + format1(d.counts.uas()) + "\n";
      out += d.domain + ".LAS=" + format1(d.counts.las()) + "\n";
    }
    out += "average.LAS=" + format1(average_las()) + "\n";
    return out;
  }
};

}  // namespace stackptr
