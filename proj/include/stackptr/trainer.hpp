#pragma once

// Source-domain training loop: length-bucketed batches, Adam, gradient
// clipping, learning-rate decay on stalled dev LAS, early stopping.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stackptr/checkpoint.hpp"
#include "stackptr/config.hpp"
#include "stackptr/graph.hpp"
#include "stackptr/metrics.hpp"
#include "stackptr/optim.hpp"
#include "stackptr/parser.hpp"

namespace stackptr {

inline constexpr double kClipNorm = 5.0;

// Negative log-likelihood of one sentence divided by its token count.
// When `weight` is nonzero, weight·loss is back-propagated into the parameter gradients.
inline double sentence_loss(Parser& parser, const AnnotatedSentence& ex, bool training, Rng& rng, double weight = 0.0) {
  Graph g(weight != 0.0);
  PathLikelihood ll = parser.log_likelihood(g, ex, training, rng);
  const double n = static_cast<double>(ex.sentence.n());
  Var loss = g.scale(ll.total, -1.0 / n);
  if (weight != 0.0) g.backward(g.scale(loss, weight));
  return g.scalar(loss);
}

// Mean length-normalised negative log-likelihood over `batch`.
inline double compute_loss(Parser& parser, std::span<const AnnotatedSentence> batch, bool training, Rng& rng) {
  if (batch.empty()) throw InvariantError("compute_loss: empty batch");
  double total = 0.0;
  for (const auto& ex : batch) total += sentence_loss(parser, ex, training, rng);
  return total / static_cast<double>(batch.size());
}

// Zeroes gradients, then accumulates d(mean loss)/dθ over the batch.
inline double accumulate_gradients(Parser& parser, std::span<const AnnotatedSentence> batch, bool training, Rng& rng) {
  if (batch.empty()) throw InvariantError("accumulate_gradients: empty batch");
  parser.params().zero_grad();
  const double w = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) total += sentence_loss(parser, ex, training, rng, w);
  return total / static_cast<double>(batch.size());
}

inline double labeled_attachment(Parser& parser, std::span<const AnnotatedSentence> corpus) {
  std::vector<DependencyTree> gold;
  gold.reserve(corpus.size());
  for (const auto& ex : corpus) gold.push_back(ex.tree);
  auto pred = parser.parse_all(corpus);
  return attachment_scores(gold, pred).las;
}

// Sentence indices grouped into batches of similar length; batch order shuffled.
inline std::vector<std::vector<std::size_t>> make_batches(std::span<const AnnotatedSentence> corpus,
                                                          std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return corpus[a].sentence.n() < corpus[b].sentence.n();
  });
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size)
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                         order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  rng.shuffle(batches);
  return batches;
}

struct EpochReport {
  int epoch = 0;
  double mean_loss = 0.0;
  double dev_las = 0.0;
  double learning_rate = 0.0;
  bool improved = false;
};

struct TrainOptions {
  std::string run_name = "train";
  std::function<void(const EpochReport&)> on_epoch;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochReport> history;
  int best_epoch = 0;
  double best_dev_las = 0.0;
};

// Trains `parser` in place, returning the best-dev checkpoint. Provenance of
// the returned checkpoint is `prior_provenance` plus one line for this run.
inline TrainResult train_parser(Parser parser, std::span<const AnnotatedSentence> train,
                                std::span<const AnnotatedSentence> dev, const TrainOptions& opt = {},
                                std::vector<std::string> prior_provenance = {}) {
  if (train.empty()) throw InvariantError("training corpus is empty");
  if (dev.empty()) throw InvariantError("dev corpus is empty");
  const TrainConfig cfg = parser.config();
  const Rng root(cfg.seed);
  AdamState adam;
  double lr = cfg.learning_rate;
  TrainResult result;
  result.best = Checkpoint::from_parser(parser);
  result.best_dev_las = -1.0;
  int stale = 0;        // non-improving epochs since the best
  int since_decay = 0;  // non-improving epochs since the last decay or improvement

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    Rng epoch_rng = root.derive("epoch." + std::to_string(epoch));
    auto batches = make_batches(train, static_cast<std::size_t>(cfg.batch_size), epoch_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::vector<AnnotatedSentence> batch;
      for (std::size_t i : batches[b]) batch.push_back(train[i]);
      Rng drop_rng = epoch_rng.derive("batch." + std::to_string(b));
      const double loss = accumulate_gradients(parser, batch, true, drop_rng);
      const double norm = parser.params().grad_norm();
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << b << " (loss " << loss << ", gradient norm "
            << norm << "); parameter norms:";
        for (const auto& e : parser.params().entries()) {
          double sq = 0.0;
          for (double v : e.tensor.values) sq += v * v;
          msg << ' ' << e.name << '=' << std::sqrt(sq);
        }
        throw NumericError(msg.str());
      }
      clip_grad_norm(parser.params(), kClipNorm);
      adam_step(parser.params(), adam, lr);
      loss_sum += loss * static_cast<double>(batch.size());
      seen += batch.size();
    }

    EpochReport rep;
    rep.epoch = epoch;
    rep.mean_loss = loss_sum / static_cast<double>(seen);
    rep.dev_las = labeled_attachment(parser, dev);
    rep.learning_rate = lr;
    rep.improved = rep.dev_las > result.best_dev_las;
    result.history.push_back(rep);
    if (opt.on_epoch) opt.on_epoch(rep);

    if (rep.improved) {
      result.best_dev_las = rep.dev_las;
      result.best_epoch = epoch;
      result.best = Checkpoint::from_parser(parser);
      stale = 0;
      since_decay = 0;
    } else {
      if (++since_decay >= cfg.decay_patience) {
        lr *= cfg.decay_rate;
        since_decay = 0;
      }
      if (++stale >= cfg.patience) break;
    }
  }

  result.best.provenance = std::move(prior_provenance);
  std::ostringstream line;
  line << opt.run_name << " epochs=" << result.history.size() << " best_epoch=" << result.best_epoch
       << " dev_las=" << format1(std::max(result.best_dev_las, 0.0)) << " seed=" << cfg.seed;
  result.best.provenance.push_back(line.str());
  return result;
}

// Builds the vocabulary from `train`, initialises parameters and trains.
inline TrainResult train(const TrainConfig& config, std::span<const AnnotatedSentence> train_corpus,
                         std::span<const AnnotatedSentence> dev_corpus, const TrainOptions& opt = {},
                         const std::optional<Tensor>& pretrained_words = std::nullopt) {
  if (train_corpus.empty()) throw InvariantError("training corpus is empty");
  return train_parser(Parser::create(config, train_corpus, pretrained_words), train_corpus, dev_corpus, opt);
}

}  // namespace stackptr
