#pragma once

// Network-based transfer: copy the source network's embeddings, encoder and
// decoder into a target-domain model, re-initialise the biaffine scorers,
// then fine-tune the whole network on target data.

#include <algorithm>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "stackptr/checkpoint.hpp"
#include "stackptr/config.hpp"
#include "stackptr/errors.hpp"
#include "stackptr/parameters.hpp"
#include "stackptr/trainer.hpp"
#include "stackptr/vocabulary.hpp"

namespace stackptr {

inline std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t comma = s.find(',', start);
    if (comma == std::string_view::npos) comma = s.size();
    auto item = detail::trim(s.substr(start, comma - start));
    if (!item.empty()) out.emplace_back(item);
    start = comma + 1;
  }
  return out;
}

inline std::string join_commas(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

struct SurgeryPlan {
  std::vector<std::string> retain_prefixes{"embeddings.", "encoder.", "decoder."};
  std::vector<std::string> reinit_prefixes{"biaffine."};

  // Accepts retain_prefixes / reinit_prefixes; returns false for other keys.
  bool set(std::string_view key, std::string_view value) {
    if (key == "retain_prefixes") retain_prefixes = split_commas(value);
    else if (key == "reinit_prefixes") reinit_prefixes = split_commas(value);
    else return false;
    return true;
  }

  enum class Action { retain, reinit };

  Action action_for(const std::string& name) const {
    auto matches = [&](const std::vector<std::string>& ps) {
      return std::count_if(ps.begin(), ps.end(), [&](const std::string& p) { return starts_with(name, p); });
    };
    const auto r = matches(retain_prefixes), z = matches(reinit_prefixes);
    if (r + z == 0) throw ConfigError("incomplete surgery plan: no prefix covers " + name);
    if (r + z > 1) throw ConfigError("ambiguous surgery plan: " + name + " matches several prefixes");
    return r ? Action::retain : Action::reinit;
  }

  // Every name must match exactly one prefix of the two sets.
  void check_coverage(const std::vector<std::string>& names) const {
    for (const auto& p : retain_prefixes)
      if (std::find(reinit_prefixes.begin(), reinit_prefixes.end(), p) != reinit_prefixes.end())
        throw ConfigError("surgery plan lists " + p + " as both retained and re-initialised");
    for (const auto& n : names) action_for(n);
  }
};

// Target-domain model built from `source`: vocabulary extended with target
// symbols, retained tensors copied bitwise (embedding tables gain fresh rows
// for new symbols), re-initialised tensors drawn fresh from `seed`.
inline Checkpoint transplant(const Checkpoint& source, std::span<const AnnotatedSentence> target_train,
                             const SurgeryPlan& plan, std::uint64_t seed) {
  if (target_train.empty()) throw InvariantError("target corpus is empty");
  plan.check_coverage(source.params.names());

  Vocabulary vocab =
      extend_vocabulary(source.vocab, target_train, static_cast<std::size_t>(source.config.min_word_count));
  if (vocab.labels.size() < source.vocab.labels.size()) throw InvariantError("label inventory would shrink");

  // Fresh draws come from a transplant-specific stream, so a re-initialised
  // tensor differs from the source's initial value even when seeds coincide.
  TrainConfig draw = source.config;
  draw.seed = Rng(seed).derive("transplant").next();
  ParameterStore fresh = init_parameters(draw, vocab);
  fresh.rng_seed = seed;
  TrainConfig cfg = source.config;
  cfg.seed = seed;

  for (auto& e : fresh.entries()) {
    if (!source.params.contains(e.name)) throw InvariantError("source checkpoint lacks " + e.name);
    if (plan.action_for(e.name) == SurgeryPlan::Action::reinit) continue;
    const Tensor& src = source.params.at(e.name);
    Tensor& dst = e.tensor;
    if (src.shape == dst.shape) {
      dst.values = src.values;
    } else if (starts_with(e.name, "embeddings.") && src.cols() == dst.cols() && src.rows() <= dst.rows()) {
      std::copy(src.values.begin(), src.values.end(), dst.values.begin());
    } else {
      throw InvariantError("cannot retain " + e.name + ": shape [" + shape_string(src.shape) + "] vs [" +
                           shape_string(dst.shape) + "]");
    }
  }

  Checkpoint out;
  out.params = std::move(fresh);
  out.config = cfg;
  out.provenance = source.provenance;
  std::ostringstream line;
  line << "transplant retain=" << join_commas(plan.retain_prefixes) << " reinit=" << join_commas(plan.reinit_prefixes)
       << " seed=" << seed << " new_words=" << vocab.words.size() - source.vocab.words.size()
       << " new_chars=" << vocab.chars.size() - source.vocab.chars.size()
       << " new_pos=" << vocab.pos.size() - source.vocab.pos.size()
       << " new_labels=" << vocab.labels.size() - source.vocab.labels.size();
  out.provenance.push_back(line.str());
  out.vocab = std::move(vocab);
  return out;
}

// Training-schedule fields of `schedule` applied over an existing model config;
// architecture fields of the model are kept.
inline TrainConfig with_schedule(TrainConfig model, const TrainConfig& schedule) {
  model.batch_size = schedule.batch_size;
  model.learning_rate = schedule.learning_rate;
  model.decay_rate = schedule.decay_rate;
  model.decay_patience = schedule.decay_patience;
  model.p_rnn = schedule.p_rnn;
  model.p_in = schedule.p_in;
  model.p_out = schedule.p_out;
  model.max_epochs = schedule.max_epochs;
  model.patience = schedule.patience;
  model.seed = schedule.seed;
  return model;
}

// Whole-network fine-tuning from a transplanted checkpoint with fresh
// optimizer state. Returns the best-target-dev checkpoint.
inline TrainResult finetune(const Checkpoint& transplanted, std::span<const AnnotatedSentence> target_train,
                            std::span<const AnnotatedSentence> target_dev, const TrainConfig& schedule,
                            TrainOptions opt = {}) {
  Parser parser(with_schedule(transplanted.config, schedule), transplanted.vocab, transplanted.params);
  if (opt.run_name == "train") opt.run_name = "finetune";
  return train_parser(std::move(parser), target_train, target_dev, opt, transplanted.provenance);
}

}  // namespace stackptr
