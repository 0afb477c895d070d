// Source training, transplant, fine-tune, and a from-scratch baseline on a
// synthetic domain pair. Prints target dev LAS for both.
#include <iostream>

#include "stackptr/stackptr.hpp"

using namespace stackptr;

int main(int argc, char** argv) {
  const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 0;
  const Lexicon source_lex = make_lexicon(100 + seed);
  const Lexicon target_lex = derive_domain(source_lex, 0.6, 200 + seed);
  Rng rng = Rng(seed).derive("data");
  auto source_train = generate_corpus(source_lex, 150, rng);
  auto source_dev = generate_corpus(source_lex, 30, rng);
  auto target_train = generate_corpus(target_lex, 30, rng);
  auto target_dev = generate_corpus(target_lex, 50, rng);

  TrainConfig cfg;
  cfg.d_w = 32;
  cfg.d_h = 32;
  cfg.batch_size = 8;
  cfg.decay_patience = 5;
  cfg.max_epochs = 40;
  cfg.patience = 15;
  cfg.seed = seed;

  TrainResult src = train(cfg, source_train, source_dev);
  std::cout << "source dev LAS " << format1(src.best_dev_las) << '\n';

  TrainConfig target_cfg = cfg;
  target_cfg.patience = target_cfg.max_epochs;
  Checkpoint moved = transplant(src.best, target_train, SurgeryPlan{}, seed);
  TrainResult tuned = finetune(moved, target_train, target_dev, target_cfg);
  TrainResult scratch = train(target_cfg, target_train, target_dev);
  std::cout << "target dev LAS fine-tuned " << format1(tuned.best_dev_las) << " from scratch "
            << format1(scratch.best_dev_las) << '\n';
  for (const auto& line : tuned.best.provenance) std::cout << "  " << line << '\n';
}
