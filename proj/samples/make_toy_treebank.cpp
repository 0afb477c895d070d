// Writes the bundled toy treebanks:
//   toy_train.conll        50 sentences for the overfit check
//   source_{train,dev}     a source domain
//   target_{train,dev}     a target domain sharing the grammar and 60% of the open-class words
#include <fstream>
#include <iostream>
#include <string>

#include "stackptr/synthetic.hpp"

using namespace stackptr;

static void save(const std::string& path, const std::vector<AnnotatedSentence>& corpus) {
  std::ofstream(path, std::ios::binary) << write_conll(corpus);
  std::cerr << "wrote " << corpus.size() << " sentences to " << path << '\n';
}

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "data";
  {
    Rng rng(7);
    save(dir + "/toy_train.conll", generate_corpus(make_lexicon(1), 50, rng));
  }
  const Lexicon source = make_lexicon(100);
  const Lexicon target = derive_domain(source, 0.6, 200);
  Rng rng = Rng(0).derive("data");
  save(dir + "/source_train.conll", generate_corpus(source, 150, rng));
  save(dir + "/source_dev.conll", generate_corpus(source, 30, rng));
  save(dir + "/target_train.conll", generate_corpus(target, 30, rng));
  save(dir + "/target_dev.conll", generate_corpus(target, 50, rng));
}
