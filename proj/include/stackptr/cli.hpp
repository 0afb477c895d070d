#pragma once

// Command-line driver: train, finetune, parse, eval, surgery-inspect.
// Data goes to files or stdout, logs to stderr. Exit status: 0 success,
// 1 runtime failure, 2 usage error. Every verb that writes an artifact also
// writes "<artifact>.repro.txt" with the config, seed and input digests.

#include <openssl/evp.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stackptr/checkpoint.hpp"
#include "stackptr/metrics.hpp"
#include "stackptr/trainer.hpp"
#include "stackptr/transfer.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/vocabulary.hpp"

namespace stackptr::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

namespace fs = std::filesystem;

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

// Digest of a file, or of a checkpoint directory's files in a fixed order.
inline std::string path_digest(const fs::path& p) {
  if (!fs::is_directory(p)) return sha256_hex(read_file(p.string()));
  std::string all;
  for (const char* f : {"manifest.txt", "vocab.txt", "params.bin"}) {
    all += f;
    all += '\0';
    all += read_file((p / f).string());
  }
  return sha256_hex(all);
}

inline fs::path repro_path(const fs::path& artifact) {
  fs::path p = artifact;
  if (!p.has_filename()) p = p.parent_path();
  p += ".repro.txt";
  return p;
}

struct ReproRecord {
  std::string verb;
  std::vector<std::string> argv;
  std::vector<std::pair<std::string, std::string>> settings;  // config snapshot
  std::vector<std::pair<std::string, fs::path>> inputs;
  std::optional<std::uint64_t> seed;

  std::string text(const fs::path& output) const {
    std::string out = "verb=" + verb + "\nargv=";
    for (std::size_t i = 0; i < argv.size(); ++i) out += (i ? " " : "") + argv[i];
    out += "\n";
    if (seed) out += "seed=" + std::to_string(*seed) + "\n";
    for (const auto& [k, v] : settings) out += "config." + k + "=" + v + "\n";
    for (const auto& [role, p] : inputs) out += "input." + role + "=" + p.string() + " sha256=" + path_digest(p) + "\n";
    out += "output=" + output.string() + " sha256=" + path_digest(output) + "\n";
    return out;
  }
};

// Paths created by the current command; removed if the command fails.
class OutputGuard {
 public:
  void track(fs::path p) { paths_.push_back(std::move(p)); }
  void commit() { paths_.clear(); }
  ~OutputGuard() {
    std::error_code ec;
    for (const auto& p : paths_) fs::remove_all(p, ec);
  }

 private:
  std::vector<fs::path> paths_;
};

inline void write_atomic(const fs::path& p, const std::string& data) {
  fs::path tmp = p;
  tmp += ".partial";
  try {
    detail::write_text(tmp, data);
    fs::rename(tmp, p);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

struct Settings {
  TrainConfig config;
  SurgeryPlan plan;
};

// Config file first, then "key=value" overrides in order.
inline Settings load_settings(const std::string& config_path, const std::vector<std::string>& overrides,
                              Settings base = {}) {
  std::vector<std::pair<std::string, std::string>> kv;
  if (!config_path.empty()) kv = parse_key_values(read_file(config_path));
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    kv.emplace_back(o.substr(0, eq), o.substr(eq + 1));
  }
  for (const auto& [k, v] : kv)
    if (!base.config.set(k, v) && !base.plan.set(k, v)) throw ConfigError("unknown configuration key '" + k + "'");
  base.config.validate();
  return base;
}

struct Logger {
  std::ostream& err;
  std::string verb;
  void operator()(const std::string& msg) const { err << "[" << verb << "] " << msg << std::endl; }
};

inline TrainOptions epoch_logger(const Logger& log, const std::string& run) {
  TrainOptions opt;
  opt.run_name = run;
  opt.on_epoch = [log](const EpochReport& r) {
    std::ostringstream os;
    os << "epoch " << r.epoch << " loss " << std::setprecision(6) << r.mean_loss << " dev LAS " << format1(r.dev_las)
       << " lr " << r.learning_rate << (r.improved ? " *" : "");
    log(os.str());
  };
  return opt;
}

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  bool allow_multiple_roots = false;
};

inline void add_config_options(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key=value configuration file");
  cmd->add_option("--set", a.overrides, "configuration override key=value (repeatable)");
  cmd->add_flag("--allow-multiple-roots", a.allow_multiple_roots, "accept training trees with several ROOT children");
}

inline std::string summary_line(const TrainResult& res, const std::string& what) {
  if (res.history.empty()) return "no epochs run";
  return "best " + what + " LAS " + format1(res.best_dev_las) + " at epoch " + std::to_string(res.best_epoch);
}

inline void record(const fs::path& artifact, ReproRecord rec, OutputGuard& guard) {
  const fs::path rp = repro_path(artifact);
  guard.track(rp);
  write_atomic(rp, rec.text(artifact));
}

inline int cmd_train(const CommonArgs& c, const std::string& train_path, const std::string& dev_path,
                     const std::string& out, const std::string& pretrained, const ReproRecord& base, const Logger& log) {
  Settings s = load_settings(c.config, c.overrides);
  const ConllOptions copt{.single_root = !c.allow_multiple_roots};
  auto train_set = read_conll_file(train_path, copt);
  auto dev_set = read_conll_file(dev_path, copt);
  log("read " + std::to_string(train_set.size()) + " training and " + std::to_string(dev_set.size()) +
      " dev sentences");

  Vocabulary vocab = build_vocabulary(train_set, static_cast<std::size_t>(s.config.min_word_count));
  std::optional<Tensor> emb;
  if (!pretrained.empty()) {
    Rng rng = Rng(s.config.seed).derive("pretrained");
    emb = load_pretrained_embeddings(pretrained, vocab, static_cast<std::size_t>(s.config.d_w), rng);
  }
  ParameterStore params = init_parameters(s.config, vocab, emb);
  log("vocabulary: " + std::to_string(vocab.words.size()) + " words, " + std::to_string(vocab.labels.size()) +
      " labels; " + std::to_string(params.scalar_count()) + " parameters");
  Parser parser(s.config, std::move(vocab), std::move(params));
  TrainResult res = train_parser(std::move(parser), train_set, dev_set, epoch_logger(log, "train"),
                                 {"corpus train=" + train_path + " dev=" + dev_path});

  OutputGuard guard;
  guard.track(out);
  save_checkpoint(res.best, out);
  ReproRecord rec = base;
  rec.seed = s.config.seed;
  rec.settings = s.config.items();
  rec.inputs = {{"train", train_path}, {"dev", dev_path}};
  if (!pretrained.empty()) rec.inputs.emplace_back("pretrained", pretrained);
  record(out, rec, guard);
  guard.commit();
  log(summary_line(res, "dev") + "; wrote " + out);
  return kExitOk;
}

inline int cmd_finetune(const CommonArgs& c, const std::string& source_path, const std::string& train_path,
                        const std::string& dev_path, const std::string& out, const std::string& retain,
                        const std::string& reinit, const ReproRecord& base, const Logger& log) {
  Checkpoint source = load_checkpoint(source_path);
  Settings s = load_settings(c.config, c.overrides, Settings{source.config, SurgeryPlan{}});
  if (!retain.empty()) s.plan.retain_prefixes = split_commas(retain);
  if (!reinit.empty()) s.plan.reinit_prefixes = split_commas(reinit);
  const ConllOptions copt{.single_root = !c.allow_multiple_roots};
  auto train_set = read_conll_file(train_path, copt);
  auto dev_set = read_conll_file(dev_path, copt);

  Checkpoint tp = transplant(source, train_set, s.plan, s.config.seed);
  log(tp.provenance.back());
  TrainResult res = finetune(tp, train_set, dev_set, s.config, epoch_logger(log, "finetune"));

  OutputGuard guard;
  guard.track(out);
  save_checkpoint(res.best, out);
  ReproRecord rec = base;
  rec.seed = s.config.seed;
  rec.settings = res.best.config.items();
  rec.settings.emplace_back("retain_prefixes", join_commas(s.plan.retain_prefixes));
  rec.settings.emplace_back("reinit_prefixes", join_commas(s.plan.reinit_prefixes));
  rec.inputs = {{"source", source_path}, {"train", train_path}, {"dev", dev_path}};
  record(out, rec, guard);
  guard.commit();
  log(summary_line(res, "target dev") + "; wrote " + out);
  return kExitOk;
}

inline int cmd_parse(const std::string& model, const std::string& input, const std::string& output,
                     const ReproRecord& base, const Logger& log) {
  Parser parser = load_checkpoint(model).to_parser();
  auto corpus = read_conll_file(input, {.single_root = false, .heads_optional = true});
  for (auto& ex : corpus) ex.tree = parser.parse(ex.sentence);
  log("parsed " + std::to_string(corpus.size()) + " sentences");

  OutputGuard guard;
  guard.track(output);
  write_atomic(output, write_conll(corpus));
  ReproRecord rec = base;
  rec.seed = parser.config().seed;
  rec.settings = parser.config().items();
  rec.inputs = {{"model", model}, {"input", input}};
  record(output, rec, guard);
  guard.commit();
  return kExitOk;
}

inline int cmd_eval(const std::string& gold, const std::string& pred, const std::vector<std::string>& domains,
                    const std::vector<std::string>& exclude_pos, const std::string& out, const ReproRecord& base,
                    std::ostream& os) {
  struct Pair {
    std::string name, gold, pred;
  };
  std::vector<Pair> pairs;
  if (!gold.empty() || !pred.empty()) {
    if (gold.empty() || pred.empty()) throw CLI::ValidationError("--gold and --pred must be given together");
    pairs.push_back({"all", gold, pred});
  }
  for (const auto& d : domains) {
    const auto eq = d.find('='), comma = d.find(',');
    if (eq == std::string::npos || comma == std::string::npos || comma < eq)
      throw CLI::ValidationError("--domains expects name=gold.conll,pred.conll, got '" + d + "'");
    pairs.push_back({d.substr(0, eq), d.substr(eq + 1, comma - eq - 1), d.substr(comma + 1)});
  }
  if (pairs.empty()) throw CLI::ValidationError("nothing to evaluate: give --gold/--pred or --domains");

  const std::set<std::string> excluded(exclude_pos.begin(), exclude_pos.end());
  EvalReport report;
  ReproRecord rec = base;
  for (const auto& p : pairs) {
    auto g = read_conll_file(p.gold, {.single_root = false});
    auto q = read_conll_file(p.pred, {.single_root = false});
    std::vector<DependencyTree> gt, pt;
    std::vector<Sentence> sents;
    for (const auto& ex : g) {
      gt.push_back(ex.tree);
      sents.push_back(ex.sentence);
    }
    for (const auto& ex : q) pt.push_back(ex.tree);
    report.domains.push_back({p.name, count_attachments(gt, pt, sents, excluded)});
    rec.inputs.emplace_back(p.name + ".gold", p.gold);
    rec.inputs.emplace_back(p.name + ".pred", p.pred);
  }
  const std::string text = report.table() + "\n" + report.key_values();
  os << text;
  if (!out.empty()) {
    OutputGuard guard;
    guard.track(out);
    write_atomic(out, text);
    record(out, rec, guard);
    guard.commit();
  }
  return kExitOk;
}

// One line per tensor of `target`: equal, equal+N (embedding table grown by
// N rows with the old rows untouched), changed (max abs difference), new.
inline std::string surgery_report(const Checkpoint& source, const Checkpoint& target) {
  std::ostringstream os;
  std::map<std::string, int> tally;
  for (const auto& e : target.params.entries()) {
    os << e.name << '\t' << shape_string(e.tensor.shape) << '\t';
    std::string status;
    if (!source.params.contains(e.name)) {
      status = "new";
      os << status;
    } else {
      const Tensor& s = source.params.at(e.name);
      const std::size_t common = std::min(s.size(), e.tensor.size());
      const bool grown = s.shape != e.tensor.shape && s.cols() == e.tensor.cols() && s.rows() < e.tensor.rows();
      double diff = 0.0;
      if (s.shape == e.tensor.shape || grown)
        for (std::size_t i = 0; i < common; ++i) diff = std::max(diff, std::abs(s.values[i] - e.tensor.values[i]));
      if (s.shape != e.tensor.shape && !grown) {
        status = "changed";
        os << status << " (shape was " << shape_string(s.shape) << ")";
      } else if (diff == 0.0) {
        status = "equal";
        os << status;
        if (grown) os << " +" << e.tensor.rows() - s.rows() << " rows";
      } else {
        status = "changed";
        os << status << " max|diff|=" << diff;
      }
    }
    ++tally[status];
    os << '\n';
  }
  for (const auto& e : source.params.entries())
    if (!target.params.contains(e.name)) {
      os << e.name << '\t' << shape_string(e.tensor.shape) << "\tremoved\n";
      ++tally["removed"];
    }
  os << "summary";
  for (const auto& [k, v] : tally) os << ' ' << k << '=' << v;
  os << '\n';
  return os.str();
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  static const std::vector<std::string> verbs{"train", "finetune", "parse", "eval", "surgery-inspect"};
  const std::string usage =
      "usage: stackptr <train|finetune|parse|eval|surgery-inspect> [options]; --help for details";
  if (argc < 2) {
    err << usage << '\n';
    return kExitUsage;
  }
  const std::string verb = argv[1];
  if (verb != "--help" && verb != "-h" && std::find(verbs.begin(), verbs.end(), verb) == verbs.end()) {
    err << "stackptr: unknown command '" << verb << "'\n" << usage << '\n';
    return kExitUsage;
  }

  CLI::App app{"stack-pointer dependency parser with self-attention and transfer learning", "stackptr"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string train_path, dev_path, out_path, pretrained, source, retain, reinit;
  std::string model, input, output, gold, pred, target;
  std::vector<std::string> domains, exclude_pos;

  auto* train_cmd = app.add_subcommand("train", "train a parser on a source treebank");
  add_config_options(train_cmd, common);
  train_cmd->add_option("--train", train_path, "training treebank (CoNLL-X)")->required();
  train_cmd->add_option("--dev", dev_path, "dev treebank (CoNLL-X)")->required();
  train_cmd->add_option("--out", out_path, "checkpoint directory")->required();
  train_cmd->add_option("--pretrained", pretrained, "word vectors, one 'token v1 .. v_dw' per line");

  auto* ft_cmd = app.add_subcommand("finetune", "transplant a checkpoint into a target domain and fine-tune");
  add_config_options(ft_cmd, common);
  ft_cmd->add_option("--source", source, "source checkpoint directory")->required();
  ft_cmd->add_option("--train", train_path, "target training treebank")->required();
  ft_cmd->add_option("--dev", dev_path, "target dev treebank")->required();
  ft_cmd->add_option("--out", out_path, "output checkpoint directory")->required();
  ft_cmd->add_option("--retain", retain, "comma-separated parameter prefixes copied from the source");
  ft_cmd->add_option("--reinit", reinit, "comma-separated parameter prefixes initialised afresh");

  auto* parse_cmd = app.add_subcommand("parse", "parse a CoNLL-X file, overwriting HEAD and DEPREL");
  parse_cmd->add_option("--model", model, "checkpoint directory")->required();
  parse_cmd->add_option("--input", input, "input CoNLL-X file")->required();
  parse_cmd->add_option("--output", output, "output CoNLL-X file")->required();

  auto* eval_cmd = app.add_subcommand("eval", "attachment scores of predicted against gold trees");
  eval_cmd->add_option("--gold", gold, "gold CoNLL-X file");
  eval_cmd->add_option("--pred", pred, "predicted CoNLL-X file");
  eval_cmd->add_option("--domains", domains, "name=gold.conll,pred.conll (repeatable)");
  eval_cmd->add_option("--exclude-pos", exclude_pos, "POS tags left out of the token count")->delimiter(',');
  eval_cmd->add_option("--out", out_path, "also write the report to this file");

  auto* inspect_cmd = app.add_subcommand("surgery-inspect", "compare the tensors of two checkpoints");
  inspect_cmd->add_option("--source", source, "source checkpoint")->required();
  inspect_cmd->add_option("--target", target, "target checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  ReproRecord base;
  base.verb = verb;
  for (int i = 0; i < argc; ++i) base.argv.emplace_back(argv[i]);
  const Logger log{err, verb};
  try {
    if (*train_cmd) return cmd_train(common, train_path, dev_path, out_path, pretrained, base, log);
    if (*ft_cmd) return cmd_finetune(common, source, train_path, dev_path, out_path, retain, reinit, base, log);
    if (*parse_cmd) return cmd_parse(model, input, output, base, log);
    if (*eval_cmd) return cmd_eval(gold, pred, domains, exclude_pos, out_path, base, out);
    if (*inspect_cmd) {
      out << surgery_report(load_checkpoint(source), load_checkpoint(target));
      return kExitOk;
    }
  } catch (const CLI::ValidationError& e) {
    err << "stackptr " << verb << ": " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "stackptr " << verb << ": " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace stackptr::cli
