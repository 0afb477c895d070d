#pragma once

// Training hyperparameters and the flat key=value configuration format.

#include <charconv>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "stackptr/errors.hpp"

namespace stackptr {

enum class ChildOrder { inside_out, left2right, right2left };
enum class AttentionScale { per_head, model_dim };

inline std::string to_string(ChildOrder o) {
  switch (o) {
    case ChildOrder::inside_out: return "inside_out";
    case ChildOrder::left2right: return "left2right";
    case ChildOrder::right2left: return "right2left";
  }
  return "?";
}

inline std::string to_string(AttentionScale s) { return s == AttentionScale::per_head ? "per_head" : "model_dim"; }

inline std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

struct TrainConfig {
  int d_w = 300;
  int char_dim = 50;
  int pos_dim = 50;
  int r = 4;
  int d_h = 256;
  int batch_size = 64;
  int num_filters = 50;
  double learning_rate = 0.001;
  double decay_rate = 0.75;
  int decay_patience = 1;  // consecutive non-improving dev epochs per decay
  double p_rnn = 0.5;
  double p_in = 0.5;
  double p_out = 0.5;
  int max_epochs = 100;
  int patience = 10;
  std::uint64_t seed = 0;
  ChildOrder child_order = ChildOrder::inside_out;
  AttentionScale attention_scale = AttentionScale::per_head;
  bool single_root = false;
  int min_word_count = 2;

  // Width of one token row: word + char-CNN + POS.
  std::size_t d_model() const { return static_cast<std::size_t>(d_w + num_filters + pos_dim); }
  std::size_t encoder_dim() const { return static_cast<std::size_t>(2 * d_h); }
  std::size_t decoder_hidden() const { return static_cast<std::size_t>(2 * d_h); }
  std::size_t arc_dim() const { return static_cast<std::size_t>(2 * d_h); }
  std::size_t label_dim() const { return static_cast<std::size_t>(d_h > 1 ? d_h / 2 : 1); }

  void validate() const {
    for (int v : {d_w, char_dim, pos_dim, r, d_h, batch_size, num_filters})
      if (v <= 0) throw ConfigError("dimensions, head count and batch size must be positive");
    if (d_model() % static_cast<std::size_t>(r) != 0)
      throw ConfigError("token width " + std::to_string(d_model()) + " is not divisible by r=" + std::to_string(r));
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ConfigError("decay_rate must lie in (0, 1]");
    for (double p : {p_rnn, p_in, p_out})
      if (p < 0.0 || p >= 1.0) throw ConfigError("dropout rates must lie in [0, 1)");
    if (max_epochs < 0 || patience < 0 || min_word_count < 0) throw ConfigError("negative epoch/patience/count");
    if (decay_patience < 1) throw ConfigError("decay_patience must be at least 1");
  }

  // Returns false when `key` is not a TrainConfig field.
  bool set(std::string_view key, std::string_view value);

  std::vector<std::pair<std::string, std::string>> items() const {
    return {{"d_w", std::to_string(d_w)},
            {"char_dim", std::to_string(char_dim)},
            {"pos_dim", std::to_string(pos_dim)},
            {"r", std::to_string(r)},
            {"d_h", std::to_string(d_h)},
            {"batch_size", std::to_string(batch_size)},
            {"num_filters", std::to_string(num_filters)},
            {"learning_rate", format_double(learning_rate)},
            {"decay_rate", format_double(decay_rate)},
            {"decay_patience", std::to_string(decay_patience)},
            {"p_rnn", format_double(p_rnn)},
            {"p_in", format_double(p_in)},
            {"p_out", format_double(p_out)},
            {"max_epochs", std::to_string(max_epochs)},
            {"patience", std::to_string(patience)},
            {"seed", std::to_string(seed)},
            {"child_order", to_string(child_order)},
            {"attention_scale", to_string(attention_scale)},
            {"single_root", single_root ? "true" : "false"},
            {"min_word_count", std::to_string(min_word_count)}};
  }

  std::string to_text() const {
    std::string out;
    for (const auto& [k, v] : items()) out += k + "=" + v + "\n";
    return out;
  }

  friend bool operator==(const TrainConfig& a, const TrainConfig& b) { return a.items() == b.items(); }
};

namespace detail {

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("invalid value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

inline bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("invalid boolean '" + std::string(v) + "' for " + std::string(key));
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

inline bool TrainConfig::set(std::string_view key, std::string_view v) {
  using detail::parse_number;
  if (key == "d_w") d_w = parse_number<int>(key, v);
  else if (key == "char_dim") char_dim = parse_number<int>(key, v);
  else if (key == "pos_dim") pos_dim = parse_number<int>(key, v);
  else if (key == "r") r = parse_number<int>(key, v);
  else if (key == "d_h") d_h = parse_number<int>(key, v);
  else if (key == "batch_size") batch_size = parse_number<int>(key, v);
  else if (key == "num_filters") num_filters = parse_number<int>(key, v);
  else if (key == "learning_rate") learning_rate = parse_number<double>(key, v);
  else if (key == "decay_rate") decay_rate = parse_number<double>(key, v);
  else if (key == "decay_patience") decay_patience = parse_number<int>(key, v);
  else if (key == "p_rnn") p_rnn = parse_number<double>(key, v);
  else if (key == "p_in") p_in = parse_number<double>(key, v);
  else if (key == "p_out") p_out = parse_number<double>(key, v);
  else if (key == "max_epochs") max_epochs = parse_number<int>(key, v);
  else if (key == "patience") patience = parse_number<int>(key, v);
  else if (key == "seed") seed = parse_number<std::uint64_t>(key, v);
  else if (key == "min_word_count") min_word_count = parse_number<int>(key, v);
  else if (key == "single_root") single_root = detail::parse_bool(key, v);
  else if (key == "child_order") {
    if (v == "inside_out") child_order = ChildOrder::inside_out;
    else if (v == "left2right") child_order = ChildOrder::left2right;
    else if (v == "right2left") child_order = ChildOrder::right2left;
    else throw ConfigError("child_order must be inside_out, left2right or right2left");
  } else if (key == "attention_scale") {
    if (v == "per_head") attention_scale = AttentionScale::per_head;
    else if (v == "model_dim") attention_scale = AttentionScale::model_dim;
    else throw ConfigError("attention_scale must be per_head or model_dim");
  } else {
    return false;
  }
  return true;
}

// Flat "key=value" lines; blank lines and lines starting with '#' are skipped.
inline std::vector<std::pair<std::string, std::string>> parse_key_values(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) throw FormatError("expected key=value", line_no);
    out.emplace_back(std::string(detail::trim(s.substr(0, eq))), std::string(detail::trim(s.substr(eq + 1))));
  }
  return out;
}

inline TrainConfig config_from_text(std::string_view text) {
  TrainConfig c;
  for (const auto& [k, v] : parse_key_values(text))
    if (!c.set(k, v)) throw ConfigError("unknown configuration key '" + k + "'");
  c.validate();
  return c;
}

}  // namespace stackptr
