#include "taksie/gen/text.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

#include "taksie/numerics/diagnostics.hpp"
#include "taksie/numerics/rng.hpp"
#include "taksie/sim/world.hpp"

namespace taksie::text {
namespace {

constexpr std::pair<std::string_view, std::string_view> kAntonyms[] = {
    {"open", "close"}, {"left", "right"}, {"on", "off"}, {"lift", "place"}};

}  // namespace

std::vector<std::string> tokenize(std::string_view command) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < command.size()) {
    while (i < command.size() && command[i] == ' ') ++i;
    std::size_t j = i;
    while (j < command.size() && command[j] != ' ') ++j;
    if (j > i) out.emplace_back(command.substr(i, j - i));
    i = j;
  }
  return out;
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> vocab = [] {
    std::set<std::string> words;
    for (const auto& t : sim::all_tasks()) {
      for (auto& w : tokenize(t.command)) words.insert(w);
      for (auto& w : tokenize(t.negative)) words.insert(w);
    }
    return std::vector<std::string>(words.begin(), words.end());
  }();
  return vocab;
}

std::size_t token_id(std::string_view token) {
  const auto& v = vocabulary();
  const auto it = std::lower_bound(v.begin(), v.end(), token);
  if (it == v.end() || *it != token) throw std::invalid_argument("unknown token '" + std::string(token) + "'");
  return static_cast<std::size_t>(it - v.begin());
}

num::ParameterSet text_init(std::uint64_t seed) {
  num::Rng rng(num::derive_seed(seed, 0x7e47));
  num::ParameterSet p;
  num::Tensor table = rng.draw(num::Distribution::standard_normal, {vocabulary().size(), kTextDim});
  for (double& v : table.data()) v *= 0.5;
  p.add(std::string(kTableName), std::move(table));
  p.add(std::string(kNullName), num::Tensor({kTextDim}, 0.0));
  return p;
}

std::vector<double> encode_text(const num::ParameterSet& p, std::string_view command) {
  const auto tokens = tokenize(command);
  if (tokens.empty()) throw std::invalid_argument("empty command");
  const num::Tensor& table = p.at(kTableName);
  std::vector<double> e(kTextDim, 0.0);
  for (const auto& tok : tokens) {
    const auto row = table.row(token_id(tok));
    for (std::size_t d = 0; d < kTextDim; ++d) e[d] += row[d];
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& v : e) v *= inv;
  return e;
}

std::vector<double> null_embedding(const num::ParameterSet& p) {
  const auto d = p.at(kNullName).data();
  return {d.begin(), d.end()};
}

void encode_text_backward(std::string_view command, std::span<const double> g, num::ParameterSet& grads) {
  const auto tokens = tokenize(command);
  num::Tensor& table = grads.at(kTableName);
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (const auto& tok : tokens) {
    auto row = table.row(token_id(tok));
    for (std::size_t d = 0; d < kTextDim; ++d) row[d] += inv * g[d];
  }
}

std::string antonym(std::string_view command) {
  auto tokens = tokenize(command);
  bool swapped = false;
  for (auto& tok : tokens) {
    for (const auto& [a, b] : kAntonyms) {
      if (tok == a) {
        tok = std::string(b), swapped = true;
        break;
      }
      if (tok == b) {
        tok = std::string(a), swapped = true;
        break;
      }
    }
  }
  if (!swapped) {
    taksie::count_warning("text.no_antonym");
    return {};
  }
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) out += (i ? " " : "") + tokens[i];
  return out;
}

}  // namespace taksie::text
