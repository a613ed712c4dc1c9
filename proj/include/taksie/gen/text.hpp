#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "taksie/numerics/tensor.hpp"

namespace taksie::text {

inline constexpr std::size_t kTextDim = 16;
inline constexpr std::string_view kPrefix = "text.";
inline constexpr std::string_view kTableName = "text.table";
inline constexpr std::string_view kNullName = "text.null";

std::vector<std::string> tokenize(std::string_view command);

// Every word of every task command and negative, sorted.
const std::vector<std::string>& vocabulary();
// Throws naming the token when it is not in the vocabulary.
std::size_t token_id(std::string_view token);

// "text.table" [V, 16] ~ N(0, 0.5^2) and "text.null" [16].
num::ParameterSet text_init(std::uint64_t seed);

// Mean of the token rows.
std::vector<double> encode_text(const num::ParameterSet& p, std::string_view command);
std::vector<double> null_embedding(const num::ParameterSet& p);

// Adds g / n_tokens into each token row of `grads`.
void encode_text_backward(std::string_view command, std::span<const double> g, num::ParameterSet& grads);

// Token swap over {open/close, left/right, on/off, lift/place}. A command
// without any antonym token yields "" and counts a warning.
std::string antonym(std::string_view command);

}  // namespace taksie::text
