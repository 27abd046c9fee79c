#pragma once

// Token-level alignment between a source sentence and its translation:
// tokenization, eliciting the similarity matrix from a provider, greedy
// best-match extraction and SVG heatmap rendering.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "kpe/backend.hpp"

namespace kpe::alignment {

/// Non-empty list of tokens without internal whitespace.
class TokenList {
 public:
  TokenList() = default;
  /// Throws EmptyInputError for an empty list, kpe::Error for tokens that
  /// are empty or contain whitespace.
  explicit TokenList(std::vector<std::string> tokens);

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& operator[](std::size_t i) const { return tokens_[i]; }

  bool operator==(const TokenList&) const = default;

 private:
  std::vector<std::string> tokens_;
};

/// Rows are source tokens, columns translation tokens; cells in [0,1].
class AlignmentMatrix {
 public:
  /// Throws MatrixShapeError when the grid does not match the token lists
  /// and kpe::Error for cells outside [0,1].
  AlignmentMatrix(TokenList src, TokenList mt, std::vector<std::vector<double>> cells);

  const TokenList& src_tokens() const noexcept { return src_; }
  const TokenList& mt_tokens() const noexcept { return mt_; }
  double at(std::size_t src_index, std::size_t mt_index) const {
    return cells_[src_index][mt_index];
  }
  const std::vector<std::vector<double>>& cells() const noexcept { return cells_; }

  bool operator==(const AlignmentMatrix&) const = default;

 private:
  TokenList src_;
  TokenList mt_;
  std::vector<std::vector<double>> cells_;
};

/// Whitespace split, leading and trailing punctuation detached one character
/// at a time, CJK characters split individually.
/// Throws EmptyInputError for blank input.
TokenList tokenize(std::string_view sentence);

/// "1. tok" lines, as bound into the alignment prompt.
std::string format_token_list(const TokenList& tokens);
/// Inverse of format_token_list; lines that are not "N. token" are skipped.
std::vector<std::string> parse_token_list(std::string_view text);

constexpr std::size_t kMaxPromptCells = 1024;
constexpr std::size_t kMaxHeatmapTokens = 64;

struct ParsedMatrix {
  std::vector<std::vector<double>> cells;
  /// Cells that were outside [0,100] and got clamped.
  std::size_t clamped = 0;
};

/// One row per line of comma-separated percentages (an optional '%' per
/// cell). Lines without digits, such as a "Matrix:" cue, are skipped.
/// Throws MatrixShapeError or ValueParseError (0-based coordinates).
ParsedMatrix parse_matrix_response(std::string_view text, std::size_t rows, std::size_t cols);

struct AlignResult {
  AlignmentMatrix matrix;
  std::size_t clamped = 0;
  backend::CompletionResult completion;
};

/// Renders the alignment prompt for the pair of token lists.
/// Throws InputTooLargeError when |src| * |mt| exceeds kMaxPromptCells.
backend::CompletionRequest build_align_request(const TokenList& src, const TokenList& mt,
                                               const backend::GenParams& params,
                                               backend::RequestContext context = {});

/// Asks the provider for the matrix and parses it.
AlignResult align_tokens(const TokenList& src, const TokenList& mt,
                         backend::CompletionProvider& provider, backend::ResponseCache* cache,
                         const backend::GenParams& params, backend::RequestContext context = {},
                         const backend::RetryPolicy& retry = {});

struct AlignedPair {
  std::size_t src_index;
  std::size_t mt_index;
  double score;

  bool operator==(const AlignedPair&) const = default;
};

/// Best source token for every translation token; ties go to the lowest
/// source index.
std::vector<AlignedPair> greedy_alignment(const AlignmentMatrix& matrix);

/// Deterministic grayscale heatmap (0 white, 1 black), one rect per cell with
/// the score as a hover title. Throws TooManyTokensError past
/// kMaxHeatmapTokens on either axis.
std::string render_heatmap(const AlignmentMatrix& matrix);

/// JSON sidecar: {"src_tokens": [...], "mt_tokens": [...], "cells": [[...]]}.
std::string matrix_to_json(const AlignmentMatrix& matrix);

}  // namespace kpe::alignment
