#include "kpe/alignment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "kpe/errors.hpp"
#include "kpe/text.hpp"

namespace kpe::alignment {

namespace {

constexpr int kCell = 28;
constexpr int kCharWidth = 7;
constexpr int kPad = 10;

std::string xml_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      case '\'':
        out += "&apos;";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string gray_fill(double score) {
  const long v = std::lround(255.0 * (1.0 - std::clamp(score, 0.0, 1.0)));
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<unsigned>(v),
                static_cast<unsigned>(v), static_cast<unsigned>(v));
  return buf;
}

std::string percent(double score) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", score * 100.0);
  std::string s(buf);
  if (s.size() > 2 && s.ends_with(".0")) s.resize(s.size() - 2);
  return s + "%";
}

int label_width(const std::vector<std::string>& tokens) {
  std::size_t longest = 0;
  for (const auto& t : tokens) longest = std::max(longest, text::decode_utf8(t).size());
  return static_cast<int>(longest) * kCharWidth + kPad;
}

}  // namespace

TokenList::TokenList(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw EmptyInputError("token list is empty");
  for (const auto& t : tokens_) {
    if (t.empty()) throw Error("empty token");
    const auto cps = text::decode_utf8(t);
    if (std::any_of(cps.begin(), cps.end(), text::is_space)) {
      throw Error("token '" + t + "' contains whitespace");
    }
  }
}

AlignmentMatrix::AlignmentMatrix(TokenList src, TokenList mt, std::vector<std::vector<double>> cells)
    : src_(std::move(src)), mt_(std::move(mt)), cells_(std::move(cells)) {
  if (cells_.size() != src_.size()) {
    throw MatrixShapeError("matrix has " + std::to_string(cells_.size()) + " rows for " +
                           std::to_string(src_.size()) + " source tokens");
  }
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    if (cells_[i].size() != mt_.size()) {
      throw MatrixShapeError("matrix row " + std::to_string(i) + " has " +
                             std::to_string(cells_[i].size()) + " cells for " +
                             std::to_string(mt_.size()) + " translation tokens");
    }
    for (double v : cells_[i]) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error("alignment score outside [0,1]");
    }
  }
}

TokenList tokenize(std::string_view sentence) {
  const auto cps = text::decode_utf8(text::trim(sentence));
  if (cps.empty()) throw EmptyInputError("cannot tokenize an empty sentence");

  std::vector<std::string> tokens;
  auto emit = [&](std::u32string_view piece) {
    if (!piece.empty()) tokens.push_back(text::encode_utf8(piece));
  };
  auto emit_core = [&](std::u32string_view core) {
    std::size_t run = 0;
    for (std::size_t i = 0; i < core.size(); ++i) {
      if (text::is_cjk(core[i])) {
        emit(core.substr(run, i - run));
        emit(core.substr(i, 1));
        run = i + 1;
      }
    }
    emit(core.substr(run));
  };

  const std::u32string_view all(cps);
  std::size_t i = 0;
  while (i < all.size()) {
    while (i < all.size() && text::is_space(all[i])) ++i;
    std::size_t end = i;
    while (end < all.size() && !text::is_space(all[end])) ++end;
    if (end == i) break;
    auto chunk = all.substr(i, end - i);
    std::size_t lead = 0;
    while (lead < chunk.size() && text::is_punctuation(chunk[lead])) ++lead;
    std::size_t tail = chunk.size();
    while (tail > lead && text::is_punctuation(chunk[tail - 1])) --tail;
    for (std::size_t k = 0; k < lead; ++k) emit(chunk.substr(k, 1));
    emit_core(chunk.substr(lead, tail - lead));
    for (std::size_t k = tail; k < chunk.size(); ++k) emit(chunk.substr(k, 1));
    i = end;
  }
  return TokenList(std::move(tokens));
}

std::string format_token_list(const TokenList& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += "\n";
    out += std::to_string(i + 1) + ". " + tokens[i];
  }
  return out;
}

std::vector<std::string> parse_token_list(std::string_view text) {
  std::vector<std::string> tokens;
  for (auto line : text::split(text, '\n')) {
    const auto dot = line.find(". ");
    if (dot == std::string_view::npos || dot == 0) continue;
    const auto number = line.substr(0, dot);
    if (!std::all_of(number.begin(), number.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    auto token = line.substr(dot + 2);
    if (!token.empty()) tokens.emplace_back(token);
  }
  return tokens;
}

ParsedMatrix parse_matrix_response(std::string_view response, std::size_t rows, std::size_t cols) {
  ParsedMatrix out;
  for (auto raw : text::split(response, '\n')) {
    const auto line = text::trim(raw);
    if (std::none_of(line.begin(), line.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      continue;
    }
    const std::size_t r = out.cells.size();
    auto& row = out.cells.emplace_back();
    const auto parts = text::split(line, ',');
    for (std::size_t c = 0; c < parts.size(); ++c) {
      auto cell = text::trim(parts[c]);
      const std::string original(cell);
      if (cell.ends_with('%')) cell = text::trim(cell.substr(0, cell.size() - 1));
      double pct = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), pct);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() ||
          !std::isfinite(pct)) {
        throw ValueParseError(r, c, original);
      }
      if (pct < 0.0 || pct > 100.0) {
        pct = std::clamp(pct, 0.0, 100.0);
        ++out.clamped;
      }
      row.push_back(pct / 100.0);
    }
  }
  if (out.cells.size() != rows) {
    throw MatrixShapeError("expected " + std::to_string(rows) + " matrix rows, got " +
                           std::to_string(out.cells.size()));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    if (out.cells[r].size() != cols) {
      throw MatrixShapeError("matrix row " + std::to_string(r) + " has " +
                             std::to_string(out.cells[r].size()) + " values, expected " +
                             std::to_string(cols));
    }
  }
  return out;
}

backend::CompletionRequest build_align_request(const TokenList& src, const TokenList& mt,
                                               const backend::GenParams& params,
                                               backend::RequestContext context) {
  if (src.size() * mt.size() > kMaxPromptCells) {
    throw InputTooLargeError(std::to_string(src.size()) + " x " + std::to_string(mt.size()) +
                             " alignment exceeds " + std::to_string(kMaxPromptCells) + " cells");
  }
  const auto& tmpl = prompting::builtin_templates().get("kpe_token_align");
  return {prompting::render_template(
              tmpl, {{"source_seg", format_token_list(src)}, {"target_seg", format_token_list(mt)}}),
          params, std::move(context)};
}

AlignResult align_tokens(const TokenList& src, const TokenList& mt,
                         backend::CompletionProvider& provider, backend::ResponseCache* cache,
                         const backend::GenParams& params, backend::RequestContext context,
                         const backend::RetryPolicy& retry) {
  const auto request = build_align_request(src, mt, params, std::move(context));
  auto completion = backend::cached_complete(provider, cache, request, retry);
  auto parsed = parse_matrix_response(completion.text, src.size(), mt.size());
  return {AlignmentMatrix(src, mt, std::move(parsed.cells)), parsed.clamped,
          std::move(completion)};
}

std::vector<AlignedPair> greedy_alignment(const AlignmentMatrix& matrix) {
  std::vector<AlignedPair> pairs;
  const auto rows = matrix.src_tokens().size();
  const auto cols = matrix.mt_tokens().size();
  pairs.reserve(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows; ++i) {
      if (matrix.at(i, j) > matrix.at(best, j)) best = i;
    }
    pairs.push_back({best, j, matrix.at(best, j)});
  }
  return pairs;
}

std::string render_heatmap(const AlignmentMatrix& matrix) {
  const auto& src = matrix.src_tokens().tokens();
  const auto& mt = matrix.mt_tokens().tokens();
  if (src.size() > kMaxHeatmapTokens || mt.size() > kMaxHeatmapTokens) {
    throw TooManyTokensError("heatmap supports at most " + std::to_string(kMaxHeatmapTokens) +
                             " tokens per axis");
  }
  const int left = label_width(src);
  const int top = label_width(mt);
  const int width = left + static_cast<int>(mt.size()) * kCell + kPad;
  const int height = top + static_cast<int>(src.size()) * kCell + kPad;

  std::string svg;
  svg += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg += "<g class=\"cells\" stroke=\"#cccccc\" stroke-width=\"0.5\">\n";
  for (std::size_t i = 0; i < src.size(); ++i) {
    for (std::size_t j = 0; j < mt.size(); ++j) {
      const double s = matrix.at(i, j);
      svg += "<rect x=\"" + std::to_string(left + static_cast<int>(j) * kCell) + "\" y=\"" +
             std::to_string(top + static_cast<int>(i) * kCell) + "\" width=\"" +
             std::to_string(kCell) + "\" height=\"" + std::to_string(kCell) + "\" fill=\"" +
             gray_fill(s) + "\"><title>" + xml_escape(src[i]) + " / " + xml_escape(mt[j]) +
             ": " + percent(s) + "</title></rect>\n";
    }
  }
  svg += "</g>\n<g class=\"src-labels\" text-anchor=\"end\">\n";
  for (std::size_t i = 0; i < src.size(); ++i) {
    svg += "<text x=\"" + std::to_string(left - 6) + "\" y=\"" +
           std::to_string(top + static_cast<int>(i) * kCell + kCell / 2 + 4) + "\">" +
           xml_escape(src[i]) + "</text>\n";
  }
  svg += "</g>\n<g class=\"mt-labels\" text-anchor=\"start\">\n";
  for (std::size_t j = 0; j < mt.size(); ++j) {
    svg += "<text transform=\"translate(" +
           std::to_string(left + static_cast<int>(j) * kCell + kCell / 2 + 4) + "," +
           std::to_string(top - 6) + ") rotate(-90)\">" + xml_escape(mt[j]) + "</text>\n";
  }
  svg += "</g>\n</svg>\n";
  return svg;
}

std::string matrix_to_json(const AlignmentMatrix& matrix) {
  nlohmann::json j{{"src_tokens", matrix.src_tokens().tokens()},
                   {"mt_tokens", matrix.mt_tokens().tokens()},
                   {"cells", matrix.cells()}};
  return j.dump(2) + "\n";
}

}  // namespace kpe::alignment
