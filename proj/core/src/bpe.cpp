#include "ilt/bpe.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ilt {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

}  // namespace

std::vector<std::string_view> split_chunks(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    std::size_t start = i;
    if (is_space(text[i])) {
      std::size_t j = i;
      while (j < n && is_space(text[j])) ++j;
      // A single trailing ' ' before a word is glued to that word.
      if (j < n && text[j - 1] == ' ') {
        if (j - 1 > i) chunks.push_back(text.substr(i, j - 1 - i));
        start = j - 1;
        i = j;
      } else {
        chunks.push_back(text.substr(i, j - i));
        i = j;
        continue;
      }
    }
    while (i < n && !is_space(text[i])) ++i;
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(text[j])) ++j;
    if (j > i) words.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

BpeModel::BpeModel() : BpeModel(std::vector<std::pair<TokenId, TokenId>>{}) {}

BpeModel::BpeModel(std::vector<std::pair<TokenId, TokenId>> merges) : merges_(std::move(merges)) {
  tokens_.reserve(kBaseSize + merges_.size());
  for (int b = 0; b < kBaseSize; ++b) tokens_.emplace_back(1, static_cast<char>(b));
  for (std::size_t i = 0; i < merges_.size(); ++i) {
    const auto [l, r] = merges_[i];
    const auto next = static_cast<TokenId>(tokens_.size());
    if (l < 0 || r < 0 || l >= next || r >= next) {
      throw std::invalid_argument("bpe: merge " + std::to_string(i) + " references an undefined token");
    }
    tokens_.push_back(tokens_[l] + tokens_[r]);
    rank_.emplace(std::pair{l, r}, static_cast<int>(i));
  }
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    if (!token_to_id_.emplace(tokens_[id], static_cast<TokenId>(id)).second) {
      throw std::invalid_argument("bpe: duplicate token string for id " + std::to_string(id));
    }
  }
}

const std::string& BpeModel::token(TokenId id) const {
  if (id < 0 || id >= vocab_size()) throw std::out_of_range("bpe: unknown token id " + std::to_string(id));
  return tokens_[id];
}

TokenId BpeModel::id_of(std::string_view token) const {
  auto it = token_to_id_.find(std::string(token));
  if (it == token_to_id_.end()) throw std::out_of_range("bpe: unknown token");
  return it->second;
}

void BpeModel::encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const {
  std::vector<TokenId> ids;
  ids.reserve(chunk.size());
  for (unsigned char c : chunk) ids.push_back(c);
  while (ids.size() > 1) {
    int best_rank = -1;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
      auto it = rank_.find({ids[i], ids[i + 1]});
      if (it != rank_.end() && (best_rank < 0 || it->second < best_rank)) best_rank = it->second;
    }
    if (best_rank < 0) break;
    const auto [l, r] = merges_[best_rank];
    const auto merged = static_cast<TokenId>(kBaseSize + best_rank);
    std::size_t w = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (i + 1 < ids.size() && ids[i] == l && ids[i + 1] == r) {
        ids[w++] = merged;
        ++i;
      } else {
        ids[w++] = ids[i];
      }
    }
    ids.resize(w);
  }
  out.insert(out.end(), ids.begin(), ids.end());
}

std::vector<TokenId> BpeModel::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (auto chunk : split_chunks(text)) encode_chunk(chunk, out);
  return out;
}

std::string BpeModel::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId id : ids) out += token(id);
  return out;
}

std::string BpeModel::to_json() const {
  nlohmann::ordered_json j;
  auto base = nlohmann::json::array();
  for (int b = 0; b < kBaseSize; ++b) base.push_back(b);
  j["base"] = base;
  auto merges = nlohmann::json::array();
  for (const auto& [l, r] : merges_) merges.push_back({l, r});
  j["merges"] = merges;
  return j.dump();
}

BpeModel BpeModel::from_json(std::string_view json) {
  const auto j = nlohmann::json::parse(json);
  const auto& base = j.at("base");
  if (base.size() != static_cast<std::size_t>(kBaseSize)) throw std::invalid_argument("bpe: base must list all 256 bytes");
  for (int b = 0; b < kBaseSize; ++b) {
    if (base[b].get<int>() != b) throw std::invalid_argument("bpe: base must be bytes 0..255 in order");
  }
  std::vector<std::pair<TokenId, TokenId>> merges;
  for (const auto& m : j.at("merges")) merges.emplace_back(m.at(0).get<TokenId>(), m.at(1).get<TokenId>());
  return BpeModel(std::move(merges));
}

void BpeModel::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json() << '\n';
}

BpeModel BpeModel::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

BpeModel train_bpe(std::span<const std::string> corpus, int target_size) {
  if (corpus.empty()) throw std::invalid_argument("train_bpe: empty corpus");
  if (target_size < BpeModel::kBaseSize) {
    throw std::invalid_argument("train_bpe: target_size " + std::to_string(target_size) +
                                " is below the 256-byte base alphabet");
  }

  std::map<std::string, long> chunk_counts;
  for (const auto& line : corpus) {
    for (auto chunk : split_chunks(line)) ++chunk_counts[std::string(chunk)];
  }
  struct Word {
    std::vector<TokenId> ids;
    long count;
  };
  std::vector<Word> words;
  words.reserve(chunk_counts.size());
  for (const auto& [chunk, count] : chunk_counts) {
    Word w{{}, count};
    for (unsigned char c : chunk) w.ids.push_back(c);
    words.push_back(std::move(w));
  }

  std::vector<std::string> tokens;
  for (int b = 0; b < BpeModel::kBaseSize; ++b) tokens.emplace_back(1, static_cast<char>(b));
  std::unordered_map<std::string, TokenId> known;
  for (std::size_t i = 0; i < tokens.size(); ++i) known.emplace(tokens[i], static_cast<TokenId>(i));

  std::vector<std::pair<TokenId, TokenId>> merges;
  while (static_cast<int>(tokens.size()) < target_size) {
    std::map<std::pair<TokenId, TokenId>, long> pair_counts;
    for (const auto& w : words) {
      for (std::size_t i = 0; i + 1 < w.ids.size(); ++i) pair_counts[{w.ids[i], w.ids[i + 1]}] += w.count;
    }
    const std::pair<TokenId, TokenId>* best = nullptr;
    long best_count = 0;
    for (const auto& [pair, count] : pair_counts) {
      if (known.contains(tokens[pair.first] + tokens[pair.second])) continue;
      if (best == nullptr || count > best_count ||
          (count == best_count && std::tie(tokens[pair.first], tokens[pair.second]) <
                                      std::tie(tokens[best->first], tokens[best->second]))) {
        best = &pair;
        best_count = count;
      }
    }
    if (best == nullptr) break;

    const auto [l, r] = *best;
    const auto merged = static_cast<TokenId>(tokens.size());
    merges.emplace_back(l, r);
    tokens.push_back(tokens[l] + tokens[r]);
    known.emplace(tokens.back(), merged);
    for (auto& w : words) {
      std::size_t out = 0;
      for (std::size_t i = 0; i < w.ids.size(); ++i) {
        if (i + 1 < w.ids.size() && w.ids[i] == l && w.ids[i + 1] == r) {
          w.ids[out++] = merged;
          ++i;
        } else {
          w.ids[out++] = w.ids[i];
        }
      }
      w.ids.resize(out);
    }
  }
  return BpeModel(std::move(merges));
}

}  // namespace ilt
