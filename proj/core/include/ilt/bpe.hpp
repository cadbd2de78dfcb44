#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ilt {

using TokenId = std::int32_t;

/// Byte-level BPE tokenizer.
///
/// Ids 0..255 are the raw bytes, so every byte string is encodable. Merge i
/// creates id 256 + i. Text is split into chunks before merging: a chunk is
/// a run of non-whitespace optionally preceded by one space, or a run of
/// whitespace. Merges never cross chunk boundaries.
class BpeModel {
 public:
  static constexpr int kBaseSize = 256;

  BpeModel();
  explicit BpeModel(std::vector<std::pair<TokenId, TokenId>> merges);

  [[nodiscard]] int vocab_size() const { return static_cast<int>(tokens_.size()); }
  [[nodiscard]] const std::vector<std::pair<TokenId, TokenId>>& merges() const { return merges_; }
  [[nodiscard]] const std::string& token(TokenId id) const;
  [[nodiscard]] TokenId id_of(std::string_view token) const;

  [[nodiscard]] std::vector<TokenId> encode(std::string_view text) const;
  [[nodiscard]] std::string decode(std::span<const TokenId> ids) const;

  void save(const std::filesystem::path& path) const;
  static BpeModel load(const std::filesystem::path& path);
  [[nodiscard]] std::string to_json() const;
  static BpeModel from_json(std::string_view json);

 private:
  void encode_chunk(std::string_view chunk, std::vector<TokenId>& out) const;

  std::vector<std::pair<TokenId, TokenId>> merges_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::map<std::pair<TokenId, TokenId>, int> rank_;
};

/// Learns merges until the vocabulary holds target_size tokens or no pair
/// occurs anymore. Most frequent pair wins; ties go to the lexicographically
/// smallest (left bytes, right bytes).
BpeModel train_bpe(std::span<const std::string> corpus, int target_size);

/// Chunking shared by training and encoding.
std::vector<std::string_view> split_chunks(std::string_view text);

/// Whitespace word segmentation.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(std::span<const std::string> words);

}  // namespace ilt
