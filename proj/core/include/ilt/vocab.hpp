#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>

#include "ilt/bpe.hpp"

namespace ilt {

enum class Modality { kText, kSpeech, kSpecial };

enum class Special : int { kPad = 0, kBos, kEos, kSepAsr, kSepMt, kSepTts, kMask };
inline constexpr int kNumSpecials = 7;
inline constexpr std::array<std::string_view, kNumSpecials> kSpecialNames = {
    "PAD", "BOS", "EOS", "SEP_ASR", "SEP_MT", "SEP_TTS", "MASK"};

/// Global token space: [text BPE | speech units | specials].
class JointVocab {
 public:
  JointVocab(int n_text, int n_units);

  [[nodiscard]] int n_text() const { return n_text_; }
  [[nodiscard]] int n_units() const { return n_units_; }
  [[nodiscard]] int size() const { return n_text_ + n_units_ + kNumSpecials; }

  [[nodiscard]] TokenId text_id(TokenId bpe_id) const;
  [[nodiscard]] TokenId unit_id(int unit) const;
  [[nodiscard]] int unit_of(TokenId id) const;
  [[nodiscard]] TokenId special(Special s) const { return n_text_ + n_units_ + static_cast<int>(s); }

  [[nodiscard]] Modality modality_of(TokenId id) const;
  [[nodiscard]] bool is_text(TokenId id) const { return modality_of(id) == Modality::kText; }
  [[nodiscard]] bool is_speech(TokenId id) const { return modality_of(id) == Modality::kSpeech; }

  void save(const std::filesystem::path& path) const;
  static JointVocab load(const std::filesystem::path& path);
  [[nodiscard]] std::string to_json() const;
  static JointVocab from_json(std::string_view json);

  bool operator==(const JointVocab&) const = default;

 private:
  int n_text_;
  int n_units_;
};

inline JointVocab build_joint_vocab(int n_text, int n_units) { return JointVocab(n_text, n_units); }

}  // namespace ilt
