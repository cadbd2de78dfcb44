#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "ilt/vocab.hpp"

namespace ilt {

enum class CotMode { kCot, kDirect };

CotMode parse_cot_mode(std::string_view name);
std::string_view to_string(CotMode mode);

/// Half-open token index range [begin, end).
struct Range {
  int begin = 0;
  int end = 0;
  [[nodiscard]] int size() const { return end - begin; }
  bool operator==(const Range&) const = default;
};

struct Segments {
  Range i_src, t_src, t_tgt, i_tgt;
  bool operator==(const Segments&) const = default;
};

/// One training sequence:
///   cot:    BOS I_src SEP_ASR T_src SEP_MT T_tgt SEP_TTS I_tgt EOS
///   direct: BOS I_src SEP_TTS I_tgt EOS
/// loss_mask[t] = 1 means token t is a prediction target (scored from the
/// logits at t - 1). BOS and I_src are never targets; everything from the
/// first separator through EOS is.
struct TrainingExample {
  std::vector<TokenId> tokens;
  std::vector<unsigned char> loss_mask;
  Segments segments;
};

TrainingExample build_training_example(std::span<const TokenId> i_src, std::span<const TokenId> t_src,
                                       std::span<const TokenId> t_tgt, std::span<const TokenId> i_tgt, CotMode mode,
                                       const JointVocab& vocab);

/// [BOS, I_src, SEP_ASR] for cot, [BOS, I_src, SEP_TTS] for direct.
std::vector<TokenId> build_inference_prompt(std::span<const TokenId> i_src, CotMode mode, const JointVocab& vocab);

struct GeneratedSegments {
  std::vector<TokenId> t_src;
  std::vector<TokenId> t_tgt;
  std::vector<TokenId> s_tgt;
  bool malformed = false;
};

/// Splits a continuation generated after an inference prompt at SEP_MT,
/// SEP_TTS and EOS. Never throws; missing or out-of-order separators and a
/// missing EOS set `malformed`.
GeneratedSegments split_generated(std::span<const TokenId> generated, const JointVocab& vocab,
                                  CotMode mode = CotMode::kCot);

}  // namespace ilt
