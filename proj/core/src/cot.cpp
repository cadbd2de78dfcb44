#include "ilt/cot.hpp"

#include <stdexcept>
#include <string>

namespace ilt {

CotMode parse_cot_mode(std::string_view name) {
  if (name == "cot") return CotMode::kCot;
  if (name == "direct") return CotMode::kDirect;
  throw std::invalid_argument("unknown sequence format '" + std::string(name) + "'");
}

std::string_view to_string(CotMode mode) { return mode == CotMode::kCot ? "cot" : "direct"; }

namespace {

void check_ids(std::span<const TokenId> ids, const JointVocab& vocab, const char* what) {
  for (TokenId id : ids) {
    if (id < 0 || id >= vocab.size()) throw std::invalid_argument(std::string("cot: invalid id in ") + what);
  }
}

}  // namespace

TrainingExample build_training_example(std::span<const TokenId> i_src, std::span<const TokenId> t_src,
                                       std::span<const TokenId> t_tgt, std::span<const TokenId> i_tgt, CotMode mode,
                                       const JointVocab& vocab) {
  if (i_src.empty()) throw std::invalid_argument("cot: empty source sequence");
  if (i_tgt.empty()) throw std::invalid_argument("cot: empty target sequence");
  if (mode == CotMode::kCot && (t_src.empty() || t_tgt.empty())) {
    throw std::invalid_argument("cot: text segments must be non-empty in cot mode");
  }
  check_ids(i_src, vocab, "I_src");
  check_ids(t_src, vocab, "T_src");
  check_ids(t_tgt, vocab, "T_tgt");
  check_ids(i_tgt, vocab, "I_tgt");

  TrainingExample ex;
  auto& tok = ex.tokens;
  auto& mask = ex.loss_mask;
  auto push = [&](TokenId id, bool target) {
    tok.push_back(id);
    mask.push_back(target ? 1 : 0);
  };
  auto push_all = [&](std::span<const TokenId> ids, bool target) {
    const int begin = static_cast<int>(tok.size());
    for (TokenId id : ids) push(id, target);
    return Range{begin, static_cast<int>(tok.size())};
  };

  push(vocab.special(Special::kBos), false);
  ex.segments.i_src = push_all(i_src, false);
  if (mode == CotMode::kCot) {
    push(vocab.special(Special::kSepAsr), true);
    ex.segments.t_src = push_all(t_src, true);
    push(vocab.special(Special::kSepMt), true);
    ex.segments.t_tgt = push_all(t_tgt, true);
  } else {
    const int here = static_cast<int>(tok.size());
    ex.segments.t_src = Range{here, here};
    ex.segments.t_tgt = Range{here, here};
  }
  push(vocab.special(Special::kSepTts), true);
  ex.segments.i_tgt = push_all(i_tgt, true);
  push(vocab.special(Special::kEos), true);
  return ex;
}

std::vector<TokenId> build_inference_prompt(std::span<const TokenId> i_src, CotMode mode, const JointVocab& vocab) {
  if (i_src.empty()) throw std::invalid_argument("cot: empty source sequence");
  check_ids(i_src, vocab, "I_src");
  std::vector<TokenId> out;
  out.reserve(i_src.size() + 2);
  out.push_back(vocab.special(Special::kBos));
  out.insert(out.end(), i_src.begin(), i_src.end());
  out.push_back(vocab.special(mode == CotMode::kCot ? Special::kSepAsr : Special::kSepTts));
  return out;
}

GeneratedSegments split_generated(std::span<const TokenId> generated, const JointVocab& vocab, CotMode mode) {
  GeneratedSegments out;
  const TokenId sep_mt = vocab.special(Special::kSepMt);
  const TokenId sep_tts = vocab.special(Special::kSepTts);
  const TokenId eos = vocab.special(Special::kEos);

  int segment = mode == CotMode::kCot ? 0 : 2;
  bool saw_mt = mode == CotMode::kDirect;
  bool saw_tts = mode == CotMode::kDirect;
  bool saw_eos = false;
  for (TokenId id : generated) {
    if (id == eos) {
      saw_eos = true;
      break;
    }
    if (id == sep_mt) {
      if (segment == 0) {
        segment = 1;
        saw_mt = true;
      } else {
        out.malformed = true;
      }
      continue;
    }
    if (id == sep_tts) {
      if (segment < 2) {
        segment = 2;
        saw_tts = true;
      } else {
        out.malformed = true;
      }
      continue;
    }
    switch (segment) {
      case 0: out.t_src.push_back(id); break;
      case 1: out.t_tgt.push_back(id); break;
      default: out.s_tgt.push_back(id); break;
    }
  }
  if (!saw_mt || !saw_tts || !saw_eos) out.malformed = true;
  return out;
}

}  // namespace ilt
