#include "ilt/vocab.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ilt {

JointVocab::JointVocab(int n_text, int n_units) : n_text_(n_text), n_units_(n_units) {
  if (n_text < 1 || n_units < 1) throw std::invalid_argument("joint vocab: n_text and n_units must be >= 1");
}

TokenId JointVocab::text_id(TokenId bpe_id) const {
  if (bpe_id < 0 || bpe_id >= n_text_) throw std::out_of_range("joint vocab: text id out of range");
  return bpe_id;
}

TokenId JointVocab::unit_id(int unit) const {
  if (unit < 0 || unit >= n_units_) throw std::out_of_range("joint vocab: unit out of range");
  return n_text_ + unit;
}

int JointVocab::unit_of(TokenId id) const {
  if (!is_speech(id)) throw std::out_of_range("joint vocab: not a speech unit id");
  return id - n_text_;
}

Modality JointVocab::modality_of(TokenId id) const {
  if (id < 0 || id >= size()) throw std::out_of_range("joint vocab: id " + std::to_string(id) + " out of range");
  if (id < n_text_) return Modality::kText;
  if (id < n_text_ + n_units_) return Modality::kSpeech;
  return Modality::kSpecial;
}

std::string JointVocab::to_json() const {
  nlohmann::ordered_json j;
  j["n_text"] = n_text_;
  j["n_units"] = n_units_;
  nlohmann::ordered_json specials;
  for (int i = 0; i < kNumSpecials; ++i) specials[std::string(kSpecialNames[i])] = special(static_cast<Special>(i));
  j["specials"] = specials;
  return j.dump();
}

JointVocab JointVocab::from_json(std::string_view json) {
  const auto j = nlohmann::json::parse(json);
  JointVocab v(j.at("n_text").get<int>(), j.at("n_units").get<int>());
  if (j.contains("specials")) {
    for (int i = 0; i < kNumSpecials; ++i) {
      const auto& s = j.at("specials").at(std::string(kSpecialNames[i]));
      if (s.get<int>() != v.special(static_cast<Special>(i))) {
        throw std::invalid_argument("joint vocab: special id layout mismatch for " + std::string(kSpecialNames[i]));
      }
    }
  }
  return v;
}

void JointVocab::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << to_json() << '\n';
}

JointVocab JointVocab::load(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return from_json(ss.str());
}

}  // namespace ilt
