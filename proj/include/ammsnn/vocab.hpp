#pragma once

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ammsnn/error.hpp"

namespace ammsnn {

// Token-id mapping with two reserved ids: 0 = PAD (used only for sequence
// padding, never produced by the tokenizer) and 1 = UNK (any token not in
// the vocabulary). Real tokens get ids >= 2. Immutable once built.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  Vocabulary() = default;

  // Appends a token; returns its id. Duplicate tokens return the existing id.
  int add(const std::string& token) {
    auto it = index_.find(token);
    if (it != index_.end()) return it->second;
    const int id = static_cast<int>(tokens_.size()) + 2;
    index_.emplace(token, id);
    tokens_.push_back(token);
    return id;
  }

  int id_of(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kUnk : it->second;
  }

  const std::string& token_of(int id) const {
    static const std::string pad = "<pad>";
    static const std::string unk = "<unk>";
    if (id == kPad) return pad;
    if (id == kUnk) return unk;
    if (id < 0 || id >= size()) throw DataError("token_of: id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id - 2)];
  }

  // Total id count including PAD and UNK.
  int size() const { return static_cast<int>(tokens_.size()) + 2; }

  // One token per line, line number = id - 2; PAD/UNK are implicit.
  void save(std::ostream& os) const {
    for (const auto& t : tokens_) os << t << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write vocabulary file: " + path);
    save(os);
  }

  static Vocabulary load(std::istream& is) {
    Vocabulary v;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      v.add(line);
    }
    return v;
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot read vocabulary file: " + path);
    return load(is);
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
};

}  // namespace ammsnn
