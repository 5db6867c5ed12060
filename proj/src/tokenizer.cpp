#include "sadi/tokenizer.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sadi/error.hpp"

namespace sadi {

using json = nlohmann::json;

std::string Tokenizer::byte_token(unsigned char b) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "<0x%02X>", b);
  return buf;
}

Tokenizer::Tokenizer(std::unordered_map<std::string, TokenId> vocab) : vocab_(std::move(vocab)) {
  for (const auto& [piece, id] : vocab_) {
    if (piece.empty()) throw Error(ErrorKind::MalformedDataset, "vocabulary contains an empty piece");
    if (id >= id_to_piece_.size()) id_to_piece_.resize(id + 1);
    if (!id_to_piece_[id].empty())
      throw Error(ErrorKind::MalformedDataset, "vocabulary id " + std::to_string(id) + " is used twice");
    id_to_piece_[id] = piece;
    max_piece_ = std::max(max_piece_, piece.size());
  }
}

Tokenizer Tokenizer::from_json(const std::string& json_text) {
  std::unordered_map<std::string, TokenId> vocab;
  try {
    const auto j = json::parse(json_text);
    for (auto it = j.begin(); it != j.end(); ++it) vocab[it.key()] = it.value().get<TokenId>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedDataset, std::string("vocabulary is not a string->id map: ") + e.what());
  }
  return Tokenizer(std::move(vocab));
}

Tokenizer Tokenizer::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::vector<TokenId> Tokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t pos = 0;
  std::string probe;
  while (pos < text.size()) {
    bool matched = false;
    for (std::size_t len = std::min(max_piece_, text.size() - pos); len > 0; --len) {
      probe.assign(text.substr(pos, len));
      auto it = vocab_.find(probe);
      if (it != vocab_.end()) {
        ids.push_back(it->second);
        pos += len;
        matched = true;
        break;
      }
    }
    if (matched) continue;
    const auto b = static_cast<unsigned char>(text[pos]);
    auto it = vocab_.find(byte_token(b));
    if (it == vocab_.end())
      throw Error(ErrorKind::TokenOutOfRange,
                  "no vocabulary entry or byte fallback for byte " + byte_token(b));
    ids.push_back(it->second);
    ++pos;
  }
  return ids;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (auto id : ids) {
    if (id >= id_to_piece_.size() || id_to_piece_[id].empty())
      throw Error(ErrorKind::TokenOutOfRange, "token id " + std::to_string(id) + " not in vocabulary");
    const std::string& piece = id_to_piece_[id];
    unsigned value = 0;
    if (piece.size() == 6 && piece.rfind("<0x", 0) == 0 && piece.back() == '>' &&
        std::sscanf(piece.c_str(), "<0x%2X>", &value) == 1) {
      out.push_back(static_cast<char>(value));
    } else {
      out += piece;
    }
  }
  return out;
}

std::string Tokenizer::to_json() const {
  json j = json::object();
  for (const auto& [piece, id] : vocab_) j[piece] = id;
  return j.dump(1);
}

}  // namespace sadi
