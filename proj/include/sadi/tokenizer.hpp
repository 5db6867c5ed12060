#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sadi/model.hpp"

namespace sadi {

// JSON vocabulary (string -> id) with greedy longest-match encoding. Bytes
// that start no vocabulary entry fall back to "<0xHH>" byte tokens.
class Tokenizer {
 public:
  explicit Tokenizer(std::unordered_map<std::string, TokenId> vocab);

  static Tokenizer from_json(const std::string& json_text);
  static Tokenizer from_file(const std::filesystem::path& path);

  // Throws Error{TokenOutOfRange} when a byte has neither a match nor a
  // fallback token.
  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

  std::size_t size() const { return vocab_.size(); }
  // Largest id + 1.
  std::size_t id_bound() const { return id_to_piece_.size(); }
  const std::unordered_map<std::string, TokenId>& vocab() const { return vocab_; }
  std::string to_json() const;

  static std::string byte_token(unsigned char b);

 private:
  std::unordered_map<std::string, TokenId> vocab_;
  std::vector<std::string> id_to_piece_;
  std::size_t max_piece_ = 0;
};

}  // namespace sadi
