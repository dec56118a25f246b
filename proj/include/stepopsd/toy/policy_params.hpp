#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stepopsd/toy/vocabulary.hpp"

namespace stepopsd::toy {

// Feature-hashed linear softmax weights: a dense D x V row-major matrix.
class PolicyParams {
 public:
  // `dimension` must be a power of two.
  PolicyParams(std::shared_ptr<const Vocabulary> vocabulary, std::size_t dimension,
               std::uint64_t hash_seed);

  std::size_t dimension() const { return dimension_; }
  std::size_t vocab_size() const { return vocabulary_->size(); }
  std::uint64_t hash_seed() const { return hash_seed_; }
  const Vocabulary& vocabulary() const { return *vocabulary_; }
  const std::shared_ptr<const Vocabulary>& shared_vocabulary() const { return vocabulary_; }

  std::span<double> row(std::size_t feature) {
    return {weights_.data() + feature * vocab_size(), vocab_size()};
  }
  std::span<const double> row(std::size_t feature) const {
    return {weights_.data() + feature * vocab_size(), vocab_size()};
  }
  double& at(std::size_t feature, TokenId token) { return weights_[feature * vocab_size() + token]; }
  double at(std::size_t feature, TokenId token) const {
    return weights_[feature * vocab_size() + token];
  }
  std::vector<double>& weights() { return weights_; }
  const std::vector<double>& weights() const { return weights_; }

  bool all_finite() const;
  // 64-bit content hash of the weights (bit patterns), for run fingerprints.
  std::uint64_t digest() const;

  // Flat little-endian binary: magic, D, seed, vocabulary table, weights.
  void save(std::ostream& out) const;
  static PolicyParams load(std::istream& in);
  void save_file(const std::string& path) const;
  static PolicyParams load_file(const std::string& path);

  bool operator==(const PolicyParams& other) const;

 private:
  std::shared_ptr<const Vocabulary> vocabulary_;
  std::size_t dimension_;
  std::uint64_t hash_seed_;
  std::vector<double> weights_;
};

std::string hex_digest(std::uint64_t digest);

}  // namespace stepopsd::toy
