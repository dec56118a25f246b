#include "stepopsd/toy/policy_params.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "stepopsd/errors.hpp"
#include "stepopsd/toy/rng.hpp"

namespace stepopsd::toy {

namespace {

constexpr char kMagic[8] = {'S', 'O', 'P', 'D', 'P', 'R', 'M', '1'};

template <typename T>
void write_pod(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError("truncated policy parameter stream", static_cast<std::size_t>(in.gcount()));
  return value;
}

}  // namespace

PolicyParams::PolicyParams(std::shared_ptr<const Vocabulary> vocabulary, std::size_t dimension,
                           std::uint64_t hash_seed)
    : vocabulary_(std::move(vocabulary)), dimension_(dimension), hash_seed_(hash_seed) {
  if (!vocabulary_) throw ConfigError("policy parameters need a vocabulary");
  if (dimension_ == 0 || !std::has_single_bit(dimension_)) {
    throw ConfigError("feature dimension must be a power of two, got " + std::to_string(dimension_));
  }
  weights_.assign(dimension_ * vocabulary_->size(), 0.0);
}

bool PolicyParams::all_finite() const {
  for (double w : weights_) {
    if (!std::isfinite(w)) return false;
  }
  return true;
}

std::uint64_t PolicyParams::digest() const {
  std::uint64_t h = mix_seed(dimension_, hash_seed_, vocab_size());
  for (double w : weights_) {
    h = splitmix64(h ^ std::bit_cast<std::uint64_t>(w));
  }
  return h;
}

void PolicyParams::save(std::ostream& out) const {
  out.write(kMagic, sizeof(kMagic));
  write_pod<std::uint64_t>(out, dimension_);
  write_pod<std::uint64_t>(out, hash_seed_);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(vocab_size()));
  for (const auto& t : vocabulary_->tokens()) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.size()));
    out.write(t.data(), static_cast<std::streamsize>(t.size()));
  }
  out.write(reinterpret_cast<const char*>(weights_.data()),
            static_cast<std::streamsize>(weights_.size() * sizeof(double)));
  if (!out) throw IoError("failed to write policy parameters");
}

PolicyParams PolicyParams::load(std::istream& in) {
  char magic[sizeof(kMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("not a policy parameter stream", 0);
  }
  const auto dimension = read_pod<std::uint64_t>(in);
  const auto seed = read_pod<std::uint64_t>(in);
  const auto vocab_size = read_pod<std::uint32_t>(in);
  std::vector<std::string> tokens(vocab_size);
  for (auto& t : tokens) {
    const auto len = read_pod<std::uint32_t>(in);
    t.resize(len);
    in.read(t.data(), len);
    if (!in) throw ParseError("truncated vocabulary table", 0);
  }
  PolicyParams params(std::make_shared<const Vocabulary>(std::move(tokens)), dimension, seed);
  in.read(reinterpret_cast<char*>(params.weights_.data()),
          static_cast<std::streamsize>(params.weights_.size() * sizeof(double)));
  if (!in) throw ParseError("truncated weight matrix", 0);
  return params;
}

void PolicyParams::save_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path + "'");
  save(out);
}

PolicyParams PolicyParams::load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return load(in);
}

bool PolicyParams::operator==(const PolicyParams& other) const {
  return dimension_ == other.dimension_ && hash_seed_ == other.hash_seed_ &&
         vocabulary_->tokens() == other.vocabulary_->tokens() && weights_ == other.weights_;
}

std::string hex_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

}  // namespace stepopsd::toy
