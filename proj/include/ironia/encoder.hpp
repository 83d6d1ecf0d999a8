#pragma once

#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "ironia/detail/random.hpp"
#include "ironia/detail/text.hpp"
#include "ironia/error.hpp"

namespace ironia {

inline constexpr std::size_t kEmbeddingDim = 768;

using Embedding = std::array<double, kEmbeddingDim>;

enum class Pooling { FirstToken, Mean };

constexpr std::string_view to_string(Pooling p) { return p == Pooling::FirstToken ? "first_token" : "mean"; }

inline Pooling parse_pooling(std::string_view s) {
  if (s == "first_token") return Pooling::FirstToken;
  if (s == "mean") return Pooling::Mean;
  throw Error(ErrorCode::ConfigError, "unknown pooling '" + std::string(s) + "'");
}

inline constexpr std::string_view kStubEncoder = "stub";

/// Deterministic offline encoder. The key is FNV-1a 64 over the
/// whitespace-normalized UTF-8 bytes; component i is the i-th output of a
/// SplitMix64 stream seeded with the key, mapped to [-1, 1). The vector is
/// then scaled to unit L2 norm.
inline Embedding stub_embed(std::string_view text) {
  const std::string normalized = detail::normalize_whitespace(text);
  if (normalized.empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
  const std::uint64_t key = detail::fnv1a64(normalized);
  Embedding v{};
  double norm2 = 0.0;
  for (std::size_t i = 0; i < kEmbeddingDim; ++i) {
    const std::uint64_t z = detail::splitmix64(key + i * 0x9e3779b97f4a7c15ULL);
    const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
    v[i] = 2.0 * u - 1.0;
    norm2 += v[i] * v[i];
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

inline bool is_finite(const Embedding& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Embedding matrix files: raw little-endian float64, row-major count x 768,
// with a JSON sidecar at <path>.json.

struct EmbeddingMeta {
  std::string encoder_id;
  Pooling pooling = Pooling::FirstToken;
  std::size_t count = 0;
};

namespace detail {

inline void write_le_doubles(std::ostream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
}

inline void read_le_doubles(std::istream& in, std::span<double> values) {
  for (double& v : values) {
    char buf[8];
    if (!in.read(buf, 8)) throw Error(ErrorCode::ParseError, "truncated float64 array");
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
}

inline std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out.push_back(c);
    }
  }
  return out + "'";
}

}  // namespace detail

inline void save_embeddings(const std::string& path, const std::vector<Embedding>& rows, const EmbeddingMeta& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::FileError, "cannot write " + path);
  for (const auto& r : rows) detail::write_le_doubles(out, r);
  if (!out) throw Error(ErrorCode::FileError, "short write to " + path);
  nlohmann::json side = {{"encoder_id", meta.encoder_id},
                         {"pooling", std::string(to_string(meta.pooling))},
                         {"count", rows.size()},
                         {"dim", kEmbeddingDim}};
  detail::write_file(path + ".json", side.dump(2) + "\n");
}

inline std::pair<std::vector<Embedding>, EmbeddingMeta> load_embeddings(const std::string& path) {
  auto side = nlohmann::json::parse(detail::read_file(path + ".json"), nullptr, false);
  if (side.is_discarded()) throw Error(ErrorCode::ParseError, "bad sidecar for " + path);
  EmbeddingMeta meta;
  try {
    meta.encoder_id = side.at("encoder_id").get<std::string>();
    meta.pooling = parse_pooling(side.at("pooling").get<std::string>());
    meta.count = side.at("count").get<std::size_t>();
    if (side.at("dim").get<std::size_t>() != kEmbeddingDim) {
      throw Error(ErrorCode::DimError, "embedding file " + path + " is not 768-dimensional");
    }
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::ParseError, std::string("sidecar: ") + ex.what());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::FileError, "cannot open " + path);
  std::vector<Embedding> rows(meta.count);
  for (auto& r : rows) detail::read_le_doubles(in, r);
  return {std::move(rows), meta};
}

// ---------------------------------------------------------------------------

/// Encoder ids and the checkpoint references they resolve to.
class EncoderRegistry {
 public:
  static EncoderRegistry with_defaults() {
    EncoderRegistry r;
    for (const char* id : {"bert-base-uncased", "bert-base-multilingual-uncased",
                           "dccuchile/bert-base-spanish-wwm-uncased", "dccuchile/bert-base-spanish-wwm-cased",
                           "beto-cased-finetuned-xix-latam"}) {
      r.refs_[id] = id;
    }
    r.refs_[std::string(kStubEncoder)] = "builtin:stub";
    return r;
  }

  void add(const std::string& id, const std::string& checkpoint_ref) { refs_[id] = checkpoint_ref; }

  bool contains(const std::string& id) const { return refs_.count(id) != 0; }

  const std::string& checkpoint(const std::string& id) const {
    auto it = refs_.find(id);
    if (it == refs_.end()) throw Error(ErrorCode::UnknownEncoder, "encoder '" + id + "' is not registered");
    return it->second;
  }

  std::vector<std::string> ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : refs_) out.push_back(id);
    return out;
  }

 private:
  std::map<std::string, std::string> refs_;
};

struct EncoderOptions {
  /// Local directory holding checkpoints as <cache>/<id with '/' -> '__'>.
  std::string cache_dir = std::getenv("IRONIA_ENCODER_CACHE") ? std::getenv("IRONIA_ENCODER_CACHE") : "";
  /// Program invoked for transformer checkpoints; see tools/hf_embed.py.
  std::string embed_command = std::getenv("IRONIA_EMBED_CMD") ? std::getenv("IRONIA_EMBED_CMD") : "python3 tools/hf_embed.py";
};

class EncoderBridge {
 public:
  explicit EncoderBridge(EncoderRegistry registry = EncoderRegistry::with_defaults(), EncoderOptions options = {})
      : registry_(std::move(registry)), options_(std::move(options)) {}

  /// One 768-vector per text, in input order.
  std::vector<Embedding> embed(const std::vector<std::string>& texts, const std::string& encoder_id,
                               Pooling pooling = Pooling::FirstToken) const {
    const std::string& ref = registry_.checkpoint(encoder_id);
    for (const auto& t : texts) {
      if (detail::trim(t).empty()) throw Error(ErrorCode::EmptyText, "cannot embed empty text");
    }
    if (encoder_id == kStubEncoder) {
      std::vector<Embedding> out;
      out.reserve(texts.size());
      for (const auto& t : texts) out.push_back(stub_embed(t));
      return out;
    }
    if (texts.empty()) return {};
    return embed_external(texts, encoder_id, resolve(encoder_id, ref), pooling);
  }

  const EncoderRegistry& registry() const { return registry_; }

 private:
  std::string resolve(const std::string& id, const std::string& ref) const {
    if (options_.cache_dir.empty()) return ref;
    std::string dir_name = id;
    for (auto pos = dir_name.find('/'); pos != std::string::npos; pos = dir_name.find('/')) {
      dir_name.replace(pos, 1, "__");
    }
    auto local = std::filesystem::path(options_.cache_dir) / dir_name;
    return std::filesystem::exists(local) ? local.string() : ref;
  }

  std::vector<Embedding> embed_external(const std::vector<std::string>& texts, const std::string& encoder_id,
                                        const std::string& model_ref, Pooling pooling) const {
    static std::atomic<unsigned> counter{0};
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() /
                         ("ironia-embed-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir);
    struct Cleanup {
      fs::path p;
      ~Cleanup() {
        std::error_code ec;
        fs::remove_all(p, ec);
      }
    } cleanup{dir};

    const auto input = (dir / "texts.jsonl").string();
    const auto output = (dir / "embeddings.bin").string();
    std::string lines;
    for (const auto& t : texts) lines += nlohmann::json({{"text", t}}).dump() + "\n";
    detail::write_file(input, lines);

    const std::string cmd = options_.embed_command + " --model " + detail::shell_quote(model_ref) +
                            " --encoder-id " + detail::shell_quote(encoder_id) + " --pooling " +
                            std::string(to_string(pooling)) + " --input " + detail::shell_quote(input) +
                            " --output " + detail::shell_quote(output);
    if (std::system(cmd.c_str()) != 0) {
      throw Error(ErrorCode::EncoderLoadError, "checkpoint '" + model_ref + "' could not be run: " + cmd);
    }
    try {
      auto [rows, meta] = load_embeddings(output);
      if (rows.size() != texts.size()) {
        throw Error(ErrorCode::EncoderLoadError, "encoder returned " + std::to_string(rows.size()) + " rows");
      }
      for (const auto& r : rows) {
        if (!is_finite(r)) throw Error(ErrorCode::EncoderLoadError, "encoder produced non-finite values");
      }
      return rows;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::EncoderLoadError) throw;
      throw Error(ErrorCode::EncoderLoadError, e.what());
    }
  }

  EncoderRegistry registry_;
  EncoderOptions options_;
};

}  // namespace ironia
