#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "plaus/common.hpp"

namespace plaus {

// Reserved token ids.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kCls = 2;
inline constexpr int kSep = 3;
inline constexpr int kNumReserved = 4;

struct Vocab {
  std::unordered_map<std::string, int> token_to_id;
  std::vector<std::string> id_to_token{"<pad>", "<unk>", "<cls>", "<sep>"};

  std::size_t size() const { return id_to_token.size(); }

  int lookup(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnk : it->second;
  }
};

// Lowercases and splits on whitespace; every punctuation character is its
// own token.
inline std::vector<std::string> tokenize_text(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    }
  }
  flush();
  return out;
}

// Frequency-cutoff vocabulary; id order is frequency descending, ties
// broken lexicographically.
inline Vocab build_vocab(const std::vector<std::string>& texts, std::size_t min_freq) {
  if (min_freq < 1) throw ValidationError("build_vocab: min_freq must be >= 1");
  std::map<std::string, std::size_t> freq;
  for (const auto& t : texts)
    for (const auto& tok : tokenize_text(t)) ++freq[tok];
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, f] : freq)
    if (f >= min_freq) kept.emplace_back(tok, f);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  Vocab v;
  for (const auto& [tok, _] : kept) {
    int id = static_cast<int>(v.id_to_token.size());
    v.token_to_id.emplace(tok, id);
    v.id_to_token.push_back(tok);
  }
  return v;
}

// Token-id layout [CLS, p..., SEP, h..., SEP] with recorded half-open spans.
struct PairTokens {
  std::vector<int> ids;
  std::size_t premise_begin = 0, premise_end = 0;
  std::size_t hypothesis_begin = 0, hypothesis_end = 0;

  friend bool operator==(const PairTokens&, const PairTokens&) = default;
};

inline PairTokens tokenize_pair(const std::string& premise, const std::string& hypothesis,
                                const Vocab& vocab) {
  PairTokens out;
  out.ids.push_back(kCls);
  out.premise_begin = out.ids.size();
  for (const auto& tok : tokenize_text(premise)) out.ids.push_back(vocab.lookup(tok));
  out.premise_end = out.ids.size();
  out.ids.push_back(kSep);
  out.hypothesis_begin = out.ids.size();
  for (const auto& tok : tokenize_text(hypothesis)) out.ids.push_back(vocab.lookup(tok));
  out.hypothesis_end = out.ids.size();
  out.ids.push_back(kSep);
  return out;
}

// Inverse of tokenize_pair up to whitespace: joins span tokens with spaces.
inline std::pair<std::string, std::string> detokenize_pair(const PairTokens& tokens,
                                                           const Vocab& vocab) {
  auto join = [&](std::size_t b, std::size_t e) {
    std::string s;
    for (std::size_t i = b; i < e; ++i) {
      if (!s.empty()) s += ' ';
      s += vocab.id_to_token.at(static_cast<std::size_t>(tokens.ids[i]));
    }
    return s;
  };
  return {join(tokens.premise_begin, tokens.premise_end),
          join(tokens.hypothesis_begin, tokens.hypothesis_end)};
}

// All learnable weights of the scoring model.
struct EncoderParams {
  Matrix embeddings;       // |V| x d
  Matrix w1;               // 3d x d_h
  std::vector<double> b1;  // d_h
  std::vector<double> w2;  // d_h
  double b2 = 0.0;
  std::size_t d = 0;
  std::size_t d_h = 0;
};

inline EncoderParams init_params(std::size_t vocab_size, std::size_t d, std::size_t d_h,
                                 std::uint64_t seed) {
  if (d < 1 || d_h < 1) throw ValidationError("init_params: dims must be >= 1");
  EncoderParams p;
  p.d = d;
  p.d_h = d_h;
  p.embeddings = Matrix(vocab_size, d);
  p.w1 = Matrix(3 * d, d_h);
  p.b1.assign(d_h, 0.0);
  p.w2.assign(d_h, 0.0);
  Rng rng(seed);
  for (double& v : p.embeddings.data) v = rng.next_real(-0.05, 0.05);
  for (double& v : p.w1.data) v = rng.next_real(-0.05, 0.05);
  for (double& v : p.w2) v = rng.next_real(-0.05, 0.05);
  return p;
}

// Intermediates of one forward pass, kept for the backward pass.
struct ForwardCache {
  std::vector<double> feature;  // [e_all ; e_premise ; e_hypothesis], 3d
  std::vector<double> hidden;   // tanh activations, d_h
  double dot = 0.0;             // score before the output bias
};

// score = w2 . tanh(W1^T [e_all; e_p; e_h] + b1) + b2, with each view a
// left-to-right mean of embedding rows (empty span -> zero vector).
inline double forward_pair(const PairTokens& tokens, const EncoderParams& params,
                           ForwardCache* cache = nullptr) {
  const std::size_t d = params.d;
  std::vector<double> feature(3 * d, 0.0);
  auto pool = [&](std::size_t b, std::size_t e, std::size_t offset) {
    if (e <= b) return;
    for (std::size_t i = b; i < e; ++i) {
      int id = tokens.ids[i];
      if (id < 0 || static_cast<std::size_t>(id) >= params.embeddings.rows)
        throw ValidationError("forward_pair: token id out of vocabulary range");
      const double* row = &params.embeddings.data[static_cast<std::size_t>(id) * d];
      for (std::size_t k = 0; k < d; ++k) feature[offset + k] += row[k];
    }
    const double inv = 1.0 / static_cast<double>(e - b);
    for (std::size_t k = 0; k < d; ++k) feature[offset + k] *= inv;
  };
  pool(0, tokens.ids.size(), 0);
  pool(tokens.premise_begin, tokens.premise_end, d);
  pool(tokens.hypothesis_begin, tokens.hypothesis_end, 2 * d);

  std::vector<double> hidden(params.d_h, 0.0);
  for (std::size_t j = 0; j < params.d_h; ++j) {
    double u = params.b1[j];
    for (std::size_t i = 0; i < 3 * d; ++i) u += feature[i] * params.w1.at(i, j);
    hidden[j] = std::tanh(u);
  }
  double dot = 0.0;
  for (std::size_t j = 0; j < params.d_h; ++j) dot += hidden[j] * params.w2[j];
  if (cache) {
    cache->feature = std::move(feature);
    cache->hidden = std::move(hidden);
    cache->dot = dot;
  }
  return dot + params.b2;
}

inline double score_pair(const PairTokens& tokens, const EncoderParams& params) {
  return forward_pair(tokens, params);
}

// --- Checkpoint format -----------------------------------------------------
//
// Binary container: magic "PLCK", u32 version, u64 d, u64 d_h, u64 |V|,
// vocab tokens (u32 length + bytes each), then embeddings / W1 / b1 / w2 /
// b2 as row-major little-endian f64.

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}
inline void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(raw(4)); }
  std::uint64_t u64() { return raw(8); }
  double f64() {
    std::uint64_t bits = raw(8);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }

 private:
  std::uint64_t raw(std::size_t n) {
    need(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  void need(std::size_t n) {
    if (pos_ + n > data_.size()) throw ParseError("checkpoint: truncated file");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string serialize_checkpoint(const EncoderParams& params, const Vocab& vocab) {
  if (params.embeddings.rows != vocab.size())
    throw ValidationError("checkpoint: vocab size does not match embedding rows");
  std::string out = "PLCK";
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u64(out, params.d);
  detail::put_u64(out, params.d_h);
  detail::put_u64(out, vocab.size());
  for (const auto& tok : vocab.id_to_token) {
    detail::put_u32(out, static_cast<std::uint32_t>(tok.size()));
    out += tok;
  }
  for (double v : params.embeddings.data) detail::put_f64(out, v);
  for (double v : params.w1.data) detail::put_f64(out, v);
  for (double v : params.b1) detail::put_f64(out, v);
  for (double v : params.w2) detail::put_f64(out, v);
  detail::put_f64(out, params.b2);
  return out;
}

inline std::pair<EncoderParams, Vocab> parse_checkpoint(std::string_view data) {
  detail::ByteReader r(data);
  if (r.bytes(4) != "PLCK") throw ParseError("checkpoint: bad magic");
  std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw ParseError("checkpoint: unsupported version " + std::to_string(version));
  std::size_t d = r.u64();
  std::size_t d_h = r.u64();
  std::size_t vsize = r.u64();
  if (vsize < kNumReserved) throw ParseError("checkpoint: vocab smaller than reserved ids");
  Vocab vocab;
  vocab.id_to_token.clear();
  for (std::size_t i = 0; i < vsize; ++i) {
    std::uint32_t len = r.u32();
    std::string tok = r.bytes(len);
    if (i >= kNumReserved) vocab.token_to_id.emplace(tok, static_cast<int>(i));
    vocab.id_to_token.push_back(std::move(tok));
  }
  EncoderParams p;
  p.d = d;
  p.d_h = d_h;
  p.embeddings = Matrix(vsize, d);
  p.w1 = Matrix(3 * d, d_h);
  p.b1.assign(d_h, 0.0);
  p.w2.assign(d_h, 0.0);
  for (double& v : p.embeddings.data) v = r.f64();
  for (double& v : p.w1.data) v = r.f64();
  for (double& v : p.b1) v = r.f64();
  for (double& v : p.w2) v = r.f64();
  p.b2 = r.f64();
  return {std::move(p), std::move(vocab)};
}

}  // namespace plaus
