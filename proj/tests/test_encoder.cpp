#include <doctest.h>

#include <cmath>

#include "plaus/encoder.hpp"

using namespace plaus;

TEST_CASE("build_vocab orders ids by frequency then lexicographically") {
  auto v = build_vocab({"A a b."}, 1);
  // "a" twice, "b" and "." once each.
  CHECK(v.size() == 7);
  CHECK(v.lookup("a") == kNumReserved);
  CHECK(v.lookup(".") == kNumReserved + 1);  // "." < "b"
  CHECK(v.lookup("b") == kNumReserved + 2);
}

TEST_CASE("build_vocab drops tokens below min_freq") {
  auto v = build_vocab({"A a b."}, 2);
  CHECK(v.size() == 5);
  CHECK(v.lookup("a") == kNumReserved);
  CHECK(v.lookup("b") == kUnk);
}

TEST_CASE("build_vocab is insensitive to line order") {
  auto a = build_vocab({"x y", "z z w"}, 1);
  auto b = build_vocab({"z z w", "x y"}, 1);
  CHECK(a.id_to_token == b.id_to_token);
}

TEST_CASE("empty corpus leaves only reserved ids") {
  CHECK(build_vocab({}, 1).size() == kNumReserved);
}

TEST_CASE("tokenize_pair layout is [CLS p SEP h SEP]") {
  auto v = build_vocab({"i stopped halted ."}, 1);
  auto t = tokenize_pair("I stopped.", "I halted.", v);
  std::vector<int> expected = {kCls,           v.lookup("i"), v.lookup("stopped"), v.lookup("."),
                               kSep,           v.lookup("i"), v.lookup("halted"),  v.lookup("."),
                               kSep};
  CHECK(t.ids == expected);
  CHECK(t.premise_begin == 1);
  CHECK(t.premise_end == 4);
  CHECK(t.hypothesis_begin == 5);
  CHECK(t.hypothesis_end == 8);
}

TEST_CASE("out-of-vocabulary hypothesis maps to UNK") {
  auto v = build_vocab({"known"}, 1);
  auto t = tokenize_pair("known", "mystery words", v);
  for (std::size_t i = t.hypothesis_begin; i < t.hypothesis_end; ++i) CHECK(t.ids[i] == kUnk);
}

TEST_CASE("tokenize_pair is asymmetric in its arguments") {
  auto v = build_vocab({"a b"}, 1);
  CHECK(tokenize_pair("a", "b", v) != tokenize_pair("b", "a", v));
}

TEST_CASE("detokenize round-trips for in-vocabulary text") {
  auto v = build_vocab({"the cat sat down"}, 1);
  auto t = tokenize_pair("the cat", "sat down", v);
  auto [p, h] = detokenize_pair(t, v);
  CHECK(tokenize_pair(p, h, v) == t);
}

TEST_CASE("init_params is deterministic with the documented shapes") {
  auto a = init_params(1000, 64, 128, 3);
  auto b = init_params(1000, 64, 128, 3);
  CHECK(a.embeddings.data == b.embeddings.data);
  CHECK(a.w1.data == b.w1.data);
  CHECK(a.embeddings.rows == 1000);
  CHECK(a.embeddings.cols == 64);
  CHECK(a.w1.rows == 192);
  CHECK(a.w1.cols == 128);
  for (double x : a.embeddings.data) {
    CHECK(x >= -0.05);
    CHECK(x < 0.05);
  }
  for (double x : a.b1) CHECK(x == 0.0);
  CHECK(a.b2 == 0.0);
}

TEST_CASE("zero params score 0 and w2=0 scores b2") {
  auto v = build_vocab({"a b c"}, 1);
  EncoderParams p;
  p.d = 3;
  p.d_h = 2;
  p.embeddings = Matrix(v.size(), 3);
  p.w1 = Matrix(9, 2);
  p.b1.assign(2, 0.0);
  p.w2.assign(2, 0.0);
  auto t = tokenize_pair("a b", "c", v);
  CHECK(score_pair(t, p) == 0.0);
  p.b2 = 1.5;
  p.w1.fill(0.3);
  p.embeddings.fill(0.1);
  CHECK(score_pair(t, p) == 1.5);
}

// Hand evaluation of the closed-form forward pass on a fixed tiny model:
// d=2, d_h=2, vocab {<pad>,<unk>,<cls>,<sep>, "a", "b"}.
TEST_CASE("score_pair matches a hand-computed value") {
  Vocab v;
  v.id_to_token = {"<pad>", "<unk>", "<cls>", "<sep>", "a", "b"};
  v.token_to_id = {{"a", 4}, {"b", 5}};
  EncoderParams p;
  p.d = 2;
  p.d_h = 2;
  p.embeddings = Matrix(6, 2);
  // Sentinels at zero; e("a") = (1, 2), e("b") = (-1, 0.5).
  p.embeddings.at(4, 0) = 1.0;
  p.embeddings.at(4, 1) = 2.0;
  p.embeddings.at(5, 0) = -1.0;
  p.embeddings.at(5, 1) = 0.5;
  p.w1 = Matrix(6, 2);
  for (std::size_t i = 0; i < 6; ++i) {
    p.w1.at(i, 0) = 0.1;
    p.w1.at(i, 1) = -0.2;
  }
  p.b1 = {0.05, 0.1};
  p.w2 = {1.0, -1.0};
  p.b2 = 0.25;

  auto t = tokenize_pair("a", "b", v);
  // ids = [CLS, a, SEP, b, SEP]; e_all = ((1-1)/5, (2+0.5)/5) = (0, 0.5);
  // e_p = (1, 2); e_h = (-1, 0.5). feature = (0, 0.5, 1, 2, -1, 0.5).
  // u0 = 0.1*sum(feature) + 0.05 = 0.1*3 + 0.05 = 0.35
  // u1 = -0.2*3 + 0.1 = -0.5
  // score = tanh(0.35) - tanh(-0.5) + 0.25
  double expected = std::tanh(0.35) - std::tanh(-0.5) + 0.25;
  CHECK(score_pair(t, p) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("score is invariant to permutations within the premise span") {
  auto v = build_vocab({"a b c d e f"}, 1);
  auto p = init_params(v.size(), 4, 5, 7);
  double s1 = score_pair(tokenize_pair("a b c", "d e", v), p);
  double s2 = score_pair(tokenize_pair("c a b", "d e", v), p);
  CHECK(s1 == doctest::Approx(s2).epsilon(1e-12));
}

TEST_CASE("scores stay finite for finite params") {
  auto v = build_vocab({"a b"}, 1);
  auto p = init_params(v.size(), 4, 4, 1);
  for (double& x : p.w2) x = 1e6;
  for (double& x : p.embeddings.data) x = 500.0;
  CHECK(std::isfinite(score_pair(tokenize_pair("a", "b", v), p)));
}

TEST_CASE("out-of-range token id is rejected") {
  auto v = build_vocab({"a"}, 1);
  auto p = init_params(3, 2, 2, 1);  // embedding table smaller than vocab
  auto t = tokenize_pair("a", "a", v);
  CHECK_THROWS_AS(score_pair(t, p), ValidationError);
}

TEST_CASE("checkpoint serialization round-trips params and vocab") {
  auto v = build_vocab({"alpha beta gamma alpha"}, 1);
  auto p = init_params(v.size(), 5, 7, 99);
  p.b2 = 0.125;
  auto bytes = serialize_checkpoint(p, v);
  auto [p2, v2] = parse_checkpoint(bytes);
  CHECK(p2.embeddings.data == p.embeddings.data);
  CHECK(p2.w1.data == p.w1.data);
  CHECK(p2.b1 == p.b1);
  CHECK(p2.w2 == p.w2);
  CHECK(p2.b2 == p.b2);
  CHECK(v2.id_to_token == v.id_to_token);
  CHECK(v2.lookup("beta") == v.lookup("beta"));
}

TEST_CASE("checkpoint parser rejects corrupt input") {
  CHECK_THROWS_AS(parse_checkpoint("XXXX"), ParseError);
  auto v = build_vocab({"a"}, 1);
  auto bytes = serialize_checkpoint(init_params(v.size(), 2, 2, 1), v);
  bytes.resize(bytes.size() / 2);
  CHECK_THROWS_AS(parse_checkpoint(bytes), ParseError);
}
