#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "gog/checkpoint.hpp"
#include "gog/error.hpp"
#include "gog/grad_check.hpp"
#include "gog/lstm.hpp"
#include "gog/ops.hpp"
#include "gog/param_store.hpp"

using namespace gog;

namespace {

std::vector<std::uint8_t> ones_mask(std::size_t n) { return std::vector<std::uint8_t>(n, 1); }

}  // namespace

TEST_CASE("linear matches hand-computed products") {
  ParamStore store(1);
  store.create("id", 2, 2, Init::Zeros);
  store.get("id").mut(0, 0) = 1.0;
  store.get("id").mut(1, 1) = 1.0;
  Tensor x = from_values(1, 2, {1, 2});
  Tensor y = linear(x, "id", store);
  CHECK(y.at(0, 0) == doctest::Approx(1.0));
  CHECK(y.at(0, 1) == doctest::Approx(2.0));

  store.create("w", 2, 2, Init::UniformFanIn);
  store.create("b", 1, 2, Init::Zeros);
  store.get("b").mut(0, 0) = 3.0;
  store.get("b").mut(0, 1) = 4.0;
  Tensor zero_in = from_values(1, 2, {0, 0});
  Tensor with_bias = linear(zero_in, "w", "b", store);
  CHECK(with_bias.at(0, 0) == doctest::Approx(3.0));
  CHECK(with_bias.at(0, 1) == doctest::Approx(4.0));

  // dot products by hand: [[1,2],[3,4]] * [[1,0],[1,1]] = [[3,2],[7,4]]
  store.create("w2", 2, 2, Init::Zeros);
  store.get("w2").mut(0, 0) = 1.0;
  store.get("w2").mut(1, 0) = 1.0;
  store.get("w2").mut(1, 1) = 1.0;
  Tensor x2 = from_values(2, 2, {1, 2, 3, 4});
  Tensor y2 = linear(x2, "w2", store);
  CHECK(y2.at(0, 0) == doctest::Approx(3.0));
  CHECK(y2.at(0, 1) == doctest::Approx(2.0));
  CHECK(y2.at(1, 0) == doctest::Approx(7.0));
  CHECK(y2.at(1, 1) == doctest::Approx(4.0));
}

TEST_CASE("linear reports both shapes on mismatch") {
  ParamStore store(1);
  store.create("w", 3, 2);
  Tensor x = zeros(1, 2);
  CHECK_THROWS_AS(linear(x, "w", store), DimensionError);
}

TEST_CASE("masked_softmax handles the defined edge cases") {
  Tensor scores = from_values(1, 4, {10.0, -3.0, 0.5, 2.0});

  SUBCASE("single survivor is one-hot") {
    std::vector<std::uint8_t> mask = {0, 0, 1, 0};
    Tensor out = masked_softmax(scores, mask);
    CHECK(out.at(0, 2) == doctest::Approx(1.0));
    CHECK(out.at(0, 0) == 0.0);
    CHECK(out.at(0, 1) == 0.0);
    CHECK(out.at(0, 3) == 0.0);
  }
  SUBCASE("uniform scores share mass equally") {
    Tensor eq = from_values(1, 4, {0.7, 0.7, 0.7, 0.7});
    Tensor out = masked_softmax(eq, ones_mask(4));
    for (int j = 0; j < 4; ++j) CHECK(out.at(0, j) == doctest::Approx(0.25));
  }
  SUBCASE("exp(ln 2) doubles the weight") {
    Tensor two = from_values(1, 2, {0.0, std::log(2.0)});
    Tensor out = masked_softmax(two, ones_mask(2));
    CHECK(out.at(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(out.at(0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("all masked returns zeros, not an error") {
    std::vector<std::uint8_t> mask = {0, 0, 0, 0};
    Tensor out = masked_softmax(scores, mask);
    for (int j = 0; j < 4; ++j) CHECK(out.at(0, j) == 0.0);
  }
  SUBCASE("unmasked entries sum to one") {
    std::vector<std::uint8_t> mask = {1, 0, 1, 1};
    Tensor out = masked_softmax(scores, mask);
    CHECK(out.at(0, 0) + out.at(0, 2) + out.at(0, 3) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.at(0, 1) == 0.0);
  }
}

TEST_CASE("masked_softmax is shift invariant to 1e-12") {
  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + rng.uniform_int(6);
    std::vector<double> vals(k);
    for (auto& v : vals) v = rng.uniform(-5, 5);
    std::vector<std::uint8_t> mask(k);
    bool any = false;
    for (auto& m : mask) {
      m = rng.uniform() < 0.7 ? 1 : 0;
      any = any || m;
    }
    if (!any) mask[0] = 1;
    Tensor a = from_values(1, k, vals);
    const double c = rng.uniform(-10, 10);
    std::vector<double> shifted = vals;
    for (auto& v : shifted) v += c;
    Tensor b = from_values(1, k, shifted);
    Tensor ya = masked_softmax(a, mask);
    Tensor yb = masked_softmax(b, mask);
    for (int j = 0; j < k; ++j) CHECK(std::abs(ya.at(0, j) - yb.at(0, j)) <= 1e-12);
  }
}

TEST_CASE("layer_norm normalizes rows before the affine") {
  ParamStore store(1);
  store.create("g", 1, 4, Init::Ones);
  store.create("s", 1, 4, Init::Zeros);

  Tensor constant_row = from_values(1, 4, {5, 5, 5, 5});
  Tensor out = layer_norm(constant_row, "g", "s", store);
  for (int j = 0; j < 4; ++j) CHECK(out.at(0, j) == doctest::Approx(0.0).epsilon(1e-9));

  store.create("g2", 1, 2, Init::Ones);
  store.create("s2", 1, 2, Init::Zeros);
  Tensor pre_normalized = from_values(1, 2, {1, -1});
  Tensor out2 = layer_norm(pre_normalized, "g2", "s2", store);
  CHECK(out2.at(0, 0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(out2.at(0, 1) == doctest::Approx(-1.0).epsilon(1e-4));

  // mean 1.5, population variance 1.25
  Tensor ramp = from_values(1, 4, {0, 1, 2, 3});
  Tensor out3 = layer_norm(ramp, "g", "s", store);
  CHECK(out3.at(0, 0) == doctest::Approx(-1.3416).epsilon(1e-3));
  CHECK(out3.at(0, 1) == doctest::Approx(-0.4472).epsilon(1e-3));
  CHECK(out3.at(0, 2) == doctest::Approx(0.4472).epsilon(1e-3));
  CHECK(out3.at(0, 3) == doctest::Approx(1.3416).epsilon(1e-3));
}

TEST_CASE("layer_norm rejects width-1 rows and enforces row statistics") {
  ParamStore store(1);
  store.create("g1", 1, 1, Init::Ones);
  store.create("s1", 1, 1, Init::Zeros);
  Tensor x = from_values(1, 1, {3.0});
  CHECK_THROWS_AS(layer_norm(x, "g1", "s1", store), DimensionError);

  store.create("g", 1, 8, Init::Ones);
  store.create("s", 1, 8, Init::Zeros);
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> vals(8);
    for (auto& v : vals) v = rng.uniform(-3, 3);
    Tensor row_in = from_values(1, 8, vals);
    Tensor y = layer_norm(row_in, "g", "s", store);
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < 8; ++j) mean += y.at(0, j);
    mean /= 8;
    for (int j = 0; j < 8; ++j) var += (y.at(0, j) - mean) * (y.at(0, j) - mean);
    var /= 8;
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(var - 1.0) < 1e-4);  // 1e-5 epsilon inside the sqrt
  }
}

TEST_CASE("lstm_encode gate behavior with zero weights") {
  ParamStore store(1);
  register_lstm_params(store, "l", 3, 4);
  for (const auto& suffix : {".W", ".U", ".b"}) {
    Tensor& t = store.get("l" + std::string(suffix));
    std::fill(t.data->begin(), t.data->end(), 0.0);
  }
  Tensor emb = from_values(2, 3, {1, 2, 3, 4, 5, 6});
  LstmResult res = lstm_encode(emb, store, "l");
  // zero weights: gates 0.5, candidate 0, so hidden stays exactly zero
  for (int j = 0; j < 4; ++j) CHECK(res.per_step.at(0, j) == doctest::Approx(0.0));
  CHECK(res.per_step.rows == 2);
}

TEST_CASE("lstm_encode length-1 sequence returns its only state as last") {
  ParamStore store(7);
  register_lstm_params(store, "l", 3, 4);
  Tensor emb = from_values(1, 3, {0.3, -0.2, 0.9});
  LstmResult res = lstm_encode(emb, store, "l");
  CHECK(res.per_step.rows == 1);
  for (int j = 0; j < 4; ++j) CHECK(res.per_step.at(0, j) == doctest::Approx(res.last.hidden.at(0, j)));
}

TEST_CASE("lstm_encode matches a hand-rolled gate-equation oracle") {
  ParamStore store(42);
  const int d_in = 3, d = 4, L = 3;
  register_lstm_params(store, "l", d_in, d);
  Rng rng(42);
  std::vector<double> emb_vals(L * d_in);
  for (auto& v : emb_vals) v = rng.uniform(-1, 1);
  Tensor emb = from_values(L, d_in, emb_vals);
  LstmResult res = lstm_encode(emb, store, "l");

  // direct transcription of the gate equations with plain loops
  const Tensor& W = store.get("l.W");
  const Tensor& U = store.get("l.U");
  const Tensor& B = store.get("l.b");
  std::vector<double> h(d, 0.0), c(d, 0.0);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (int t = 0; t < L; ++t) {
    std::vector<double> z(4 * d, 0.0);
    for (int j = 0; j < 4 * d; ++j) {
      double acc = B.at(0, j);
      for (int k = 0; k < d_in; ++k) acc += emb.at(t, k) * W.at(k, j);
      for (int k = 0; k < d; ++k) acc += h[k] * U.at(k, j);
      z[j] = acc;
    }
    for (int j = 0; j < d; ++j) {
      const double i_g = sig(z[j]);
      const double f_g = sig(z[d + j]);
      const double g_g = std::tanh(z[2 * d + j]);
      const double o_g = sig(z[3 * d + j]);
      c[j] = f_g * c[j] + i_g * g_g;
      h[j] = o_g * std::tanh(c[j]);
    }
    for (int j = 0; j < d; ++j) CHECK(res.per_step.at(t, j) == doctest::Approx(h[j]).epsilon(1e-9));
  }
  for (int j = 0; j < d; ++j) CHECK(res.last.hidden.at(0, j) == doctest::Approx(h[j]).epsilon(1e-9));
}

TEST_CASE("lstm_encode freezes the last state at valid_len") {
  ParamStore store(11);
  register_lstm_params(store, "l", 2, 3);
  Rng rng(5);
  std::vector<double> vals(8);
  for (auto& v : vals) v = rng.uniform(-1, 1);
  Tensor emb = from_values(4, 2, vals);
  LstmResult full_run = lstm_encode(emb, store, "l", 2);
  Tensor prefix = from_values(2, 2, {vals[0], vals[1], vals[2], vals[3]});
  LstmResult ref = lstm_encode(prefix, store, "l");
  for (int j = 0; j < 3; ++j) {
    CHECK(full_run.last.hidden.at(0, j) == doctest::Approx(ref.last.hidden.at(0, j)));
    CHECK(full_run.per_step.at(2, j) == 0.0);
    CHECK(full_run.per_step.at(3, j) == 0.0);
  }
}

TEST_CASE("kernels are deterministic given the seed") {
  auto run = [] {
    ParamStore store(123);
    store.create("w", 6, 6);
    register_lstm_params(store, "l", 6, 6);
    Rng rng(9);
    std::vector<double> vals(4 * 6);
    for (auto& v : vals) v = rng.uniform(-1, 1);
    Tensor x = from_values(4, 6, vals);
    Tensor y = linear(x, "w", store);
    LstmResult res = lstm_encode(y, store, "l");
    return *res.per_step.data;
  };
  const auto a = run();
  const auto b = run();
  CHECK(a == b);  // bit identical
}

TEST_CASE("check_gradients on simple losses") {
  SUBCASE("loss linear in the bias has exact gradients") {
    ParamStore store(3);
    store.create("w", 3, 2);
    store.create("b", 1, 2, Init::Zeros);
    Tensor x = from_values(2, 3, {0.1, -0.2, 0.3, 0.5, 0.7, -0.9});
    auto loss = [&x](ParamStore& s) { return sum_all(linear(x, "w", "b", s)); };
    const double err = check_gradients(loss, store, 1e-5);
    CHECK(err < 1e-9);
    CHECK((*store.get("b").grad)[0] == doctest::Approx(2.0));  // two rows, all-ones each
  }
  SUBCASE("constant loss gives zero gradients and zero error") {
    ParamStore store(3);
    store.create("w", 2, 2);
    auto loss = [](ParamStore&) { return full(1, 1, 4.0); };
    const double err = check_gradients(loss, store, 1e-5);
    CHECK(err == 0.0);
    for (double g : *store.get("w").grad) CHECK(g == 0.0);
  }
  SUBCASE("composition through softmax, layer norm and lstm") {
    ParamStore store(17);
    store.create("w", 4, 4);
    store.create("g", 1, 4, Init::Ones);
    store.create("s", 1, 4, Init::Zeros);
    register_lstm_params(store, "l", 4, 4);
    Rng rng(8);
    std::vector<double> vals(12);
    for (auto& v : vals) v = rng.uniform(-1, 1);
    Tensor x = from_values(3, 4, vals);
    std::vector<std::uint8_t> mask = {1, 1, 0, 1, 0, 1, 1, 1, 1, 1, 1, 0};
    auto loss = [&](ParamStore& s) {
      Tensor y = layer_norm(linear(x, "w", s), "g", "s", s);
      Tensor sm = masked_softmax_rows(y, mask);
      LstmResult res = lstm_encode(sm, s, "l");
      return mean_all(mul(res.per_step, res.per_step));
    };
    CHECK(check_gradients(loss, store, 1e-5) < 1e-6);
  }
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  ParamStore store(77);
  store.create("a", 3, 5);
  store.create("b", 1, 4, Init::Zeros);
  store.create("frozen", 2, 2, Init::UniformFanIn, /*trainable=*/false);
  CheckpointMeta meta;
  meta.seed = 77;
  meta.config_digest = 0xdeadbeefull;
  meta.epoch = 3;
  meta.config_text = "hidden=8\n";
  meta.vocab_tokens = {"<pad>", "<unk>", "<sos>", "<eos>", "man"};
  meta.has_optimizer = true;
  meta.adam_step = 12;
  meta.adam_moments["a"] = {std::vector<double>(15, 0.25), std::vector<double>(15, 0.5)};

  const std::string path = (std::filesystem::temp_directory_path() / "gog_ckpt_test.bin").string();
  save_checkpoint(path, store, meta);

  CheckpointMeta loaded_meta;
  ParamStore loaded = load_checkpoint(path, loaded_meta);
  CHECK(loaded_meta.seed == meta.seed);
  CHECK(loaded_meta.config_digest == meta.config_digest);
  CHECK(loaded_meta.epoch == meta.epoch);
  CHECK(loaded_meta.config_text == meta.config_text);
  CHECK(loaded_meta.vocab_tokens == meta.vocab_tokens);
  CHECK(loaded_meta.adam_step == 12);
  CHECK(loaded_meta.adam_moments.at("a").first == meta.adam_moments.at("a").first);
  CHECK(*loaded.get("a").data == *store.get("a").data);
  CHECK(*loaded.get("frozen").data == *store.get("frozen").data);
  CHECK_FALSE(loaded.trainable("frozen"));

  // byte-identical on re-save
  const std::string path2 = path + ".2";
  save_checkpoint(path2, loaded, loaded_meta);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("parameter init is a pure function of name, shape and seed") {
  ParamStore a(5), b(5), c(6);
  a.create("x", 3, 3);
  a.create("noise", 2, 2);  // extra entry must not disturb 'x'
  b.create("noise", 2, 2);
  b.create("x", 3, 3);
  c.create("x", 3, 3);
  CHECK(*a.get("x").data == *b.get("x").data);
  CHECK(*a.get("x").data != *c.get("x").data);
  const double bound = 1.0 / std::sqrt(3.0);
  for (double v : *a.get("x").data) {
    CHECK(v >= -bound);
    CHECK(v < bound);
  }
}

TEST_CASE("non-finite values are rejected by kernels") {
  Tensor x = from_values(1, 2, {1e308, 1e308});
  Tensor y = from_values(1, 2, {1e308, 1e308});
  CHECK_THROWS_AS(add(x, y), NumericalError);
}
