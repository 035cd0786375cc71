#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gog/error.hpp"
#include "gog/fusion.hpp"
#include "gog/grad_check.hpp"
#include "gog/ops.hpp"
#include "gog/pipeline.hpp"
#include "gog/toy_gen.hpp"

using namespace gog;

namespace {

struct Fixture {
  Corpus corpus;
  Vocabulary vocab;
  TrainConfig cfg;
  ParamStore store;

  explicit Fixture(std::uint64_t seed = 11) : store(seed) {
    ToyGenConfig gen;
    gen.seed = 7;
    gen.n_dialogs = 3;
    gen.turns = 4;
    gen.n_regions = 4;
    gen.d_v = 8;
    corpus = generate_toy_corpus(gen).corpus;
    vocab = build_vocabulary(corpus, 1);
    cfg.hidden = 8;
    cfg.heads = 2;
    cfg.seed = seed;
    register_model_params(store, {cfg.hidden, cfg.embed(), cfg.heads, vocab.size(), 8});
  }

  GoGState state(int dialog, int round) {
    EncodedDialog enc = encode_features(corpus.dialogs[dialog], round, vocab, store, cfg);
    GogGraphs graphs = build_round_graphs(corpus.dialogs[dialog], round, enc.lambda, enc.q_valid, cfg);
    return run_gog(enc, graphs, cfg.ablations, cfg.heads, store);
  }
};

void register_mha(ParamStore& store, const std::string& prefix, int d, int heads) {
  for (int h = 0; h < heads; ++h) {
    const std::string hp = prefix + ".head" + std::to_string(h);
    store.create(hp + ".Wq", d, d / heads);
    store.create(hp + ".Wk", d, d / heads);
    store.create(hp + ".Wv", d, d / heads);
  }
  store.create(prefix + ".Wo", d, d);
}

Tensor random_mat(Rng& rng, int r, int c) {
  std::vector<double> vals(static_cast<std::size_t>(r) * c);
  for (auto& v : vals) v = rng.uniform(-1, 1);
  return from_values(r, c, vals);
}

}  // namespace

TEST_CASE("cross_attend with one source row repeats the projected row") {
  ParamStore store(2);
  register_mha(store, "att", 4, 2);
  Rng rng(2);
  Tensor source = random_mat(rng, 1, 4);
  Tensor target = random_mat(rng, 3, 4);
  CrossAttOutput out = cross_attend(source, target, {1}, "att", 2, store);
  for (const Tensor& alpha : out.attention) {
    for (int i = 0; i < 3; ++i) CHECK(alpha.at(i, 0) == doctest::Approx(1.0));
  }
  // every output row equals Wo applied to the concatenated per-head values
  Tensor v0 = matmul(source, store.get("att.head0.Wv"));
  Tensor v1 = matmul(source, store.get("att.head1.Wv"));
  Tensor expected = matmul(concat_cols(v0, v1), store.get("att.Wo"));
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(out.out.at(i, j) == doctest::Approx(expected.at(0, j)));
  }
}

TEST_CASE("cross_attend with zero queries averages the projected source") {
  ParamStore store(3);
  register_mha(store, "att", 4, 1);
  Tensor& wq = store.get("att.head0.Wq");
  std::fill(wq.data->begin(), wq.data->end(), 0.0);
  Rng rng(3);
  Tensor source = random_mat(rng, 5, 4);
  Tensor target = random_mat(rng, 2, 4);
  CrossAttOutput out = cross_attend(source, target, std::vector<std::uint8_t>(5, 1), "att", 1, store);
  Tensor projected = matmul(matmul(source, store.get("att.head0.Wv")), store.get("att.Wo"));
  for (int j = 0; j < 4; ++j) {
    double mean = 0.0;
    for (int i = 0; i < 5; ++i) mean += projected.at(i, j);
    mean /= 5;
    CHECK(out.out.at(0, j) == doctest::Approx(mean).epsilon(1e-9));
  }
}

TEST_CASE("cross_attend matches a naive two-loop attention oracle") {
  ParamStore store(42);
  const int d = 8, heads = 2;
  register_mha(store, "att", d, heads);
  Rng rng(42);
  Tensor source = random_mat(rng, 4, d);
  Tensor target = random_mat(rng, 3, d);
  std::vector<std::uint8_t> mask = {1, 1, 0, 1};
  CrossAttOutput out = cross_attend(source, target, mask, "att", heads, store);

  for (int h = 0; h < heads; ++h) {
    const std::string hp = "att.head" + std::to_string(h);
    const Tensor& wq = store.get(hp + ".Wq");
    const Tensor& wk = store.get(hp + ".Wk");
    const int d_k = wq.cols;
    for (int i = 0; i < 3; ++i) {
      std::vector<double> scores(4, 0.0);
      for (int j = 0; j < 4; ++j) {
        for (int k = 0; k < d_k; ++k) {
          double q = 0.0, key = 0.0;
          for (int m = 0; m < d; ++m) {
            q += target.at(i, m) * wq.at(m, k);
            key += source.at(j, m) * wk.at(m, k);
          }
          scores[j] += q * key;
        }
        scores[j] /= std::sqrt(static_cast<double>(d_k));
      }
      double mx = -1e300, z = 0.0;
      for (int j = 0; j < 4; ++j) {
        if (mask[j]) mx = std::max(mx, scores[j]);
      }
      for (int j = 0; j < 4; ++j) z += mask[j] ? std::exp(scores[j] - mx) : 0.0;
      for (int j = 0; j < 4; ++j) {
        const double expect = mask[j] ? std::exp(scores[j] - mx) / z : 0.0;
        CHECK(out.attention[h].at(i, j) == doctest::Approx(expect).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("cross_attend rejects an empty or fully masked source") {
  ParamStore store(4);
  register_mha(store, "att", 4, 1);
  Rng rng(4);
  Tensor target = random_mat(rng, 2, 4);
  Tensor source = random_mat(rng, 2, 4);
  CHECK_THROWS_AS(cross_attend(source, target, {0, 0}, "att", 1, store), ConfigError);
}

TEST_CASE("fuse pools with softmax weights and is deterministic") {
  Fixture fx;
  GoGState s = fx.state(0, 2);
  FusionOutput f1 = fuse(s, fx.cfg.heads, fx.store);
  FusionOutput f2 = fuse(s, fx.cfg.heads, fx.store);
  CHECK(*f1.joint.data == *f2.joint.data);
  CHECK(f1.joint.cols == fx.cfg.hidden);
  check_finite(f1.joint, "joint");

  double sum_v = 0.0, sum_q = 0.0, sum_h = 0.0;
  for (int j = 0; j < f1.v_pool.cols; ++j) sum_v += f1.v_pool.at(0, j);
  for (int j = 0; j < f1.q_pool.cols; ++j) sum_q += f1.q_pool.at(0, j);
  for (int j = 0; j < f1.h_pool.cols; ++j) sum_h += f1.h_pool.at(0, j);
  CHECK(std::abs(sum_v - 1.0) <= 1e-9);
  CHECK(std::abs(sum_q - 1.0) <= 1e-9);
  CHECK(std::abs(sum_h - 1.0) <= 1e-9);
}

TEST_CASE("zero pooling weights make the fused vector a row mean") {
  Fixture fx;
  Tensor& w1 = fx.store.get("fuse.v.pool.W1");
  std::fill(w1.data->begin(), w1.data->end(), 0.0);
  GoGState s = fx.state(0, 1);
  FusionOutput f = fuse(s, fx.cfg.heads, fx.store);
  const int mu = s.v_star.rows;
  for (int j = 0; j < f.v_pool.cols; ++j) CHECK(f.v_pool.at(0, j) == doctest::Approx(1.0 / mu));
}

TEST_CASE("fused pooled vector is invariant under region permutation") {
  Fixture fx;
  GoGState s = fx.state(1, 1);
  FusionOutput base = fuse(s, fx.cfg.heads, fx.store);

  // permute v_star rows and the image graph consistently
  const int mu = s.v_star.rows;
  std::vector<int> perm(mu);
  for (int i = 0; i < mu; ++i) perm[i] = (i + 1) % mu;
  GoGState sp = s;
  sp.v_star = zeros(mu, s.v_star.cols);
  for (int i = 0; i < mu; ++i) {
    for (int j = 0; j < s.v_star.cols; ++j) sp.v_star.mut(perm[i], j) = s.v_star.at(i, j);
  }
  FusionOutput permuted = fuse(sp, fx.cfg.heads, fx.store);
  for (int i = 0; i < mu; ++i) {
    CHECK(std::abs(permuted.v_pool.at(0, perm[i]) - base.v_pool.at(0, i)) <= 1e-9);
  }
  for (int j = 0; j < base.joint.cols; ++j) {
    CHECK(std::abs(permuted.joint.at(0, j) - base.joint.at(0, j)) <= 1e-9);
  }
}

TEST_CASE("discriminative scoring") {
  Fixture fx;

  SUBCASE("uniform dot products cost ln 100") {
    // zero J makes every candidate score identical
    Tensor joint = zeros(1, fx.cfg.hidden);
    std::vector<TokenIds> candidates(100);
    for (int i = 0; i < 100; ++i) candidates[i] = {5 + (i % 7), 5 + (i % 3)};
    Tensor loss = discriminative_loss(joint, candidates, 17, fx.store);
    CHECK(loss.scalar() == doctest::Approx(std::log(100.0)).epsilon(1e-9));
  }
  SUBCASE("a candidate whose encoding alone has positive dot with J ranks first") {
    // five distinct encodings in an 8-dim space; orthogonalize J against all
    // classes except the target so their scores are exactly zero
    std::vector<TokenIds> candidates;
    for (int i = 0; i < 100; ++i) candidates.push_back({4 + (i % 5)});
    AnswerEncoderCache cache;
    std::vector<Tensor> classes;
    for (int c = 0; c < 5; ++c) classes.push_back(encode_answer({4 + c}, fx.store, &cache));
    const int target = 2;
    std::vector<double> j(fx.cfg.hidden);
    for (int k = 0; k < fx.cfg.hidden; ++k) j[k] = classes[target].at(0, k);
    for (int c = 0; c < 5; ++c) {
      if (c == target) continue;
      // Gram-Schmidt step against class c
      double dot = 0.0, norm = 0.0;
      for (int k = 0; k < fx.cfg.hidden; ++k) {
        dot += j[k] * classes[c].at(0, k);
        norm += classes[c].at(0, k) * classes[c].at(0, k);
      }
      for (int k = 0; k < fx.cfg.hidden; ++k) j[k] -= dot / norm * classes[c].at(0, k);
    }
    double self = 0.0;
    for (int k = 0; k < fx.cfg.hidden; ++k) self += j[k] * classes[target].at(0, k);
    REQUIRE(self > 1e-6);  // the residual keeps a positive component
    Tensor joint = from_values(1, fx.cfg.hidden, j);
    CandidateScores s = discriminative_score(joint, candidates, fx.store, &cache);
    CHECK(s.ranking[0] == target);  // the first index of the target class
    CHECK(candidates[s.ranking[0]] == candidates[target]);
  }
  SUBCASE("identical candidates tie and break by index") {
    std::vector<TokenIds> candidates(100, TokenIds{6});
    candidates[40] = {7};
    Rng rng(9);
    Tensor joint = random_mat(rng, 1, fx.cfg.hidden);
    CandidateScores s = discriminative_score(joint, candidates, fx.store);
    for (int i = 0; i + 1 < 100; ++i) {
      if (s.ranking[i] != 40 && s.ranking[i + 1] != 40) CHECK(s.ranking[i] < s.ranking[i + 1]);
    }
    CHECK(s.scores[0] == s.scores[1]);
  }
  SUBCASE("adding a constant to all logits keeps the ranking") {
    std::vector<TokenIds> candidates;
    for (int i = 0; i < 100; ++i) candidates.push_back({4 + (i % 13), 4 + (i % 5)});
    Rng rng(5);
    Tensor joint = random_mat(rng, 1, fx.cfg.hidden);
    CandidateScores a = discriminative_score(joint, candidates, fx.store);
    std::vector<double> shifted = a.scores;
    for (auto& v : shifted) v += 3.25;
    CHECK(rank_descending(shifted) == a.ranking);
  }
}

TEST_CASE("generative scoring") {
  Fixture fx;

  SUBCASE("uniform logits score pure length: L * -ln |V|") {
    Tensor& w = fx.store.get("gen.out.W");
    Tensor& b = fx.store.get("gen.out.b");
    std::fill(w.data->begin(), w.data->end(), 0.0);
    std::fill(b.data->begin(), b.data->end(), 0.0);
    Rng rng(6);
    Tensor joint = random_mat(rng, 1, fx.cfg.hidden);
    // empty answer scores one EOS step; longer candidates pay per token
    std::vector<TokenIds> candidates = {{}, {5}, {5, 6}, {5, 6, 7}};
    CandidateScores s = generative_score(joint, candidates, fx.store);
    const double unit = -std::log(static_cast<double>(fx.vocab.size()));
    CHECK(s.scores[0] == doctest::Approx(1 * unit).epsilon(1e-12));
    CHECK(s.scores[1] == doctest::Approx(2 * unit).epsilon(1e-12));
    CHECK(s.scores[2] == doctest::Approx(3 * unit).epsilon(1e-12));
    CHECK(s.scores[3] == doctest::Approx(4 * unit).epsilon(1e-12));
    CHECK(s.ranking == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("identical candidates score identically; order of presentation is irrelevant") {
    Rng rng(7);
    Tensor joint = random_mat(rng, 1, fx.cfg.hidden);
    std::vector<TokenIds> candidates = {{5, 6}, {7}, {5, 6}, {8, 9, 4}};
    CandidateScores s = generative_score(joint, candidates, fx.store);
    CHECK(s.scores[0] == s.scores[2]);
    std::vector<TokenIds> reversed(candidates.rbegin(), candidates.rend());
    CandidateScores r = generative_score(joint, reversed, fx.store);
    for (int i = 0; i < 4; ++i) CHECK(r.scores[3 - i] == s.scores[i]);
  }
  SUBCASE("loss equals the negative log likelihood of the ground truth") {
    Rng rng(8);
    Tensor joint = random_mat(rng, 1, fx.cfg.hidden);
    TokenIds gt = {5, 9};
    Tensor loss = generative_loss(joint, gt, fx.store);
    CandidateScores s = generative_score(joint, {gt}, fx.store);
    CHECK(loss.scalar() == doctest::Approx(-s.scores[0]).epsilon(1e-12));
  }
}

TEST_CASE("multitask loss is the plain sum and rejects non-finite parts") {
  Tensor a = full(1, 1, 2.0), b = full(1, 1, 3.0);
  CHECK(multitask_loss(a, b).scalar() == doctest::Approx(5.0));
  CHECK(multitask_loss(full(1, 1, 0.0), full(1, 1, 0.0)).scalar() == 0.0);

  Fixture fx;
  GoGState s = fx.state(0, 0);
  FusionOutput f = fuse(s, fx.cfg.heads, fx.store);
  const DialogRound& round = fx.corpus.dialogs[0].dialog.rounds[0];
  std::vector<TokenIds> candidates;
  for (const auto& c : round.candidates) candidates.push_back(fx.vocab.encode(c));
  Tensor ld = discriminative_loss(f.joint, candidates, round.gt_index, fx.store);
  Tensor lg = generative_loss(f.joint, fx.vocab.encode(round.answer), fx.store);
  Tensor total = multitask_loss(ld, lg);
  CHECK(total.scalar() == doctest::Approx(ld.scalar() + lg.scalar()).epsilon(1e-12));
}

TEST_CASE("decoder losses pass the gradient check against finite differences") {
  Fixture fx(23);
  const AnnotatedDialog& ad = fx.corpus.dialogs[0];
  RoundContext ctx = prepare_round(ad, 1, fx.vocab, fx.cfg);
  // trim to 8 candidates to keep the finite-difference sweep fast; scale the
  // loss down so the numeric difference stays above its quantization grain
  ctx.candidate_ids.resize(8);
  ctx.gt_index = ctx.gt_index % 8;
  auto loss = [&](ParamStore& s) {
    ForwardOutput fwd = forward_round(ctx, fx.vocab, s, fx.cfg);
    AnswerEncoderCache cache;
    Tensor ld = discriminative_loss(fwd.fusion.joint, ctx.candidate_ids, ctx.gt_index, s, &cache);
    Tensor lg = generative_loss(fwd.fusion.joint, ctx.answer_ids, s);
    return scale(multitask_loss(ld, lg), 0.002);
  };
  CHECK(check_gradients(loss, fx.store, 1e-5) < 1e-4);
}
