#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "gog/error.hpp"
#include "gog/metrics.hpp"
#include "gog/param_store.hpp"
#include "gog/toy_gen.hpp"
#include "gog/trainer.hpp"

using namespace gog;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::string& p) {
  std::ifstream is(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

// brute-force reference: recompute ranks by naive sorting, metrics by formula
struct BruteMetrics {
  double mrr = 0, r1 = 0, r5 = 0, r10 = 0, mean = 0, ndcg = 0;
  int ndcg_rounds = 0;
};

BruteMetrics brute_force(const std::vector<std::vector<double>>& scores,
                         const std::vector<int>& gts,
                         const std::vector<std::vector<double>>* relevances) {
  BruteMetrics out;
  for (std::size_t r = 0; r < scores.size(); ++r) {
    int rank = 1;
    for (std::size_t j = 0; j < scores[r].size(); ++j) {
      if (scores[r][j] > scores[r][gts[r]]) ++rank;
      if (scores[r][j] == scores[r][gts[r]] && static_cast<int>(j) < gts[r]) ++rank;
    }
    out.mrr += 1.0 / rank;
    out.mean += rank;
    out.r1 += rank <= 1;
    out.r5 += rank <= 5;
    out.r10 += rank <= 10;
    if (relevances) {
      const auto& rel = (*relevances)[r];
      std::vector<int> order(rel.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int a, int b) { return scores[r][a] > scores[r][b]; });
      int k = 0;
      for (double v : rel) k += v > 0;
      double dcg = 0, idcg = 0;
      std::vector<double> ideal = rel;
      std::sort(ideal.begin(), ideal.end(), std::greater<double>());
      for (int p = 0; p < k; ++p) {
        dcg += rel[order[p]] / std::log2(p + 2.0);
        idcg += ideal[p] / std::log2(p + 2.0);
      }
      if (k > 0) {
        out.ndcg += dcg / idcg;
        ++out.ndcg_rounds;
      }
    }
  }
  const double n = static_cast<double>(scores.size());
  out.mrr /= n;
  out.mean /= n;
  out.r1 /= n;
  out.r5 /= n;
  out.r10 /= n;
  if (out.ndcg_rounds) out.ndcg /= out.ndcg_rounds;
  return out;
}

std::vector<int> ranking_of(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

TEST_CASE("compute_metrics on the pinned examples") {
  SUBCASE("gt at rank 1 everywhere") {
    std::vector<RoundResult> rounds;
    for (int r = 0; r < 5; ++r) {
      std::vector<int> ranking(100);
      std::iota(ranking.begin(), ranking.end(), 0);
      rounds.push_back({ranking, 0, std::nullopt});
    }
    MetricsReport m = compute_metrics(rounds);
    CHECK(m.mrr == doctest::Approx(1.0));
    CHECK(m.r_at_1 == doctest::Approx(1.0));
    CHECK(m.mean_rank == doctest::Approx(1.0));
    CHECK_FALSE(m.ndcg.has_value());  // unavailable, not zero
  }
  SUBCASE("single round with gt at rank 4") {
    std::vector<int> ranking(100);
    std::iota(ranking.begin(), ranking.end(), 0);
    std::swap(ranking[0], ranking[3]);  // gt_index 0 lands at position 4
    MetricsReport m = compute_metrics({{ranking, 0, std::nullopt}});
    CHECK(m.mrr == doctest::Approx(0.25));
    CHECK(m.r_at_1 == doctest::Approx(0.0));
    CHECK(m.r_at_5 == doctest::Approx(1.0));
    CHECK(m.gt_ranks == std::vector<int>{4});
  }
  SUBCASE("worked NDCG example: 0.5 ranked above the 1.0") {
    std::vector<double> rel(100, 0.0);
    rel[0] = 1.0;
    rel[1] = 0.5;
    std::vector<int> ranking(100);
    std::iota(ranking.begin(), ranking.end(), 0);
    std::swap(ranking[0], ranking[1]);  // the 0.5 item first, the 1.0 second
    MetricsReport m = compute_metrics({{ranking, 0, rel}});
    REQUIRE(m.ndcg.has_value());
    CHECK(*m.ndcg == doctest::Approx(0.85972).epsilon(1e-4));
  }
  SUBCASE("rankings must be permutations") {
    std::vector<int> bad(100, 7);
    CHECK_THROWS_AS(compute_metrics({{bad, 0, std::nullopt}}), ValidationError);
  }
}

TEST_CASE("compute_metrics agrees with the brute-force oracle on 1000 rounds") {
  Rng rng(1234);
  std::vector<std::vector<double>> scores;
  std::vector<std::vector<double>> relevances;
  std::vector<int> gts;
  std::vector<RoundResult> rounds;
  for (int r = 0; r < 1000; ++r) {
    std::vector<double> s(100);
    for (auto& v : s) v = rng.uniform(-3, 3);
    if (r % 7 == 0) s[rng.uniform_int(100)] = s[rng.uniform_int(100)];  // occasional ties
    const int gt = rng.uniform_int(100);
    std::vector<double> rel(100, 0.0);
    rel[gt] = 1.0;
    for (int extra = rng.uniform_int(4); extra > 0; --extra) rel[rng.uniform_int(100)] = 0.5;
    rel[gt] = 1.0;
    scores.push_back(s);
    gts.push_back(gt);
    relevances.push_back(rel);
    rounds.push_back({ranking_of(s), gt, rel});
  }
  MetricsReport m = compute_metrics(rounds);
  BruteMetrics b = brute_force(scores, gts, &relevances);
  CHECK(m.mrr == doctest::Approx(b.mrr).epsilon(1e-9));
  CHECK(m.mean_rank == doctest::Approx(b.mean).epsilon(1e-9));
  CHECK(m.r_at_1 == doctest::Approx(b.r1));
  CHECK(m.r_at_5 == doctest::Approx(b.r5));
  CHECK(m.r_at_10 == doctest::Approx(b.r10));
  REQUIRE(m.ndcg.has_value());
  CHECK(*m.ndcg == doctest::Approx(b.ndcg).epsilon(1e-9));
}

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  cfg.max_epochs = 20;
  CHECK(lr_at(1, cfg) == doctest::Approx(0.0001));
  CHECK(lr_at(4, cfg) == doctest::Approx(0.0002));
  CHECK(lr_at(10, cfg) == doctest::Approx(0.0002));
  CHECK(lr_at(15, cfg) == doctest::Approx(0.0002));
  CHECK(lr_at(16, cfg) == doctest::Approx(0.0002));
  CHECK(lr_at(17, cfg) == doctest::Approx(0.00005));  // one quarter-decay period
  CHECK(lr_at(19, cfg) == doctest::Approx(0.0000125));
  CHECK_THROWS_AS(lr_at(0, cfg), ConfigError);
  CHECK_THROWS_AS(lr_at(21, cfg), ConfigError);

  SUBCASE("piecewise monotone") {
    cfg.max_epochs = 40;
    for (int e = 2; e <= 4; ++e) CHECK(lr_at(e, cfg) >= lr_at(e - 1, cfg));
    for (int e = 5; e <= 15; ++e) CHECK(lr_at(e, cfg) == doctest::Approx(cfg.peak_lr));
    for (int e = 16; e <= 40; ++e) CHECK(lr_at(e, cfg) <= lr_at(e - 1, cfg));
  }
  SUBCASE("the milder three-quarters reading is selectable") {
    cfg.decay_factor = 0.75;
    CHECK(lr_at(17, cfg) == doctest::Approx(0.0002 * 0.75));
  }
}

TEST_CASE("invalid configs are rejected") {
  TrainConfig cfg;
  cfg.base_lr = 3e-4;  // above peak
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  TrainConfig cfg2;
  cfg2.hidden = 10;
  cfg2.heads = 4;
  CHECK_THROWS_AS(cfg2.validate(), ConfigError);
  TrainConfig ok;
  ok.validate();
}

TEST_CASE("config file and overrides round-trip") {
  auto dir = temp_dir("gog_cfg");
  {
    std::ofstream os((dir / "run.cfg").string());
    os << "# toy settings\n";
    os << "hidden=16\n";
    os << "heads=2\n";
    os << "decoder_mode=multi\n";
    os << "ablations=h-graph,q-aware\n";
  }
  TrainConfig cfg = load_config_file((dir / "run.cfg").string());
  CHECK(cfg.hidden == 16);
  CHECK(cfg.decoder_mode == DecoderMode::Multi);
  CHECK(cfg.ablations.h_graph);
  CHECK(cfg.ablations.q_aware);
  CHECK_FALSE(cfg.ablations.i_graph);
  apply_override(cfg, "batch_size=4");
  CHECK(cfg.batch_size == 4);
  CHECK_THROWS_AS(apply_override(cfg, "no_such_key=1"), ConfigError);
  CHECK_THROWS_AS(parse_ablations("w-graph"), ConfigError);

  // canonical text reparses to the same digest
  TrainConfig reparsed;
  std::istringstream is(config_to_text(cfg));
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) apply_override(reparsed, line);
  }
  CHECK(config_digest(cfg, 50, 16) == config_digest(reparsed, 50, 16));
  CHECK(config_digest(cfg, 50, 16) != config_digest(cfg, 51, 16));
}

TEST_CASE("adam moves parameters against the gradient") {
  ParamStore store(3);
  store.create("w", 2, 2, Init::Zeros);
  Tensor& w = store.get("w");
  (*w.grad)[0] = 1.0;
  (*w.grad)[1] = -1.0;
  Adam adam;
  adam.step(store, 0.1);
  CHECK((*w.data)[0] < 0.0);
  CHECK((*w.data)[1] > 0.0);
  CHECK((*w.data)[2] == 0.0);  // zero gradient, zero move
  CHECK(adam.steps() == 1);
}

TEST_CASE("training on one dialog decreases the loss") {
  ToyGenConfig gen;
  gen.seed = 31;
  gen.n_dialogs = 1;
  gen.turns = 3;
  gen.n_regions = 4;
  gen.d_v = 8;
  Corpus corpus = generate_toy_corpus(gen).corpus;
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.heads = 2;
  cfg.batch_size = 3;
  cfg.max_epochs = 6;
  cfg.vocab_min_freq = 1;
  cfg.seed = 9;
  auto dir = temp_dir("gog_train_smoke");
  TrainResult result = train(cfg, corpus, nullptr, dir.string());
  REQUIRE(result.log.size() == 6);
  CHECK(result.log.back().loss < result.log.front().loss);
  CHECK_FALSE(result.diverged);
  CHECK(std::filesystem::exists(result.checkpoint_path));
}

TEST_CASE("multi-task batch loss equals the sum of its parts") {
  ToyGenConfig gen;
  gen.seed = 32;
  gen.n_dialogs = 2;
  gen.turns = 2;
  gen.d_v = 8;
  Corpus corpus = generate_toy_corpus(gen).corpus;
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.batch_size = 4;
  cfg.max_epochs = 1;
  cfg.vocab_min_freq = 1;
  cfg.decoder_mode = DecoderMode::Multi;
  auto dir = temp_dir("gog_train_multi");
  TrainResult result = train(cfg, corpus, nullptr, dir.string());
  REQUIRE(result.log.size() == 1);
  CHECK(result.log[0].loss ==
        doctest::Approx(result.log[0].loss_d + result.log[0].loss_g).epsilon(1e-9));
}

TEST_CASE("identical seeds give bit-identical checkpoints") {
  ToyGenConfig gen;
  gen.seed = 33;
  gen.n_dialogs = 2;
  gen.turns = 2;
  gen.d_v = 8;
  Corpus corpus = generate_toy_corpus(gen).corpus;
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.max_epochs = 2;
  cfg.vocab_min_freq = 1;
  cfg.seed = 77;
  auto dir_a = temp_dir("gog_det_a");
  auto dir_b = temp_dir("gog_det_b");
  TrainResult a = train(cfg, corpus, nullptr, dir_a.string());
  TrainResult b = train(cfg, corpus, nullptr, dir_b.string());
  CHECK(slurp(a.checkpoint_path) == slurp(b.checkpoint_path));
}

TEST_CASE("save, load and evaluate round-trips identically; resume works") {
  ToyGenConfig gen;
  gen.seed = 34;
  gen.n_dialogs = 3;
  gen.turns = 2;
  gen.d_v = 8;
  Corpus corpus = generate_toy_corpus(gen).corpus;
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.max_epochs = 2;
  cfg.vocab_min_freq = 1;
  cfg.seed = 5;
  auto dir = temp_dir("gog_resume");
  TrainResult trained = train(cfg, corpus, nullptr, dir.string());

  EvalResult e1 = evaluate(trained.checkpoint_path, corpus, DecoderMode::Disc);
  EvalResult e2 = evaluate(trained.checkpoint_path, corpus, DecoderMode::Disc);
  REQUIRE(e1.disc.has_value());
  CHECK(e1.disc->mrr == e2.disc->mrr);
  CHECK(e1.disc->gt_ranks == e2.disc->gt_ranks);

  // resume with zero additional epochs leaves evaluation unchanged
  TrainConfig same = cfg;
  auto dir2 = temp_dir("gog_resume2");
  TrainResult resumed = train(same, corpus, nullptr, dir2.string(), trained.checkpoint_path);
  CHECK(resumed.log.empty());  // already at max_epochs
  EvalResult e3 = evaluate(resumed.checkpoint_path, corpus, DecoderMode::Disc);
  CHECK(e3.disc->gt_ranks == e1.disc->gt_ranks);
  CHECK(e3.disc->mrr == e1.disc->mrr);
}

TEST_CASE("evaluation refuses a checkpoint with a different config digest") {
  ToyGenConfig gen;
  gen.seed = 35;
  gen.n_dialogs = 2;
  gen.turns = 2;
  gen.d_v = 8;
  Corpus corpus = generate_toy_corpus(gen).corpus;
  TrainConfig cfg;
  cfg.hidden = 8;
  cfg.heads = 2;
  cfg.max_epochs = 1;
  cfg.vocab_min_freq = 1;
  auto dir = temp_dir("gog_digest");
  TrainResult trained = train(cfg, corpus, nullptr, dir.string());
  TrainConfig other = cfg;
  other.hidden = 16;
  CHECK_THROWS_AS(evaluate(trained.checkpoint_path, corpus, DecoderMode::Disc, "", &other),
                  ConfigError);
}
