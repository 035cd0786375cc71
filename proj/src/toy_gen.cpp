#include "gog/toy_gen.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>

#include "gog/error.hpp"
#include "gog/param_store.hpp"

namespace gog {

namespace {

const std::vector<std::string> kEntities = {"man",  "woman", "dog",  "cat",  "car",
                                            "ball", "tree",  "house", "bird", "horse"};
const std::vector<std::string> kColors = {"red", "blue", "green", "yellow", "black", "white"};

constexpr double kImageW = 128.0;
constexpr double kImageH = 96.0;
constexpr int kCandidates = 100;

std::vector<double> prototype(const std::string& key, int d_v) {
  Rng rng(fnv1a64("proto:" + key));
  std::vector<double> v(d_v);
  for (auto& x : v) x = rng.gaussian();
  return v;
}

std::vector<std::vector<std::string>> build_answer_pool() {
  std::vector<std::vector<std::string>> pool;
  pool.push_back({"yes"});
  pool.push_back({"no"});
  for (const auto& c : kColors) pool.push_back({c});
  for (const auto& c : kColors) pool.push_back({"it", "is", c});
  for (const auto& e : kEntities) pool.push_back({"a", e});
  for (const auto& e : kEntities) pool.push_back({"the", e});
  for (const auto& c : kColors) {
    for (const auto& e : kEntities) pool.push_back({"a", c, e});
  }
  pool.push_back({"maybe"});
  pool.push_back({"i", "can", "not", "tell"});
  pool.push_back({"probably"});
  pool.push_back({"of", "course"});
  pool.push_back({"not", "at", "all"});
  pool.push_back({"hard", "to", "say"});
  pool.push_back({"i", "think", "so"});
  pool.push_back({"it", "looks", "like", "it"});
  pool.push_back({"no", "idea"});
  pool.push_back({"possibly"});
  pool.push_back({"definitely"});
  pool.push_back({"sort", "of"});
  return pool;
}

// answers judged half right of the given ground truth, for graded relevance
std::vector<std::vector<std::string>> paraphrases(const std::vector<std::string>& gt) {
  if (gt.size() == 1 && gt[0] == "yes") {
    return {{"i", "think", "so"}, {"of", "course"}, {"definitely"}};
  }
  if (gt.size() == 1 && gt[0] == "no") {
    return {{"not", "at", "all"}, {"no", "idea"}};
  }
  if (gt.size() == 1) {  // a bare color
    return {{"it", "is", gt[0]}};
  }
  if (gt.size() == 3 && gt[0] == "a") {  // "a <color> <entity>"
    return {{"the", gt[2]}, {"a", gt[2]}};
  }
  return {};
}

struct DepParse {
  std::vector<int> heads;
  std::vector<std::string> labels;
};

DependencyAnnotation to_annotation(const DepParse& p) {
  DependencyAnnotation dep;
  dep.heads = p.heads;
  for (const auto& l : p.labels) dep.labels.push_back(dep_label_id(l));
  return dep;
}

}  // namespace

ToyCorpus generate_toy_corpus(const ToyGenConfig& cfg) {
  if (cfg.turns < 1) throw GenerationError("generate_toy_corpus: turns must be >= 1");
  if (cfg.n_regions < 2) throw GenerationError("generate_toy_corpus: n_regions must be >= 2");
  if (cfg.n_regions > static_cast<int>(kEntities.size())) {
    throw GenerationError("generate_toy_corpus: at most " + std::to_string(kEntities.size()) +
                          " distinct entities available");
  }
  if (cfg.d_v < 2) throw GenerationError("generate_toy_corpus: d_v must be >= 2");

  const auto pool = build_answer_pool();
  if (pool.size() < kCandidates) {
    throw GenerationError("generate_toy_corpus: answer pool of " + std::to_string(pool.size()) +
                          " cannot fill " + std::to_string(kCandidates) + " distinct candidates");
  }
  std::map<std::vector<std::string>, int> pool_index;
  for (std::size_t i = 0; i < pool.size(); ++i) pool_index[pool[i]] = static_cast<int>(i);

  ToyCorpus out;
  Rng master(cfg.seed);
  for (int di = 0; di < cfg.n_dialogs; ++di) {
    Rng rng(master.next_u64());
    AnnotatedDialog ad;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "%s_%05d", cfg.id_prefix.c_str(), di);
    ad.dialog.image_id = idbuf;
    ad.dialog.image_w = kImageW;
    ad.dialog.image_h = kImageH;

    // pick distinct entities and a color each
    std::vector<int> ents(kEntities.size());
    std::iota(ents.begin(), ents.end(), 0);
    for (int i = static_cast<int>(ents.size()) - 1; i > 0; --i) {
      std::swap(ents[i], ents[rng.uniform_int(i + 1)]);
    }
    ents.resize(cfg.n_regions);
    std::vector<int> colors(cfg.n_regions);
    for (auto& c : colors) c = rng.uniform_int(static_cast<int>(kColors.size()));

    for (int i = 0; i < cfg.n_regions; ++i) {
      Region region;
      const double x1 = rng.uniform_int(96);
      const double y1 = rng.uniform_int(64);
      region.bbox = {x1, y1, x1 + 16 + rng.uniform_int(17), y1 + 16 + rng.uniform_int(17)};
      const auto ep = prototype("ent:" + kEntities[ents[i]], cfg.d_v);
      const auto cp = prototype("color:" + kColors[colors[i]], cfg.d_v);
      region.feature.resize(cfg.d_v);
      for (int k = 0; k < cfg.d_v; ++k) region.feature[k] = ep[k] + cp[k] + 0.1 * rng.gaussian();
      ad.dialog.regions.push_back(std::move(region));
    }

    // caption introduces the first two regions
    ad.dialog.caption = {"a", kColors[colors[0]], kEntities[ents[0]], "and",
                         "a", kColors[colors[1]], kEntities[ents[1]]};
    std::map<int, std::vector<CorefMention>> mentions;  // region index -> mentions
    mentions[0].push_back({0, 2, 3});
    mentions[1].push_back({0, 6, 7});

    int topic = 0;  // region index the dialog is currently about
    for (int r = 0; r < cfg.turns; ++r) {
      DialogRound round;
      DepParse parse;
      std::vector<std::string> gt;
      const int turn = r + 1;

      int kind = rng.uniform_int(r == 0 ? 3 : 5);
      if (kind == 0) {  // "what color is the <ent> ?"
        const int reg = rng.uniform_int(cfg.n_regions);
        round.question = {"what", "color", "is", "the", kEntities[ents[reg]], "?"};
        parse = {{1, -1, 1, 4, 1, 1}, {"det", "root", "cop", "det", "nsubj", "punct"}};
        mentions[reg].push_back({turn, 4, 5});
        gt = {kColors[colors[reg]]};
        topic = reg;
      } else if (kind == 1) {  // "is the <ent> <color> ?"
        const int reg = rng.uniform_int(cfg.n_regions);
        int asked = colors[reg];
        const bool truthful = rng.uniform() < 0.5;
        if (!truthful) {
          asked = (asked + 1 + rng.uniform_int(static_cast<int>(kColors.size()) - 1)) %
                  static_cast<int>(kColors.size());
        }
        round.question = {"is", "the", kEntities[ents[reg]], kColors[asked], "?"};
        parse = {{3, 2, 3, -1, 3}, {"cop", "det", "nsubj", "root", "punct"}};
        mentions[reg].push_back({turn, 2, 3});
        gt = {asked == colors[reg] ? "yes" : "no"};
        topic = reg;
      } else if (kind == 2) {  // "what is the <color> object ?"
        const int reg = rng.uniform_int(cfg.n_regions);
        round.question = {"what", "is", "the", kColors[colors[reg]], "object", "?"};
        parse = {{-1, 0, 4, 4, 0, 0}, {"root", "cop", "det", "amod", "nsubj", "punct"}};
        gt = {"a", kColors[colors[reg]], kEntities[ents[reg]]};
        topic = reg;
      } else if (kind == 3) {  // "what color is it ?" -- "it" corefs to the topic
        round.question = {"what", "color", "is", "it", "?"};
        parse = {{1, -1, 1, 1, 1}, {"det", "root", "cop", "nsubj", "punct"}};
        mentions[topic].push_back({turn, 3, 4});
        gt = {kColors[colors[topic]]};
      } else {  // "is it <color> ?"
        int asked = colors[topic];
        const bool truthful = rng.uniform() < 0.5;
        if (!truthful) {
          asked = (asked + 1 + rng.uniform_int(static_cast<int>(kColors.size()) - 1)) %
                  static_cast<int>(kColors.size());
        }
        round.question = {"is", "it", kColors[asked], "?"};
        parse = {{2, 2, -1, 2}, {"cop", "nsubj", "root", "punct"}};
        mentions[topic].push_back({turn, 1, 2});
        gt = {asked == colors[topic] ? "yes" : "no"};
      }

      round.answer = gt;
      const int gt_pool = pool_index.at(gt);

      // 99 distinct distractors from the pool, ground truth at a random slot
      std::vector<int> others;
      others.reserve(pool.size() - 1);
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (static_cast<int>(i) != gt_pool) others.push_back(static_cast<int>(i));
      }
      for (int i = static_cast<int>(others.size()) - 1; i > 0; --i) {
        std::swap(others[i], others[rng.uniform_int(i + 1)]);
      }
      others.resize(kCandidates - 1);
      round.gt_index = rng.uniform_int(kCandidates);
      others.insert(others.begin() + round.gt_index, gt_pool);
      for (int idx : others) round.candidates.push_back(pool[idx]);

      std::vector<double> relevance(kCandidates, 0.0);
      relevance[round.gt_index] = 1.0;
      for (const auto& p : paraphrases(gt)) {
        for (int i = 0; i < kCandidates; ++i) {
          if (round.candidates[i] == p) relevance[i] = 0.5;
        }
      }
      round.relevance = std::move(relevance);

      ad.deps.push_back(to_annotation(parse));
      ad.dialog.rounds.push_back(std::move(round));
    }

    std::vector<int> chain_ents;
    for (const auto& [reg, chain] : mentions) {
      if (chain.size() < 2) continue;
      ad.coref.chains.push_back(chain);
      chain_ents.push_back(ents[reg]);
    }
    out.chain_entities.push_back(std::move(chain_ents));
    out.corpus.dialogs.push_back(std::move(ad));
  }
  return out;
}

}  // namespace gog
