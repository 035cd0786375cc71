#include "gog/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>

#include <json.hpp>

#include "gog/error.hpp"

namespace gog {

using nlohmann::json;

namespace {

const std::array<std::string, kNumDepLabels> kDepLabels = {
    "nsubj", "root", "dep", "punct", "det", "cop", "prep",
    "aux",   "pobj", "amod", "advmod", "dobj", "other"};

std::vector<std::string> tokens_from_json(const json& j, const std::string& where) {
  if (!j.is_array()) throw LoadError(where + ": expected a token array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const auto& t : j) {
    if (!t.is_string()) throw LoadError(where + ": non-string token");
    out.push_back(t.get<std::string>());
  }
  return out;
}

json tokens_to_json(const std::vector<std::string>& tokens) {
  json j = json::array();
  for (const auto& t : tokens) j.push_back(t);
  return j;
}

std::string split_file(const std::string& dir, const std::string& kind, const std::string& split) {
  return (std::filesystem::path(dir) / (kind + "_" + split + ".jsonl")).string();
}

std::vector<json> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw LoadError("cannot open " + path);
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw LoadError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::string& path, const std::vector<json>& records) {
  std::ofstream os(path);
  if (!os) throw LoadError("cannot open " + path + " for writing");
  for (const auto& r : records) os << r.dump() << "\n";
}

void validate_dialog(const AnnotatedDialog& ad, const std::string& where) {
  const DialogInstance& d = ad.dialog;
  for (std::size_t i = 0; i < d.regions.size(); ++i) {
    const auto& b = d.regions[i].bbox;
    if (!(b[0] < b[2]) || !(b[1] < b[3])) {
      throw ValidationError(where + ": region " + std::to_string(i) + " has an inverted bbox");
    }
    if (d.regions[i].feature.size() != d.regions[0].feature.size()) {
      throw ValidationError(where + ": region " + std::to_string(i) + " feature width differs");
    }
  }
  for (std::size_t r = 0; r < d.rounds.size(); ++r) {
    const DialogRound& round = d.rounds[r];
    const std::string rw = where + " round " + std::to_string(r);
    if (round.question.empty()) throw ValidationError(rw + ": empty question");
    if (!round.candidates.empty()) {
      if (round.candidates.size() != 100) {
        throw ValidationError(rw + ": candidates length " + std::to_string(round.candidates.size()) +
                              ", expected exactly 100");
      }
      if (round.gt_index < 0 || round.gt_index >= 100) {
        throw ValidationError(rw + ": gt_index " + std::to_string(round.gt_index) + " out of range");
      }
    }
    if (round.relevance) {
      if (round.relevance->size() != round.candidates.size()) {
        throw ValidationError(rw + ": relevance length mismatch");
      }
      for (double v : *round.relevance) {
        if (v < 0.0 || v > 1.0) throw ValidationError(rw + ": relevance outside [0,1]");
      }
      if ((*round.relevance)[round.gt_index] != 1.0) {
        throw ValidationError(rw + ": ground-truth relevance must be 1");
      }
    }
  }
  // coref chains: turn 0 is the caption, turn i >= 1 the question of round i-1
  for (std::size_t c = 0; c < ad.coref.chains.size(); ++c) {
    for (const CorefMention& m : ad.coref.chains[c]) {
      const std::string cw = where + " chain " + std::to_string(c);
      if (m.turn < 0 || m.turn > static_cast<int>(d.rounds.size())) {
        throw AnnotationError(cw + ": mention turn " + std::to_string(m.turn) + " out of range");
      }
      const std::size_t turn_len =
          m.turn == 0 ? d.caption.size() : d.rounds[m.turn - 1].question.size();
      if (m.start < 0 || m.end > static_cast<int>(turn_len) || m.start >= m.end) {
        throw AnnotationError(cw + ": span [" + std::to_string(m.start) + "," + std::to_string(m.end) +
                              ") outside turn of " + std::to_string(turn_len) + " tokens");
      }
    }
  }
  if (ad.deps.size() != d.rounds.size()) {
    throw AnnotationError(where + ": " + std::to_string(ad.deps.size()) + " dependency records for " +
                          std::to_string(d.rounds.size()) + " rounds");
  }
  for (std::size_t r = 0; r < ad.deps.size(); ++r) {
    const DependencyAnnotation& dep = ad.deps[r];
    const std::string rw = where + " round " + std::to_string(r) + " deps";
    const std::size_t n = d.rounds[r].question.size();
    if (dep.heads.size() != n || dep.labels.size() != n) {
      throw AnnotationError(rw + ": covers " + std::to_string(dep.heads.size()) + " tokens, question has " +
                            std::to_string(n));
    }
    int roots = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (dep.heads[i] == -1) {
        ++roots;
      } else if (dep.heads[i] < 0 || dep.heads[i] >= static_cast<int>(n)) {
        throw AnnotationError(rw + ": head of token " + std::to_string(i) + " out of range");
      }
      if (dep.labels[i] < 0 || dep.labels[i] >= kNumDepLabels) {
        throw AnnotationError(rw + ": label id of token " + std::to_string(i) + " outside the closed set");
      }
    }
    if (roots != 1) throw AnnotationError(rw + ": " + std::to_string(roots) + " roots, expected exactly 1");
    // tree check: every token must reach the root without revisiting
    for (std::size_t i = 0; i < n; ++i) {
      int cur = static_cast<int>(i);
      std::size_t hops = 0;
      while (dep.heads[cur] != -1) {
        cur = dep.heads[cur];
        if (++hops > n) throw AnnotationError(rw + ": cycle in heads at token " + std::to_string(i));
      }
    }
  }
}

}  // namespace

int dep_label_id(const std::string& name) {
  for (int i = 0; i < kNumDepLabels; ++i) {
    if (kDepLabels[i] == name) return i;
  }
  throw AnnotationError("unknown dependency label '" + name + "'");
}

const std::string& dep_label_name(int id) {
  if (id < 0 || id >= kNumDepLabels) throw AnnotationError("dependency label id out of range");
  return kDepLabels[id];
}

int Vocabulary::id(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

Corpus load_corpus(const std::string& dir, const std::string& split, const CorpusLimits& limits) {
  const auto dialog_records = read_jsonl(split_file(dir, "corpus", split));
  const auto region_records = read_jsonl(split_file(dir, "regions", split));
  const auto coref_records = read_jsonl(split_file(dir, "coref", split));
  const auto deps_records = read_jsonl(split_file(dir, "deps", split));

  std::map<std::string, const json*> regions_by_id, coref_by_id, deps_by_id;
  for (const auto& r : region_records) regions_by_id[r.at("image_id").get<std::string>()] = &r;
  for (const auto& r : coref_records) coref_by_id[r.at("image_id").get<std::string>()] = &r;
  for (const auto& r : deps_records) deps_by_id[r.at("image_id").get<std::string>()] = &r;

  Corpus corpus;
  for (std::size_t idx = 0; idx < dialog_records.size(); ++idx) {
    const json& jd = dialog_records[idx];
    AnnotatedDialog ad;
    std::string where = "dialog " + std::to_string(idx);
    try {
      ad.dialog.image_id = jd.at("image_id").get<std::string>();
      where += " (" + ad.dialog.image_id + ")";
      ad.dialog.caption = tokens_from_json(jd.at("caption"), where + " caption");
      for (const auto& jr : jd.at("rounds")) {
        DialogRound round;
        round.question = tokens_from_json(jr.at("question"), where + " question");
        round.answer = tokens_from_json(jr.at("answer"), where + " answer");
        if (jr.contains("candidates")) {
          for (const auto& jc : jr.at("candidates")) {
            round.candidates.push_back(tokens_from_json(jc, where + " candidate"));
          }
          round.gt_index = jr.at("gt_index").get<int>();
        }
        if (jr.contains("relevance")) {
          round.relevance = jr.at("relevance").get<std::vector<double>>();
        }
        ad.dialog.rounds.push_back(std::move(round));
      }

      auto rit = regions_by_id.find(ad.dialog.image_id);
      if (rit == regions_by_id.end()) throw LoadError(where + ": no regions record");
      const json& jreg = *rit->second;
      ad.dialog.image_w = jreg.at("image_w").get<double>();
      ad.dialog.image_h = jreg.at("image_h").get<double>();
      for (const auto& jr : jreg.at("regions")) {
        Region region;
        const auto bbox = jr.at("bbox").get<std::vector<double>>();
        if (bbox.size() != 4) throw LoadError(where + ": bbox must have 4 coordinates");
        std::copy(bbox.begin(), bbox.end(), region.bbox.begin());
        region.feature = jr.at("feature").get<std::vector<double>>();
        ad.dialog.regions.push_back(std::move(region));
      }

      auto cit = coref_by_id.find(ad.dialog.image_id);
      if (cit != coref_by_id.end()) {
        for (const auto& jchain : cit->second->at("chains")) {
          std::vector<CorefMention> chain;
          for (const auto& jm : jchain) {
            chain.push_back({jm.at("turn").get<int>(), jm.at("start").get<int>(), jm.at("end").get<int>()});
          }
          ad.coref.chains.push_back(std::move(chain));
        }
      }

      auto dit = deps_by_id.find(ad.dialog.image_id);
      if (dit == deps_by_id.end()) throw LoadError(where + ": no dependency record");
      for (const auto& jr : dit->second->at("rounds")) {
        DependencyAnnotation dep;
        dep.heads = jr.at("heads").get<std::vector<int>>();
        for (const auto& jl : jr.at("labels")) dep.labels.push_back(dep_label_id(jl.get<std::string>()));
        ad.deps.push_back(std::move(dep));
      }
    } catch (const json::exception& e) {
      throw LoadError(where + ": " + e.what());
    }

    // caption truncation: drop coref mentions whose span crosses the cut
    if (static_cast<int>(ad.dialog.caption.size()) > limits.max_caption_len) {
      ad.dialog.caption.resize(limits.max_caption_len);
      for (auto& chain : ad.coref.chains) {
        auto kept = chain;
        kept.erase(std::remove_if(kept.begin(), kept.end(),
                                  [&](const CorefMention& m) {
                                    return m.turn == 0 && m.end > limits.max_caption_len;
                                  }),
                   kept.end());
        corpus.dropped_mentions += static_cast<int>(chain.size() - kept.size());
        chain = std::move(kept);
      }
      ad.coref.chains.erase(
          std::remove_if(ad.coref.chains.begin(), ad.coref.chains.end(),
                         [](const auto& chain) { return chain.empty(); }),
          ad.coref.chains.end());
    }

    validate_dialog(ad, where);
    corpus.dialogs.push_back(std::move(ad));
  }
  return corpus;
}

void save_corpus(const std::string& dir, const std::string& split, const Corpus& corpus) {
  std::filesystem::create_directories(dir);
  std::vector<json> dialogs, regions, corefs, deps;
  for (const AnnotatedDialog& ad : corpus.dialogs) {
    const DialogInstance& d = ad.dialog;
    json jd;
    jd["image_id"] = d.image_id;
    jd["caption"] = tokens_to_json(d.caption);
    jd["rounds"] = json::array();
    for (const DialogRound& round : d.rounds) {
      json jr;
      jr["question"] = tokens_to_json(round.question);
      jr["answer"] = tokens_to_json(round.answer);
      if (!round.candidates.empty()) {
        json jc = json::array();
        for (const auto& c : round.candidates) jc.push_back(tokens_to_json(c));
        jr["candidates"] = std::move(jc);
        jr["gt_index"] = round.gt_index;
      }
      if (round.relevance) jr["relevance"] = *round.relevance;
      jd["rounds"].push_back(std::move(jr));
    }
    dialogs.push_back(std::move(jd));

    json jreg;
    jreg["image_id"] = d.image_id;
    jreg["image_w"] = d.image_w;
    jreg["image_h"] = d.image_h;
    jreg["regions"] = json::array();
    for (const Region& region : d.regions) {
      json jr;
      jr["bbox"] = std::vector<double>(region.bbox.begin(), region.bbox.end());
      jr["feature"] = region.feature;
      jreg["regions"].push_back(std::move(jr));
    }
    regions.push_back(std::move(jreg));

    json jco;
    jco["image_id"] = d.image_id;
    jco["chains"] = json::array();
    for (const auto& chain : ad.coref.chains) {
      json jchain = json::array();
      for (const CorefMention& m : chain) {
        jchain.push_back({{"turn", m.turn}, {"start", m.start}, {"end", m.end}});
      }
      jco["chains"].push_back(std::move(jchain));
    }
    corefs.push_back(std::move(jco));

    json jdep;
    jdep["image_id"] = d.image_id;
    jdep["rounds"] = json::array();
    for (const DependencyAnnotation& dep : ad.deps) {
      json jr;
      jr["heads"] = dep.heads;
      json jl = json::array();
      for (int l : dep.labels) jl.push_back(dep_label_name(l));
      jr["labels"] = std::move(jl);
      jdep["rounds"].push_back(std::move(jr));
    }
    deps.push_back(std::move(jdep));
  }
  write_jsonl(split_file(dir, "corpus", split), dialogs);
  write_jsonl(split_file(dir, "regions", split), regions);
  write_jsonl(split_file(dir, "coref", split), corefs);
  write_jsonl(split_file(dir, "deps", split), deps);
}

Vocabulary build_vocabulary(const Corpus& corpus, int min_freq) {
  std::map<std::string, std::size_t> counts;
  auto count_all = [&counts](const std::vector<std::string>& tokens) {
    for (const auto& t : tokens) ++counts[t];
  };
  for (const AnnotatedDialog& ad : corpus.dialogs) {
    count_all(ad.dialog.caption);
    for (const DialogRound& round : ad.dialog.rounds) {
      count_all(round.question);
      count_all(round.answer);
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [token, n] : counts) {
    if (n >= static_cast<std::size_t>(min_freq)) kept.emplace_back(token, n);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.min_freq = min_freq;
  vocab.id_to_token = {"<pad>", "<unk>", "<sos>", "<eos>"};
  for (const auto& [token, n] : kept) vocab.id_to_token.push_back(token);
  for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[i]] = i;
  return vocab;
}

std::pair<std::vector<int>, int> pad_or_truncate(const std::vector<int>& ids, int max_len) {
  if (max_len < 1) throw ValidationError("pad_or_truncate: max_len must be >= 1");
  std::vector<int> out(static_cast<std::size_t>(max_len), Vocabulary::kPad);
  const int valid = std::min<int>(static_cast<int>(ids.size()), max_len);
  std::copy(ids.begin(), ids.begin() + valid, out.begin());
  return {std::move(out), valid};
}

std::size_t corpus_rounds(const Corpus& corpus) {
  std::size_t n = 0;
  for (const auto& ad : corpus.dialogs) n += ad.dialog.rounds.size();
  return n;
}

}  // namespace gog
