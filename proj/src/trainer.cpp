#include "gog/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gog/error.hpp"
#include "gog/ops.hpp"
#include "gog/pipeline.hpp"

namespace gog {

using nlohmann::json;

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 1 || epoch > cfg.max_epochs) {
    throw ConfigError("lr_at: epoch " + std::to_string(epoch) + " outside [1, " +
                      std::to_string(cfg.max_epochs) + "]");
  }
  if (epoch <= cfg.warmup_end_epoch) {
    if (cfg.warmup_end_epoch == 1) return cfg.peak_lr;
    return cfg.base_lr +
           (cfg.peak_lr - cfg.base_lr) * (epoch - 1) / static_cast<double>(cfg.warmup_end_epoch - 1);
  }
  if (epoch <= cfg.decay_start_epoch) return cfg.peak_lr;
  const int periods = (epoch - cfg.decay_start_epoch) / cfg.decay_every;
  return cfg.peak_lr * std::pow(cfg.decay_factor, periods);
}

void Adam::step(ParamStore& store, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : store.names()) {
    if (!store.trainable(name)) continue;
    Tensor& p = store.get(name);
    auto& [m, v] = m_[name];
    if (m.empty()) {
      m.assign(p.numel(), 0.0);
      v.assign(p.numel(), 0.0);
    }
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double g = (*p.grad)[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      (*p.data)[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
    }
  }
}

std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> Adam::moments() const {
  return m_;
}

void Adam::restore(std::uint64_t t,
                   const std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& m) {
  t_ = t;
  m_ = m;
}

namespace {

struct Sample {
  int dialog = 0;
  int round = 0;
};

int corpus_dv(const Corpus& corpus) {
  for (const auto& ad : corpus.dialogs) {
    if (!ad.dialog.regions.empty()) return static_cast<int>(ad.dialog.regions[0].feature.size());
  }
  throw ValidationError("corpus has no regions");
}

json metrics_to_json(const MetricsReport& m) {
  json j;
  j["mrr"] = m.mrr;
  j["r_at_1"] = m.r_at_1;
  j["r_at_5"] = m.r_at_5;
  j["r_at_10"] = m.r_at_10;
  j["mean_rank"] = m.mean_rank;
  if (m.ndcg) j["ndcg"] = *m.ndcg;
  return j;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

}  // namespace

EvalResult evaluate_store(ParamStore& store, const Vocabulary& vocab, const Corpus& corpus,
                          DecoderMode mode, const TrainConfig& cfg, const std::string& dump_path) {
  NoGradGuard no_grad;
  std::vector<RoundResult> disc_rounds, gen_rounds;
  std::vector<json> dumps;
  AnswerEncoderCache cache;  // parameters are fixed for the whole pass
  EvalResult result;

  const bool want_disc = mode == DecoderMode::Disc || mode == DecoderMode::Multi;
  const bool want_gen = mode == DecoderMode::Gen || mode == DecoderMode::Multi;

  for (const AnnotatedDialog& ad : corpus.dialogs) {
    for (int r = 0; r < static_cast<int>(ad.dialog.rounds.size()); ++r) {
      if (ad.dialog.rounds[r].candidates.empty()) continue;
      RoundContext ctx = prepare_round(ad, r, vocab, cfg);
      result.truncated_candidates += ctx.truncated_candidates;
      ForwardOutput fwd = forward_round(ctx, vocab, store, cfg);

      json dump;
      dump["image_id"] = ad.dialog.image_id;
      dump["round"] = r;
      if (want_disc) {
        CandidateScores s = discriminative_score(fwd.fusion.joint, ctx.candidate_ids, store, &cache);
        RoundResult rr{s.ranking, ctx.gt_index, ad.dialog.rounds[r].relevance};
        disc_rounds.push_back(rr);
        dump["disc_scores"] = s.scores;
        dump["disc_ranking"] = s.ranking;
        dump["disc_gt_rank"] =
            static_cast<int>(std::find(s.ranking.begin(), s.ranking.end(), ctx.gt_index) -
                             s.ranking.begin()) + 1;
      }
      if (want_gen) {
        CandidateScores s = generative_score(fwd.fusion.joint, ctx.candidate_ids, store);
        RoundResult rr{s.ranking, ctx.gt_index, ad.dialog.rounds[r].relevance};
        gen_rounds.push_back(rr);
        dump["gen_scores"] = s.scores;
        dump["gen_ranking"] = s.ranking;
        dump["gen_gt_rank"] =
            static_cast<int>(std::find(s.ranking.begin(), s.ranking.end(), ctx.gt_index) -
                             s.ranking.begin()) + 1;
      }
      dump["gt_index"] = ctx.gt_index;
      dumps.push_back(std::move(dump));
    }
  }
  if (want_disc && !disc_rounds.empty()) result.disc = compute_metrics(disc_rounds);
  if (want_gen && !gen_rounds.empty()) result.gen = compute_metrics(gen_rounds);

  if (!dump_path.empty()) {
    std::ofstream os(dump_path);
    if (!os) throw LoadError("cannot open score dump " + dump_path);
    for (const auto& d : dumps) os << d.dump() << "\n";
  }
  return result;
}

TrainConfig checkpoint_config(const CheckpointMeta& meta) {
  TrainConfig cfg;
  std::istringstream is(meta.config_text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty()) apply_override(cfg, line);
  }
  return cfg;
}

EvalResult evaluate(const std::string& checkpoint_path, const Corpus& corpus, DecoderMode mode,
                    const std::string& dump_path, const TrainConfig* expected) {
  CheckpointMeta meta;
  ParamStore store = load_checkpoint(checkpoint_path, meta);
  TrainConfig cfg = checkpoint_config(meta);
  if (expected) cfg = *expected;

  Vocabulary vocab;
  vocab.id_to_token = meta.vocab_tokens;
  for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[i]] = i;

  const std::uint64_t digest = config_digest(cfg, vocab.size(), corpus_dv(corpus));
  if (digest != meta.config_digest) {
    throw ConfigError("config digest mismatch: checkpoint " + hex64(meta.config_digest) +
                      ", requested " + hex64(digest));
  }
  return evaluate_store(store, vocab, corpus, mode, cfg, dump_path);
}

TrainResult train(const TrainConfig& cfg_in, const Corpus& train_corpus, const Corpus* val_corpus,
                  const std::string& run_dir, const std::string& resume_path) {
  TrainConfig cfg = cfg_in;
  cfg.validate();
  if (train_corpus.dialogs.empty()) throw ValidationError("train: empty corpus");
  std::filesystem::create_directories(run_dir);

  const int d_v = corpus_dv(train_corpus);
  Vocabulary vocab;
  ParamStore store(cfg.seed);
  Adam adam;
  int start_epoch = 0;

  if (!resume_path.empty()) {
    CheckpointMeta meta;
    store = load_checkpoint(resume_path, meta);
    vocab.id_to_token = meta.vocab_tokens;
    for (int i = 0; i < vocab.size(); ++i) vocab.token_to_id[vocab.id_to_token[i]] = i;
    const std::uint64_t digest = config_digest(cfg, vocab.size(), d_v);
    if (digest != meta.config_digest) {
      throw ConfigError("config digest mismatch on resume: checkpoint " + hex64(meta.config_digest) +
                        ", requested " + hex64(digest));
    }
    if (meta.has_optimizer) adam.restore(meta.adam_step, meta.adam_moments);
    start_epoch = static_cast<int>(meta.epoch);
  } else {
    vocab = build_vocabulary(train_corpus, cfg.vocab_min_freq);
    register_model_params(store, {cfg.hidden, cfg.embed(), cfg.heads, vocab.size(), d_v});
  }

  // parameter-free per-round contexts, reused across epochs
  std::vector<RoundContext> contexts;
  std::vector<Sample> samples;
  for (std::size_t d = 0; d < train_corpus.dialogs.size(); ++d) {
    const AnnotatedDialog& ad = train_corpus.dialogs[d];
    for (int r = 0; r < static_cast<int>(ad.dialog.rounds.size()); ++r) {
      if (ad.dialog.rounds[r].candidates.empty()) continue;
      samples.push_back({static_cast<int>(d), r});
      contexts.push_back(prepare_round(ad, r, vocab, cfg));
    }
  }
  if (samples.empty()) throw ValidationError("train: no rounds with candidate lists");

  std::ofstream log_stream((std::filesystem::path(run_dir) / "log.jsonl").string(), std::ios::app);
  {
    std::ofstream cfg_out((std::filesystem::path(run_dir) / "config.txt").string());
    cfg_out << config_to_text(cfg);
  }

  TrainResult result;
  result.checkpoint_path = (std::filesystem::path(run_dir) / "checkpoint_last.bin").string();
  const std::uint64_t digest = config_digest(cfg, vocab.size(), d_v);

  auto save_epoch = [&](int epoch) {
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.config_digest = digest;
    meta.epoch = static_cast<std::uint64_t>(epoch);
    meta.config_text = config_to_text(cfg);
    meta.vocab_tokens = vocab.id_to_token;
    meta.has_optimizer = true;
    meta.adam_step = adam.steps();
    meta.adam_moments = adam.moments();
    save_checkpoint(result.checkpoint_path, store, meta);
  };

  save_epoch(start_epoch);  // a run dir always holds a loadable checkpoint

  for (int epoch = start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    std::vector<int> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(cfg.seed * 1000003ull + static_cast<std::uint64_t>(epoch));
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
    }

    EpochLog elog;
    elog.epoch = epoch;
    elog.lr = lr;
    double epoch_loss = 0.0, epoch_d = 0.0, epoch_g = 0.0;

    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        store.zero_grads();
        AnswerEncoderCache cache;
        Tensor batch_total;
        double batch_d = 0.0, batch_g = 0.0;
        for (std::size_t i = start; i < end; ++i) {
          RoundLosses losses = round_loss(contexts[order[i]], vocab, store, cfg, &cache);
          batch_total = batch_total.defined() ? add(batch_total, losses.total) : losses.total;
          batch_d += losses.part_d;
          batch_g += losses.part_g;
        }
        const double inv = 1.0 / static_cast<double>(end - start);
        Tensor batch_loss = scale(batch_total, inv);
        if (!std::isfinite(batch_loss.scalar())) throw NumericalError("train: non-finite batch loss");
        backward(batch_loss);
        const double norm = store.grad_norm();
        if (!std::isfinite(norm)) throw NumericalError("train: non-finite gradient norm");
        if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) store.scale_grads(cfg.clip_norm / norm);
        adam.step(store, lr);
        epoch_loss += batch_loss.scalar() * static_cast<double>(end - start);
        epoch_d += batch_d;
        epoch_g += batch_g;
      }
    } catch (const NumericalError& e) {
      // keep the checkpoint of the last completed epoch
      result.diverged = true;
      json j;
      j["epoch"] = epoch;
      j["diverged"] = true;
      j["error"] = e.what();
      log_stream << j.dump() << "\n";
      break;
    }

    elog.loss = epoch_loss / static_cast<double>(samples.size());
    elog.loss_d = epoch_d / static_cast<double>(samples.size());
    elog.loss_g = epoch_g / static_cast<double>(samples.size());

    if (val_corpus && cfg.eval_every > 0 && epoch % cfg.eval_every == 0) {
      EvalResult ev = evaluate_store(store, vocab, *val_corpus, cfg.decoder_mode, cfg);
      elog.val_disc = ev.disc;
      elog.val_gen = ev.gen;
    }

    save_epoch(epoch);

    json j;
    j["epoch"] = elog.epoch;
    j["lr"] = elog.lr;
    j["loss"] = elog.loss;
    j["loss_d"] = elog.loss_d;
    j["loss_g"] = elog.loss_g;
    if (elog.val_disc) j["val_disc"] = metrics_to_json(*elog.val_disc);
    if (elog.val_gen) j["val_gen"] = metrics_to_json(*elog.val_gen);
    log_stream << j.dump() << "\n";
    result.log.push_back(std::move(elog));
  }
  return result;
}

}  // namespace gog
