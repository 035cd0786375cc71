#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gog/checkpoint.hpp"
#include "gog/config.hpp"
#include "gog/corpus.hpp"
#include "gog/metrics.hpp"
#include "gog/param_store.hpp"

namespace gog {

/// Warm-up to the peak over the first epochs, hold, then decay by a constant
/// factor every few epochs. Epochs are 1-based.
double lr_at(int epoch, const TrainConfig& cfg);

class Adam {
 public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ParamStore& store, double lr);

  std::uint64_t steps() const { return t_; }
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> moments() const;
  void restore(std::uint64_t t,
               const std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>& m);

 private:
  double beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> m_;
};

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double loss_d = 0.0;
  double loss_g = 0.0;
  std::optional<MetricsReport> val_disc;
  std::optional<MetricsReport> val_gen;
};

struct TrainResult {
  std::string checkpoint_path;
  std::vector<EpochLog> log;
  bool diverged = false;
};

/// Seeded, resumable training with per-epoch logging under run_dir. The
/// checkpoint written after each epoch survives a later divergence.
TrainResult train(const TrainConfig& cfg, const Corpus& train_corpus, const Corpus* val_corpus,
                  const std::string& run_dir, const std::string& resume_path = "");

struct EvalResult {
  std::optional<MetricsReport> disc;
  std::optional<MetricsReport> gen;
  int truncated_candidates = 0;
};

/// Evaluation against a loaded store (no checkpoint round trip).
EvalResult evaluate_store(ParamStore& store, const Vocabulary& vocab, const Corpus& corpus,
                          DecoderMode mode, const TrainConfig& cfg, const std::string& dump_path = "");

/// Loads the checkpoint, refuses on config-digest mismatch (printing both
/// digests), and evaluates the requested decoder(s).
EvalResult evaluate(const std::string& checkpoint_path, const Corpus& corpus, DecoderMode mode,
                    const std::string& dump_path = "", const TrainConfig* expected = nullptr);

/// The config and vocabulary a checkpoint was trained with.
TrainConfig checkpoint_config(const CheckpointMeta& meta);

}  // namespace gog
