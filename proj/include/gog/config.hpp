#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gog {

/// One switch per ablation row: drop a graph-attention step, drop an
/// aware-injection, or swap a pruned labeled graph for a fully-connected
/// unlabeled one.
struct AblationSet {
  bool h_graph = false;
  bool q_graph = false;
  bool i_graph = false;
  bool h_aware = false;
  bool q_aware = false;
  bool coreference_relation = false;
  bool dependency_relation = false;
  bool spatial_relation = false;

  bool any() const;
  std::string to_string() const;  // canonical comma list
};

/// Flag names accepted by --ablate, one per ablation row.
extern const std::vector<std::string> kAblationNames;

AblationSet parse_ablations(const std::string& comma_list);

enum class DecoderMode { Gen, Disc, Multi };

DecoderMode parse_decoder_mode(const std::string& s);
std::string decoder_mode_name(DecoderMode m);

struct TrainConfig {
  int batch_size = 32;
  double base_lr = 1e-4;
  double peak_lr = 2e-4;
  int warmup_end_epoch = 4;
  int decay_start_epoch = 15;
  int decay_every = 2;
  double decay_factor = 0.25;
  int max_epochs = 20;
  int heads = 4;
  int hidden = 64;      // 512 at full scale
  int embed_dim = 0;    // 0 means: equal to hidden
  std::uint64_t seed = 0;
  DecoderMode decoder_mode = DecoderMode::Disc;
  AblationSet ablations;

  double clip_norm = 5.0;
  int vocab_min_freq = 5;
  int eval_every = 0;  // 0 disables per-epoch validation metrics

  int max_caption_len = 40;
  int max_question_len = 20;
  int max_answer_len = 20;

  double iou_threshold = 0.3;
  double distance_threshold = 0.5;

  int embed() const { return embed_dim > 0 ? embed_dim : hidden; }
  void validate() const;
};

/// Flat key=value config file; '#' starts a comment. Unknown keys error.
TrainConfig load_config_file(const std::string& path, TrainConfig base = TrainConfig{});
void apply_override(TrainConfig& cfg, const std::string& key_equals_value);
std::string config_to_text(const TrainConfig& cfg);  // canonical, sorted keys

/// Digest over everything that determines parameter shapes and semantics:
/// model widths, heads, ablations, label-set sizes, vocab size and d_v.
std::uint64_t config_digest(const TrainConfig& cfg, int vocab_size, int d_v);

}  // namespace gog
