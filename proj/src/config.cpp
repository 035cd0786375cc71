#include "gog/config.hpp"

#include <fstream>
#include <sstream>

#include "gog/error.hpp"
#include "gog/graph.hpp"
#include "gog/param_store.hpp"

namespace gog {

const std::vector<std::string> kAblationNames = {
    "h-graph", "q-graph", "i-graph", "h-aware", "q-aware",
    "coreference-relation", "dependency-relation", "spatial-relation"};

bool AblationSet::any() const {
  return h_graph || q_graph || i_graph || h_aware || q_aware || coreference_relation ||
         dependency_relation || spatial_relation;
}

namespace {

bool* ablation_slot(AblationSet& a, const std::string& name) {
  if (name == "h-graph") return &a.h_graph;
  if (name == "q-graph") return &a.q_graph;
  if (name == "i-graph") return &a.i_graph;
  if (name == "h-aware") return &a.h_aware;
  if (name == "q-aware") return &a.q_aware;
  if (name == "coreference-relation") return &a.coreference_relation;
  if (name == "dependency-relation") return &a.dependency_relation;
  if (name == "spatial-relation") return &a.spatial_relation;
  return nullptr;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

std::string AblationSet::to_string() const {
  std::string out;
  AblationSet self = *this;
  for (const auto& name : kAblationNames) {
    if (*ablation_slot(self, name)) {
      if (!out.empty()) out += ",";
      out += name;
    }
  }
  return out;
}

AblationSet parse_ablations(const std::string& comma_list) {
  AblationSet a;
  for (const auto& name : split(comma_list, ',')) {
    bool* slot = ablation_slot(a, name);
    if (!slot) {
      throw ConfigError("unknown ablation '" + name + "'; known: h-graph, q-graph, i-graph, "
                        "h-aware, q-aware, coreference-relation, dependency-relation, spatial-relation");
    }
    *slot = true;
  }
  return a;
}

DecoderMode parse_decoder_mode(const std::string& s) {
  if (s == "gen") return DecoderMode::Gen;
  if (s == "disc") return DecoderMode::Disc;
  if (s == "multi") return DecoderMode::Multi;
  throw ConfigError("decoder_mode must be gen, disc or multi; got '" + s + "'");
}

std::string decoder_mode_name(DecoderMode m) {
  switch (m) {
    case DecoderMode::Gen: return "gen";
    case DecoderMode::Disc: return "disc";
    case DecoderMode::Multi: return "multi";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (!(base_lr > 0.0) || base_lr > peak_lr) {
    throw ConfigError("require 0 < base_lr <= peak_lr");
  }
  if (batch_size < 1 || max_epochs < 1 || heads < 1 || hidden < 1) {
    throw ConfigError("counts must be positive");
  }
  if (warmup_end_epoch < 1 || decay_start_epoch < warmup_end_epoch || decay_every < 1) {
    throw ConfigError("schedule breakpoints out of order");
  }
  if (decay_factor <= 0.0 || decay_factor > 1.0) throw ConfigError("decay_factor must be in (0, 1]");
  if (hidden % heads != 0) {
    throw ConfigError("hidden " + std::to_string(hidden) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (max_caption_len < 1 || max_question_len < 1 || max_answer_len < 1) {
    throw ConfigError("max lengths must be >= 1");
  }
}

void apply_override(TrainConfig& cfg, const std::string& kv) {
  const auto pos = kv.find('=');
  if (pos == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'");
  const std::string key = kv.substr(0, pos);
  const std::string value = kv.substr(pos + 1);
  auto as_int = [&] { return std::stoi(value); };
  auto as_double = [&] { return std::stod(value); };
  if (key == "batch_size") cfg.batch_size = as_int();
  else if (key == "base_lr") cfg.base_lr = as_double();
  else if (key == "peak_lr") cfg.peak_lr = as_double();
  else if (key == "warmup_end_epoch") cfg.warmup_end_epoch = as_int();
  else if (key == "decay_start_epoch") cfg.decay_start_epoch = as_int();
  else if (key == "decay_every") cfg.decay_every = as_int();
  else if (key == "decay_factor") cfg.decay_factor = as_double();
  else if (key == "max_epochs") cfg.max_epochs = as_int();
  else if (key == "heads") cfg.heads = as_int();
  else if (key == "hidden") cfg.hidden = as_int();
  else if (key == "embed_dim") cfg.embed_dim = as_int();
  else if (key == "seed") cfg.seed = std::stoull(value);
  else if (key == "decoder_mode") cfg.decoder_mode = parse_decoder_mode(value);
  else if (key == "ablations") cfg.ablations = parse_ablations(value);
  else if (key == "clip_norm") cfg.clip_norm = as_double();
  else if (key == "vocab_min_freq") cfg.vocab_min_freq = as_int();
  else if (key == "eval_every") cfg.eval_every = as_int();
  else if (key == "max_caption_len") cfg.max_caption_len = as_int();
  else if (key == "max_question_len") cfg.max_question_len = as_int();
  else if (key == "max_answer_len") cfg.max_answer_len = as_int();
  else if (key == "iou_threshold") cfg.iou_threshold = as_double();
  else if (key == "distance_threshold") cfg.distance_threshold = as_double();
  else throw ConfigError("unknown config key '" + key + "'");
}

TrainConfig load_config_file(const std::string& path, TrainConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) {
      line.pop_back();
    }
    std::size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    try {
      apply_override(base, line.substr(start));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

std::string config_to_text(const TrainConfig& cfg) {
  std::ostringstream os;
  os << "ablations=" << cfg.ablations.to_string() << "\n";
  os << "base_lr=" << cfg.base_lr << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "clip_norm=" << cfg.clip_norm << "\n";
  os << "decay_every=" << cfg.decay_every << "\n";
  os << "decay_factor=" << cfg.decay_factor << "\n";
  os << "decay_start_epoch=" << cfg.decay_start_epoch << "\n";
  os << "decoder_mode=" << decoder_mode_name(cfg.decoder_mode) << "\n";
  os << "distance_threshold=" << cfg.distance_threshold << "\n";
  os << "embed_dim=" << cfg.embed_dim << "\n";
  os << "eval_every=" << cfg.eval_every << "\n";
  os << "heads=" << cfg.heads << "\n";
  os << "hidden=" << cfg.hidden << "\n";
  os << "iou_threshold=" << cfg.iou_threshold << "\n";
  os << "max_answer_len=" << cfg.max_answer_len << "\n";
  os << "max_caption_len=" << cfg.max_caption_len << "\n";
  os << "max_epochs=" << cfg.max_epochs << "\n";
  os << "max_question_len=" << cfg.max_question_len << "\n";
  os << "peak_lr=" << cfg.peak_lr << "\n";
  os << "seed=" << cfg.seed << "\n";
  os << "vocab_min_freq=" << cfg.vocab_min_freq << "\n";
  os << "warmup_end_epoch=" << cfg.warmup_end_epoch << "\n";
  return os.str();
}

std::uint64_t config_digest(const TrainConfig& cfg, int vocab_size, int d_v) {
  std::ostringstream os;
  os << "hidden=" << cfg.hidden << ";embed=" << cfg.embed() << ";heads=" << cfg.heads
     << ";ablations=" << cfg.ablations.to_string() << ";vocab=" << vocab_size << ";d_v=" << d_v
     << ";history_labels=" << kNumHistoryLabels << ";question_labels=" << kNumQuestionLabels
     << ";image_labels=" << kNumImageLabels;
  return fnv1a64(os.str());
}

}  // namespace gog
