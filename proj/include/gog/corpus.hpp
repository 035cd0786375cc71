#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gog {

struct Region {
  std::array<double, 4> bbox{};  // x1, y1, x2, y2 in pixels
  std::vector<double> feature;
};

struct DialogRound {
  std::vector<std::string> question;
  std::vector<std::string> answer;
  std::vector<std::vector<std::string>> candidates;  // exactly 100 when present
  int gt_index = -1;
  std::optional<std::vector<double>> relevance;  // graded, gt pinned to 1
};

struct DialogInstance {
  std::string image_id;
  double image_w = 0.0;
  double image_h = 0.0;
  std::vector<Region> regions;
  std::vector<std::string> caption;
  std::vector<DialogRound> rounds;
};

/// A mention is a token span inside one history turn. Turn 0 is the caption;
/// turn i >= 1 is the question of round i-1 (answers carry no mentions).
struct CorefMention {
  int turn = 0;
  int start = 0;
  int end = 0;  // [start, end)
};

struct CorefAnnotation {
  std::vector<std::vector<CorefMention>> chains;
};

/// Head/label arrays over one question; heads[i] == -1 marks the root.
struct DependencyAnnotation {
  std::vector<int> heads;
  std::vector<int> labels;
};

constexpr int kNumDepLabels = 13;
int dep_label_id(const std::string& name);
const std::string& dep_label_name(int id);

struct Vocabulary {
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kSos = 2;
  static constexpr int kEos = 3;

  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, int> token_to_id;
  int min_freq = 5;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id(const std::string& token) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;
};

struct AnnotatedDialog {
  DialogInstance dialog;
  CorefAnnotation coref;
  std::vector<DependencyAnnotation> deps;  // one per round
};

struct Corpus {
  std::vector<AnnotatedDialog> dialogs;
  int dropped_mentions = 0;  // coref spans cut by caption truncation at load
};

struct CorpusLimits {
  int max_caption_len = 40;
  int max_question_len = 20;
  int max_answer_len = 20;
};

/// Reads the four sidecar files of a split (corpus, regions, coref, deps)
/// from `dir`, validating every structural invariant. Errors name the record
/// and field that failed.
Corpus load_corpus(const std::string& dir, const std::string& split,
                   const CorpusLimits& limits = CorpusLimits{});

void save_corpus(const std::string& dir, const std::string& split, const Corpus& corpus);

/// Deterministic id assignment: frequency descending, then lexicographic.
/// Counts caption, question and answer tokens of the given corpus.
Vocabulary build_vocabulary(const Corpus& corpus, int min_freq = 5);

/// Fixed-length prefix with PAD fill; returns (ids, valid_length).
std::pair<std::vector<int>, int> pad_or_truncate(const std::vector<int>& ids, int max_len);

/// Total number of rounds across all dialogs.
std::size_t corpus_rounds(const Corpus& corpus);

}  // namespace gog
