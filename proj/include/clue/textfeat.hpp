#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "clue/corpus.hpp"

namespace clue::textfeat {

// The 14 linguistic features, field order matching corpus::kFeatureNames.
struct TextFeatureVector {
  double conjugate_rate = 0.0;
  double pronoun_rate = 0.0;
  double preposition_rate = 0.0;
  double tobe_verb_rate = 0.0;
  double auxiliary_rate = 0.0;
  double normalization_rate = 0.0;
  double fraction_stopword_coverage = 0.0;
  double fraction_stopword_presence = 0.0;
  double easiness = 0.0;
  double document_entropy = 0.0;  // bits
  double word_count = 0.0;
  double title_word_count = 0.0;
  double duration = 0.0;       // seconds
  double speaker_speed = 0.0;  // words per minute

  std::array<double, 14> to_array() const;
  static TextFeatureVector from_array(const std::array<double, 14>& a);
};

// Word/suffix lists backing the rate features. The to-be and auxiliary lists
// are fixed; the other lists ship as data files and can be overridden.
struct LexiconSet {
  std::vector<std::string> conjunctions;
  std::vector<std::string> pronouns;
  std::vector<std::string> prepositions;
  std::vector<std::string> tobe_verbs;
  std::vector<std::string> auxiliaries;  // entries may be two words ("need to")
  std::vector<std::string> stopwords;
  std::vector<std::string> normalization_suffixes;
  std::string version;  // digest over all lists

  static LexiconSet builtin();
  // Loads conjunctions.txt, pronouns.txt, prepositions.txt, stopwords.txt
  // from a directory; the fixed lists stay as in builtin().
  static LexiconSet load_dir(const std::filesystem::path& dir);

  const std::unordered_set<std::string>& conjunction_set() const { return conj_set_; }
  const std::unordered_set<std::string>& pronoun_set() const { return pron_set_; }
  const std::unordered_set<std::string>& preposition_set() const { return prep_set_; }
  const std::unordered_set<std::string>& tobe_set() const { return tobe_set_; }
  const std::unordered_set<std::string>& auxiliary_unigrams() const { return aux_uni_; }
  const std::unordered_set<std::string>& auxiliary_bigrams() const { return aux_bi_; }
  const std::unordered_set<std::string>& stopword_set() const { return stop_set_; }

 private:
  void finalize();

  std::unordered_set<std::string> conj_set_, pron_set_, prep_set_, tobe_set_,
      aux_uni_, aux_bi_, stop_set_;
};

// One token (or suffix) per line, UTF-8, '#' comments.
std::vector<std::string> parse_lexicon_file(const std::string& text, const std::string& origin);

// Lowercase tokens split on anything that is not a letter, digit, or
// intra-word apostrophe.
std::vector<std::string> tokenize(std::string_view text);

TextFeatureVector extract_text_features(const std::string& transcript, const std::string& title,
                                        double duration_seconds, const LexiconSet& lexicons);

// 206.835 - 1.015*(words/sentences) - 84.6*(syllables/words); 0 for empty text.
double flesch_easiness(const std::string& text);

// Maximal aeiouy groups, minus one for a terminal 'e' when the count exceeds
// one, floored at 1.
int count_syllables(std::string_view word);

}  // namespace clue::textfeat
