#include "clue/textfeat.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "clue/errors.hpp"
#include "clue/io.hpp"
#include "clue/rng.hpp"

namespace clue::textfeat {

// Raw text of the shipped lexicon files, embedded at build time.
namespace lexicon_data {
extern const char* conjunctions;
extern const char* pronouns;
extern const char* prepositions;
extern const char* stopwords;
}  // namespace lexicon_data

std::array<double, 14> TextFeatureVector::to_array() const {
  return {conjugate_rate, pronoun_rate, preposition_rate, tobe_verb_rate,
          auxiliary_rate, normalization_rate, fraction_stopword_coverage,
          fraction_stopword_presence, easiness, document_entropy, word_count,
          title_word_count, duration, speaker_speed};
}

TextFeatureVector TextFeatureVector::from_array(const std::array<double, 14>& a) {
  TextFeatureVector v;
  v.conjugate_rate = a[0];
  v.pronoun_rate = a[1];
  v.preposition_rate = a[2];
  v.tobe_verb_rate = a[3];
  v.auxiliary_rate = a[4];
  v.normalization_rate = a[5];
  v.fraction_stopword_coverage = a[6];
  v.fraction_stopword_presence = a[7];
  v.easiness = a[8];
  v.document_entropy = a[9];
  v.word_count = a[10];
  v.title_word_count = a[11];
  v.duration = a[12];
  v.speaker_speed = a[13];
  return v;
}

std::vector<std::string> parse_lexicon_file(const std::string& text, const std::string& origin) {
  std::vector<std::string> entries;
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    size_t end = line.find_last_not_of(" \t");
    std::string entry = line.substr(start, end - start + 1);
    if (entry[0] == '#') continue;
    for (char& c : entry)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    entries.push_back(std::move(entry));
  }
  if (entries.empty()) throw_schema(origin + ": empty lexicon");
  return entries;
}

namespace {

const std::vector<std::string> kTobeVerbs = {"be",   "being", "was", "were",
                                             "been", "are",   "is"};

const std::vector<std::string> kAuxiliaries = {
    "will",  "shall", "cannot", "may",   "need to", "would", "should",
    "could", "might", "must",   "ought", "ought to", "can't", "can"};

const std::vector<std::string> kSuffixes = {"tion", "ment", "ence", "ance"};

uint64_t digest_list(uint64_t h, const std::string& name,
                     const std::vector<std::string>& entries) {
  h = fnv1a64(name, h);
  h = fnv1a64("\n", h);
  for (const auto& e : entries) {
    h = fnv1a64(e, h);
    h = fnv1a64("\n", h);
  }
  return h;
}

std::string to_hex(uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace

void LexiconSet::finalize() {
  auto fill = [](std::unordered_set<std::string>& set, const std::vector<std::string>& v) {
    set.clear();
    set.insert(v.begin(), v.end());
  };
  fill(conj_set_, conjunctions);
  fill(pron_set_, pronouns);
  fill(prep_set_, prepositions);
  fill(tobe_set_, tobe_verbs);
  fill(stop_set_, stopwords);
  aux_uni_.clear();
  aux_bi_.clear();
  for (const auto& a : auxiliaries) {
    if (a.find(' ') != std::string::npos)
      aux_bi_.insert(a);
    else
      aux_uni_.insert(a);
  }

  uint64_t h = 0xcbf29ce484222325ull;
  h = digest_list(h, "conjunctions", conjunctions);
  h = digest_list(h, "pronouns", pronouns);
  h = digest_list(h, "prepositions", prepositions);
  h = digest_list(h, "tobe_verbs", tobe_verbs);
  h = digest_list(h, "auxiliaries", auxiliaries);
  h = digest_list(h, "stopwords", stopwords);
  h = digest_list(h, "normalization_suffixes", normalization_suffixes);
  version = to_hex(h);
}

LexiconSet LexiconSet::builtin() {
  LexiconSet set;
  set.conjunctions = parse_lexicon_file(lexicon_data::conjunctions, "builtin conjunctions");
  set.pronouns = parse_lexicon_file(lexicon_data::pronouns, "builtin pronouns");
  set.prepositions = parse_lexicon_file(lexicon_data::prepositions, "builtin prepositions");
  set.stopwords = parse_lexicon_file(lexicon_data::stopwords, "builtin stopwords");
  set.tobe_verbs = kTobeVerbs;
  set.auxiliaries = kAuxiliaries;
  set.normalization_suffixes = kSuffixes;
  set.finalize();
  return set;
}

LexiconSet LexiconSet::load_dir(const std::filesystem::path& dir) {
  LexiconSet set;
  auto load = [&](const char* name) {
    auto path = dir / name;
    return parse_lexicon_file(read_text_file(path), path.string());
  };
  set.conjunctions = load("conjunctions.txt");
  set.pronouns = load("pronouns.txt");
  set.prepositions = load("prepositions.txt");
  set.stopwords = load("stopwords.txt");
  set.tobe_verbs = kTobeVerbs;
  set.auxiliaries = kAuxiliaries;
  set.normalization_suffixes = kSuffixes;
  set.finalize();
  return set;
}

namespace {

// Decodes one UTF-8 codepoint; returns 0xFFFD and advances by one byte on
// invalid input.
uint32_t decode_utf8(std::string_view s, size_t& i) {
  unsigned char c = static_cast<unsigned char>(s[i]);
  if (c < 0x80) {
    ++i;
    return c;
  }
  int extra = 0;
  uint32_t cp = 0;
  if ((c & 0xe0) == 0xc0) {
    extra = 1;
    cp = c & 0x1f;
  } else if ((c & 0xf0) == 0xe0) {
    extra = 2;
    cp = c & 0x0f;
  } else if ((c & 0xf8) == 0xf0) {
    extra = 3;
    cp = c & 0x07;
  } else {
    ++i;
    return 0xFFFD;
  }
  if (i + static_cast<size_t>(extra) >= s.size()) {
    ++i;
    return 0xFFFD;
  }
  for (int k = 1; k <= extra; ++k) {
    unsigned char cc = static_cast<unsigned char>(s[i + static_cast<size_t>(k)]);
    if ((cc & 0xc0) != 0x80) {
      ++i;
      return 0xFFFD;
    }
    cp = (cp << 6) | (cc & 0x3f);
  }
  i += static_cast<size_t>(extra) + 1;
  return cp;
}

bool is_letter_cp(uint32_t cp) {
  if (cp >= 'a' && cp <= 'z') return true;
  // Latin-1 supplement + Latin extended letters
  if (cp >= 0xC0 && cp <= 0x24F && cp != 0xD7 && cp != 0xF7) return true;
  return false;
}

void append_utf8(std::string& out, uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&]() {
    // apostrophes only survive inside a word
    size_t b = current.find_first_not_of('\'');
    size_t e = current.find_last_not_of('\'');
    if (b != std::string::npos) tokens.push_back(current.substr(b, e - b + 1));
    current.clear();
  };
  size_t i = 0;
  while (i < text.size()) {
    uint32_t cp = decode_utf8(text, i);
    if (cp >= 'A' && cp <= 'Z') cp = cp - 'A' + 'a';
    if (cp == 0x2019) cp = '\'';  // typographic apostrophe
    if (is_letter_cp(cp) || (cp >= '0' && cp <= '9') || cp == '\'') {
      append_utf8(current, cp);
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

int count_syllables(std::string_view word) {
  auto is_vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
  };
  int groups = 0;
  bool in_group = false;
  for (char c : word) {
    if (is_vowel(c)) {
      if (!in_group) ++groups;
      in_group = true;
    } else {
      in_group = false;
    }
  }
  if (groups > 1 && !word.empty() && word.back() == 'e') --groups;
  return std::max(1, groups);
}

double flesch_easiness(const std::string& text) {
  std::vector<std::string> words = tokenize(text);
  if (words.empty()) return 0.0;

  // sentence terminators counted as runs: "?!" is one sentence end
  size_t sentences = 0;
  bool in_run = false;
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') {
      if (!in_run) ++sentences;
      in_run = true;
    } else {
      in_run = false;
    }
  }
  if (sentences == 0) sentences = 1;

  double syllables = 0.0;
  for (const auto& w : words) syllables += count_syllables(w);

  double n_words = static_cast<double>(words.size());
  return 206.835 - 1.015 * (n_words / static_cast<double>(sentences)) -
         84.6 * (syllables / n_words);
}

TextFeatureVector extract_text_features(const std::string& transcript, const std::string& title,
                                        double duration_seconds, const LexiconSet& lex) {
  if (!(duration_seconds > 0.0)) throw_numeric("duration must be > 0");

  std::vector<std::string> tokens = tokenize(transcript);
  std::vector<std::string> title_tokens = tokenize(title);

  TextFeatureVector out;
  out.word_count = static_cast<double>(tokens.size());
  out.title_word_count = static_cast<double>(title_tokens.size());
  out.duration = duration_seconds;
  out.speaker_speed = out.word_count / (duration_seconds / 60.0);
  out.easiness = flesch_easiness(transcript);

  if (tokens.empty()) return out;

  // Two-word auxiliary entries ("need to", "ought to") match first and
  // consume their tokens; the unigram pass runs over what is left.
  std::vector<char> consumed(tokens.size(), 0);
  size_t aux_count = 0;
  for (size_t i = 0; i + 1 < tokens.size();) {
    if (lex.auxiliary_bigrams().count(tokens[i] + " " + tokens[i + 1])) {
      ++aux_count;
      consumed[i] = consumed[i + 1] = 1;
      i += 2;
    } else {
      ++i;
    }
  }

  size_t conj = 0, pron = 0, prep = 0, tobe = 0, norm = 0, stop_tokens = 0;
  std::unordered_set<std::string> stop_distinct;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (consumed[i]) continue;
    const std::string& t = tokens[i];
    if (lex.conjunction_set().count(t)) ++conj;
    if (lex.pronoun_set().count(t)) ++pron;
    if (lex.preposition_set().count(t)) ++prep;
    if (lex.tobe_set().count(t)) ++tobe;
    if (lex.auxiliary_unigrams().count(t)) ++aux_count;
    for (const auto& suffix : lex.normalization_suffixes) {
      if (t.size() > suffix.size() &&
          t.compare(t.size() - suffix.size(), suffix.size(), suffix) == 0) {
        ++norm;
        break;
      }
    }
    if (lex.stopword_set().count(t)) {
      ++stop_tokens;
      stop_distinct.insert(t);
    }
  }

  double n = out.word_count;
  out.conjugate_rate = conj / n;
  out.pronoun_rate = pron / n;
  out.preposition_rate = prep / n;
  out.tobe_verb_rate = tobe / n;
  out.auxiliary_rate = aux_count / n;
  out.normalization_rate = norm / n;
  out.fraction_stopword_presence = stop_tokens / n;
  out.fraction_stopword_coverage =
      static_cast<double>(stop_distinct.size()) / static_cast<double>(lex.stopwords.size());

  // Shannon entropy (base 2) of the ML unigram distribution
  std::map<std::string, size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  double h = 0.0;
  for (const auto& [_, c] : counts) {
    double p = c / n;
    h -= p * std::log2(p);
  }
  out.document_entropy = std::max(0.0, h);

  return out;
}

}  // namespace clue::textfeat
