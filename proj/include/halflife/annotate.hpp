#pragma once

// Title annotation: the TitleAnnotation schema, a deterministic keyword
// annotator, and an adapter for an external annotator process.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halflife/csv.hpp"
#include "halflife/error.hpp"

namespace halflife {

enum class Category { Conflict, Economy, Health_and_Safety, Other, Politics, Science_Tech, Society, Sports };

inline constexpr std::array<Category, 8> kCategories = {
    Category::Conflict, Category::Economy,      Category::Health_and_Safety, Category::Other,
    Category::Politics, Category::Science_Tech, Category::Society,           Category::Sports};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::Conflict: return "Conflict";
    case Category::Economy: return "Economy";
    case Category::Health_and_Safety: return "Health_and_Safety";
    case Category::Other: return "Other";
    case Category::Politics: return "Politics";
    case Category::Science_Tech: return "Science/Tech";
    case Category::Society: return "Society";
    case Category::Sports: return "Sports";
  }
  return "Other";
}

inline Category parse_category(std::string_view s) {
  for (auto c : kCategories)
    if (to_string(c) == s) return c;
  if (s == "Science_Tech" || s == "Science/Technology") return Category::Science_Tech;
  throw ValidationError("unknown title category '" + std::string(s) + "'");
}

struct TitleAnnotation {
  int sentiment = 0;           // -1, 0, 1
  int subjectivity = 0;        // 0 objective, 1 subjective
  int has_named_entities = 0;  // 0/1
  int urgency = 1;             // 1 low .. 3 high
  int is_emotional = 0;
  int has_emojis = 0;
  int is_question = 0;
  int verb_tense = 2;  // 1 past, 2 present, 3 future
  Category category = Category::Other;
  int title_num_tokens = 0;

  friend bool operator==(const TitleAnnotation&, const TitleAnnotation&) = default;
};

inline void check_ranges(const TitleAnnotation& a) {
  auto in = [](int v, int lo, int hi) { return v >= lo && v <= hi; };
  if (!in(a.sentiment, -1, 1) || !in(a.subjectivity, 0, 1) || !in(a.has_named_entities, 0, 1) ||
      !in(a.urgency, 1, 3) || !in(a.is_emotional, 0, 1) || !in(a.has_emojis, 0, 1) || !in(a.is_question, 0, 1) ||
      !in(a.verb_tense, 1, 3) || a.title_num_tokens < 0) {
    throw ValidationError("title annotation code out of range");
  }
}

inline nlohmann::json to_json(const TitleAnnotation& a) {
  return {{"sentiment", a.sentiment},
          {"subjectivity", a.subjectivity},
          {"has_named_entities", a.has_named_entities},
          {"urgency", a.urgency},
          {"is_emotional", a.is_emotional},
          {"has_emojis", a.has_emojis},
          {"is_question", a.is_question},
          {"verb_tense", a.verb_tense},
          {"category", std::string(to_string(a.category))},
          {"title_num_tokens", a.title_num_tokens}};
}

inline TitleAnnotation annotation_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("annotation must be a flat JSON object");
  auto get = [&](const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer())
      throw ValidationError(std::string("annotation field '") + key + "' missing or not an integer");
    return j[key].get<int>();
  };
  TitleAnnotation a;
  a.sentiment = get("sentiment");
  a.subjectivity = get("subjectivity");
  a.has_named_entities = get("has_named_entities");
  a.urgency = get("urgency");
  a.is_emotional = get("is_emotional");
  a.has_emojis = get("has_emojis");
  a.is_question = get("is_question");
  a.verb_tense = get("verb_tense");
  a.title_num_tokens = get("title_num_tokens");
  if (!j.contains("category") || !j["category"].is_string())
    throw ValidationError("annotation field 'category' missing or not a string");
  a.category = parse_category(j["category"].get<std::string>());
  check_ranges(a);
  return a;
}

class TitleAnnotator {
 public:
  virtual ~TitleAnnotator() = default;
  virtual TitleAnnotation annotate(std::string_view title) const = 0;

  /// Batch form; external annotators override this to amortise process start-up.
  virtual std::vector<TitleAnnotation> annotate_all(const std::vector<std::string>& titles) const {
    std::vector<TitleAnnotation> out;
    out.reserve(titles.size());
    for (const auto& t : titles) out.push_back(annotate(t));
    return out;
  }
};

namespace detail {

inline std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  for (size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    size_t len = c < 0x80 ? 1 : (c >> 5) == 0x6 ? 2 : (c >> 4) == 0xE ? 3 : (c >> 3) == 0x1E ? 4 : 1;
    if (i + len > s.size()) len = 1;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

inline bool is_emoji(char32_t cp) {
  return (cp >= 0x1F300 && cp <= 0x1FAFF) || (cp >= 0x2600 && cp <= 0x27BF) || (cp >= 0x1F1E6 && cp <= 0x1F1FF) ||
         (cp >= 0x2B00 && cp <= 0x2BFF) || cp == 0x203C || cp == 0x2049 || (cp >= 0x1F000 && cp <= 0x1F2FF);
}

inline std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Lowercased ASCII word with surrounding punctuation stripped.
inline std::string normalise(std::string_view tok) {
  std::string w;
  for (char c : tok) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalnum(u) || c == '\'' || u >= 0x80) w.push_back(static_cast<char>(std::tolower(u)));
  }
  while (!w.empty() && w.back() == '\'') w.pop_back();
  if (w.size() > 2 && w.compare(w.size() - 2, 2, "'s") == 0) w.resize(w.size() - 2);
  return w;
}

template <size_t N>
bool contains(const std::array<std::string_view, N>& lexicon, std::string_view word) {
  return std::find(lexicon.begin(), lexicon.end(), word) != lexicon.end();
}

// Keyword lexicons, matched against normalised whole words.
inline constexpr std::array<std::string_view, 26> kConflict = {
    "war",      "wars",     "troops",  "missile",  "missiles", "attack",   "attacks", "ceasefire", "army",
    "military", "clashes",  "strike",  "strikes",  "bomb",     "bombing",  "soldiers", "invasion", "conflict",
    "hamas",    "hezbollah", "drone",  "drones",   "shelling", "offensive", "terror",  "gunfire"};
inline constexpr std::array<std::string_view, 24> kEconomy = {
    "economy", "economic", "inflation", "market",   "markets", "stocks",  "budget",  "prices",
    "jobs",    "bank",     "banks",     "tax",      "taxes",   "trade",   "tariffs", "gdp",
    "rates",   "interest", "recession", "business", "oil",     "unemployment", "wages", "debt"};
inline constexpr std::array<std::string_view, 24> kHealth = {
    "health",  "hospital", "virus",    "vaccine", "accident", "fire",     "flood",    "floods",
    "safety",  "disease",  "outbreak", "covid",   "doctors",  "crash",    "earthquake", "storm",
    "injured", "dead",     "killed",   "deaths",  "medical",  "wildfire", "hurricane", "mpox"};
inline constexpr std::array<std::string_view, 24> kPolitics = {
    "election",  "elections", "president", "parliament", "minister", "vote",     "votes",    "senate",
    "campaign",  "government", "trump",    "biden",      "harris",   "chancellor", "scholz", "congress",
    "democrats", "republicans", "party",   "policy",     "debate",   "politics", "bundestag", "afd"};
inline constexpr std::array<std::string_view, 20> kScience = {
    "technology", "tech",  "ai",        "science",    "space",   "research", "startup",
    "smartphone", "software", "nasa",   "scientists", "robot",   "internet", "cyber",
    "iphone",     "apple",  "google",   "satellite",  "climate", "study"};
inline constexpr std::array<std::string_view, 22> kSociety = {
    "community", "protest", "protests",  "school",   "schools", "families", "education", "housing",
    "migrants",  "migration", "culture", "refugees", "police",  "crime",    "court",     "church",
    "women",     "children", "students", "rent",     "workers", "strike"};
inline constexpr std::array<std::string_view, 22> kSports = {
    "football", "match",  "championship", "olympics", "coach",  "league", "tennis", "goal",
    "soccer",   "nba",    "nfl",          "cup",      "player", "team",   "season", "bundesliga",
    "game",     "medal",  "tournament",   "transfer", "win",    "paralympics"};

inline constexpr std::array<std::string_view, 14> kHighUrgency = {
    "breaking", "urgent", "live", "now", "alert", "emergency", "just", "immediately",
    "escalates", "escalation", "warning", "evacuate", "evacuation", "imminent"};
inline constexpr std::array<std::string_view, 9> kMediumUrgency = {"update", "today", "latest", "new",   "developing",
                                                                    "tonight", "soon", "report", "tomorrow"};

inline constexpr std::array<std::string_view, 24> kPositive = {
    "win",  "wins",    "won",     "success",  "peace",   "hope",    "best",      "good",
    "great", "record", "growth",  "rescue",   "rescued", "celebrate", "celebrates", "recover",
    "recovery", "boost", "historic", "amazing", "happy",  "victory", "improves", "saved"};
inline constexpr std::array<std::string_view, 32> kNegative = {
    "war",     "attack",  "attacks", "crisis",   "dead",    "death",    "deaths",  "killed",
    "crash",   "fear",    "fears",   "worst",    "disaster", "scandal", "fails",   "failure",
    "collapse", "threat", "threats", "violence", "terror",  "shocking", "tragedy", "injured",
    "bomb",    "fire",    "flood",   "recession", "escalates", "clashes", "protest", "outrage"};
inline constexpr std::array<std::string_view, 20> kSubjective = {
    "best",    "worst",   "shocking", "amazing", "terrible", "incredible", "must",   "should",
    "opinion", "believe", "think",    "why",     "truth",    "insane",     "awful",  "brilliant",
    "i",       "we",      "my",       "unbelievable"};
inline constexpr std::array<std::string_view, 24> kEmotion = {
    "happy",  "joy",    "sad",      "grief",   "angry",    "anger",   "outrage", "furious",
    "fear",   "fears",  "terror",   "panic",   "shock",    "shocking", "surprise", "stunning",
    "tragic", "tragedy", "mourn",   "mourns",  "heartbreaking", "celebrate", "celebrates", "scared"};
inline constexpr std::array<std::string_view, 24> kPastMarkers = {
    "was",  "were",  "said",  "had",   "did",   "won",   "lost",  "became", "left",  "took",  "made",  "gave",
    "went", "came",  "found", "told",  "held",  "fell",  "rose",  "met",    "hit",   "ago",   "yesterday", "dies"};
inline constexpr std::array<std::string_view, 9> kFutureMarkers = {"will",     "tomorrow", "upcoming", "next",  "plans",
                                                                    "forecast", "expected", "soon",     "gonna"};
inline constexpr std::array<std::string_view, 28> kEntityGazetteer = {
    "us",      "usa",     "germany", "berlin",  "washington", "china",  "russia", "ukraine", "israel", "gaza",
    "france",  "uk",      "eu",      "nato",    "un",         "india",  "iran",   "trump",   "biden",  "harris",
    "putin",   "scholz",  "zelensky", "europe", "america",    "london", "paris",  "munich"};
inline constexpr std::array<std::string_view, 18> kCapitalisedStopwords = {
    "breaking", "live", "news", "update", "watch", "video", "full", "exclusive", "the",
    "a",        "an",   "new",  "why",    "how",   "what",  "who",  "when",      "will"};

}  // namespace detail

/// Deterministic keyword annotator producing the TitleAnnotation schema.
///
/// Rules, applied to whitespace tokens:
///  - is_question: the title contains '?', U+FF1F or U+00BF.
///  - has_emojis: any code point in the emoji/pictograph blocks.
///  - category: highest keyword-hit count across the seven topic lexicons,
///    ties broken in kCategories order; no hits gives Other.
///  - urgency: high-urgency word, "!!" or an all-caps BREAKING gives 3;
///    a medium word gives 2; otherwise 1.
///  - sentiment: sign of (positive - negative) lexicon hits.
///  - subjectivity: a subjective marker or an exclamation mark.
///  - is_emotional: an emotion-lexicon hit or an emoji.
///  - has_named_entities: a gazetteer hit, or a capitalised non-initial word
///    that is not a stopword, or an acronym of 2-5 capitals.
///  - verb_tense: future marker gives 3, else past marker or "-ed" word gives
///    1, else 2.
class RuleAnnotator final : public TitleAnnotator {
 public:
  TitleAnnotation annotate(std::string_view title) const override {
    using namespace detail;
    if (tokens(title).empty()) throw DomainError("annotate: empty title");
    TitleAnnotation a;
    const auto toks = tokens(title);
    a.title_num_tokens = static_cast<int>(toks.size());

    for (char32_t cp : decode_utf8(title)) {
      if (cp == U'?' || cp == 0xFF1F || cp == 0xBF) a.is_question = 1;
      if (is_emoji(cp)) a.has_emojis = 1;
    }

    std::array<int, 8> hits{};
    int pos = 0, neg = 0;
    bool high = title.find("!!") != std::string_view::npos, medium = false, subjective = false, emotional = false;
    bool past = false, future = false, entity = false;
    if (title.find('!') != std::string_view::npos) subjective = true;
    for (size_t i = 0; i < toks.size(); ++i) {
      const auto w = normalise(toks[i]);
      if (w.empty()) continue;
      hits[0] += contains(kConflict, w);
      hits[1] += contains(kEconomy, w);
      hits[2] += contains(kHealth, w);
      hits[4] += contains(kPolitics, w);
      hits[5] += contains(kScience, w);
      hits[6] += contains(kSociety, w);
      hits[7] += contains(kSports, w);
      high = high || contains(kHighUrgency, w);
      medium = medium || contains(kMediumUrgency, w);
      pos += contains(kPositive, w);
      neg += contains(kNegative, w);
      subjective = subjective || contains(kSubjective, w);
      emotional = emotional || contains(kEmotion, w);
      future = future || contains(kFutureMarkers, w);
      past = past || contains(kPastMarkers, w) || (w.size() > 4 && w.compare(w.size() - 2, 2, "ed") == 0);
      entity = entity || contains(kEntityGazetteer, w);

      const auto& raw = toks[i];
      const bool capital = !raw.empty() && std::isupper(static_cast<unsigned char>(raw[0]));
      if (!capital || contains(kCapitalisedStopwords, w)) continue;
      size_t upper = 0, alpha = 0;
      for (char c : raw) {
        if (std::isalpha(static_cast<unsigned char>(c))) {
          ++alpha;
          upper += std::isupper(static_cast<unsigned char>(c)) ? 1 : 0;
        }
      }
      const bool acronym = alpha >= 2 && alpha <= 5 && upper == alpha;
      const bool all_caps_title = std::all_of(title.begin(), title.end(), [](char c) {
        return !std::isalpha(static_cast<unsigned char>(c)) || std::isupper(static_cast<unsigned char>(c));
      });
      if (all_caps_title) continue;
      if (acronym || (i > 0 && upper < alpha)) entity = true;
    }

    int best = 3;
    int best_hits = 0;
    for (size_t c = 0; c < hits.size(); ++c) {
      if (hits[c] > best_hits) {
        best_hits = hits[c];
        best = static_cast<int>(c);
      }
    }
    a.category = kCategories[static_cast<size_t>(best)];
    a.urgency = high ? 3 : medium ? 2 : 1;
    a.sentiment = pos > neg ? 1 : neg > pos ? -1 : 0;
    a.subjectivity = subjective ? 1 : 0;
    a.is_emotional = (emotional || a.has_emojis) ? 1 : 0;
    a.has_named_entities = entity ? 1 : 0;
    a.verb_tense = future ? 3 : past ? 1 : 2;
    return a;
  }
};

/// Runs an external command that reads titles from stdin (one per line) and
/// prints one flat JSON TitleAnnotation per line.
class ExternalAnnotator final : public TitleAnnotator {
 public:
  explicit ExternalAnnotator(std::string command) : command_(std::move(command)) {}

  TitleAnnotation annotate(std::string_view title) const override {
    return annotate_all({std::string(title)}).front();
  }

  std::vector<TitleAnnotation> annotate_all(const std::vector<std::string>& titles) const override {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path();
    std::random_device rd;
    const auto stem = "halflife-annot-" + std::to_string(rd()) + std::to_string(rd());
    const auto in_path = dir / (stem + ".in");
    const auto out_path = dir / (stem + ".out");
    {
      std::ofstream in(in_path);
      for (auto t : titles) {
        if (detail::tokens(t).empty()) throw DomainError("annotate: empty title");
        std::replace(t.begin(), t.end(), '\n', ' ');
        std::replace(t.begin(), t.end(), '\r', ' ');
        in << t << '\n';
      }
    }
    const auto cmd = command_ + " < '" + in_path.string() + "' > '" + out_path.string() + "'";
    const int rc = std::system(cmd.c_str());
    std::error_code ec;
    fs::remove(in_path, ec);
    if (rc != 0) {
      fs::remove(out_path, ec);
      throw IoError("annotator command failed: " + command_);
    }
    std::ifstream out(out_path);
    std::vector<TitleAnnotation> result;
    std::string line;
    while (std::getline(out, line)) {
      if (line.empty()) continue;
      result.push_back(annotation_from_json(nlohmann::json::parse(line)));
    }
    out.close();
    fs::remove(out_path, ec);
    if (result.size() != titles.size()) {
      throw ValidationError("annotator returned " + std::to_string(result.size()) + " annotations for " +
                            std::to_string(titles.size()) + " titles");
    }
    return result;
  }

 private:
  std::string command_;
};

inline std::unique_ptr<TitleAnnotator> make_annotator(const std::string& command) {
  if (command.empty()) return std::make_unique<RuleAnnotator>();
  return std::make_unique<ExternalAnnotator>(command);
}

}  // namespace halflife
