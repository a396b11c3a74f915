#include "softaug/toy_corpus.hpp"

#include <array>

#include "softaug/rng.hpp"

namespace softaug {

namespace {

using Group = std::vector<std::string>;

struct Topic {
  std::vector<Group> nouns;
  std::vector<Group> verbs;
  std::string place;
};

const std::vector<Topic>& topics() {
  static const std::vector<Topic> t = {
      {{{"film", "movie"}, {"show", "series"}, {"actor", "star"}}, {{"watch", "see"}, {"like", "enjoy"}}, "cinema"},
      {{{"song", "tune"}, {"band", "group"}, {"singer", "vocalist"}}, {{"hear", "listen"}, {"like", "love"}}, "concert"},
      {{{"dog", "puppy"}, {"cat", "kitten"}, {"horse", "pony"}}, {{"feed", "walk"}, {"love", "adore"}}, "farm"},
      {{{"book", "novel"}, {"poem", "verse"}, {"author", "writer"}}, {{"read", "study"}, {"enjoy", "like"}}, "library"},
      {{{"meal", "dinner"}, {"pasta", "noodles"}, {"soup", "stew"}}, {{"cook", "make"}, {"eat", "taste"}}, "kitchen"},
      {{{"trip", "journey"}, {"city", "town"}, {"beach", "shore"}}, {{"visit", "explore"}, {"love", "enjoy"}}, "airport"},
      {{{"game", "match"}, {"team", "squad"}, {"coach", "trainer"}}, {{"play", "practice"}, {"watch", "follow"}}, "stadium"},
      {{{"job", "work"}, {"boss", "manager"}, {"office", "workplace"}}, {{"start", "finish"}, {"like", "hate"}}, "company"},
      {{{"car", "auto"}, {"bike", "bicycle"}, {"truck", "van"}}, {{"drive", "ride"}, {"fix", "repair"}}, "garage"},
      {{{"garden", "yard"}, {"flower", "blossom"}, {"tree", "plant"}}, {{"water", "grow"}, {"love", "enjoy"}}, "park"},
  };
  return t;
}

const std::vector<Group>& adjectives() {
  static const std::vector<Group> a = {{"great", "awesome", "amazing"}, {"nice", "lovely", "pleasant"},
                                       {"fun", "enjoyable"},            {"cool", "neat"},
                                       {"boring", "dull"},              {"big", "huge", "large"}};
  return a;
}

const Group& times() {
  static const Group t = {"today", "yesterday", "weekend", "morning", "evening", "tonight"};
  return t;
}

const Group& names() {
  static const Group n = {"anna", "ben", "carla", "dan", "eva", "finn", "gina", "hugo"};
  return n;
}

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

std::string fill(const std::string& tmpl, const std::vector<std::pair<std::string, std::string>>& slots) {
  std::string out = tmpl;
  for (const auto& [key, value] : slots) {
    const std::string mark = "{" + key + "}";
    for (auto pos = out.find(mark); pos != std::string::npos; pos = out.find(mark, pos + value.size())) {
      out.replace(pos, mark.size(), value);
    }
  }
  return out;
}

}  // namespace

std::vector<DialogueRecord> make_toy_dialogues(std::size_t count, std::uint64_t seed) {
  static const std::vector<std::string> persona = {
      "my name is {name} .", "i like {noun2} and {noun3} .", "i spend every {time} at the {place} .",
      "i have a {noun2} ."};
  static const std::vector<std::string> openers = {
      "hi ! how are you ?", "hello , what did you do {time} ?", "hey , long time no see .",
      "good {time} ! what is new ?"};
  static const std::vector<std::string> questions = {
      "do you {verb} the {noun} ?", "what {noun} do you {verb} ?", "is the {noun} {adj} ?",
      "i want to {verb} a {noun} at the {place} .", "tell me about your {noun} ."};
  static const std::vector<std::string> answers = {
      "yes , i {verb} the {noun} every {time} .",
      "i think the {noun} is {adj} .",
      "my {noun} is really {adj} !",
      "i {verb} a {adj} {noun} at the {place} {time} .",
      "the {noun} at the {place} is {adj} , you should {verb} it .",
      "no , but my friend {name} can {verb} the {noun} .",
      "we {verb} the {noun} together every {time} ."};
  static const std::vector<std::string> generic = {"i do not know .", "that is nice .", "oh , really ?"};

  Rng rng = Rng::stream(seed, "toy-dialogues");
  std::vector<DialogueRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const Topic& topic = pick(topics(), rng);
    const std::size_t concept_idx = rng.below(topic.nouns.size());
    const Group& noun = topic.nouns[concept_idx];
    const Group& noun2 = topic.nouns[(concept_idx + 1) % topic.nouns.size()];
    const Group& noun3 = topic.nouns[(concept_idx + 2) % topic.nouns.size()];
    const Group& verb = pick(topic.verbs, rng);
    const Group& adj = pick(adjectives(), rng);
    const std::string time = pick(times(), rng);
    const std::string name = pick(names(), rng);

    // Each occurrence draws its own surface form.
    auto slots = [&] {
      return std::vector<std::pair<std::string, std::string>>{
          {"noun", pick(noun, rng)},   {"noun2", pick(noun2, rng)}, {"noun3", pick(noun3, rng)},
          {"verb", pick(verb, rng)},   {"adj", pick(adj, rng)},     {"time", time},
          {"place", topic.place},      {"name", name}};
    };

    DialogueRecord r;
    r.context.push_back(fill(pick(persona, rng), slots()));
    if (rng.bernoulli(0.5)) r.history.push_back(fill(pick(openers, rng), slots()));
    r.history.push_back(fill(pick(questions, rng), slots()));
    r.response = rng.bernoulli(0.1) ? pick(generic, rng) : fill(pick(answers, rng), slots());
    out.push_back(std::move(r));
  }
  return out;
}

SynonymCorpus make_synonym_corpus(int num_pairs, std::size_t sentences, std::uint64_t seed) {
  static const std::vector<std::string> fillers = {"we", "saw", "really", "very", "today", "then", "so", "and"};
  constexpr int kContextWords = 6;

  SynonymCorpus out;
  for (int p = 0; p < num_pairs; ++p) {
    out.pairs.emplace_back("syn" + std::to_string(p) + "a", "syn" + std::to_string(p) + "b");
  }
  auto ctx = [](int pair, std::size_t j) { return "ctx" + std::to_string(pair) + "w" + std::to_string(j); };

  Rng rng = Rng::stream(seed, "synonym-corpus");
  for (std::size_t s = 0; s < sentences; ++s) {
    const int p = static_cast<int>(s % static_cast<std::size_t>(num_pairs));
    const std::string& word = rng.bernoulli(0.5) ? out.pairs[static_cast<std::size_t>(p)].first
                                                 : out.pairs[static_cast<std::size_t>(p)].second;
    std::string text = pick(fillers, rng);
    text += " " + ctx(p, rng.below(kContextWords));
    text += " " + ctx(p, rng.below(kContextWords));
    text += " " + word;
    text += " " + ctx(p, rng.below(kContextWords));
    text += " " + ctx(p, rng.below(kContextWords));
    text += " " + pick(fillers, rng);
    DialogueRecord r;
    r.history.push_back(pick(fillers, rng));
    r.response = std::move(text);
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace softaug
