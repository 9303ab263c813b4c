#pragma once

#include <array>
#include <string>
#include <vector>

#include "slm/corpus.hpp"
#include "slm/random.hpp"

namespace slm::synthetic {

// Five-stage daily-routine stories. Each stage draws its verb and object from
// a stage-specific pool, so the successor of a sentence is predictable from
// its content while bag-of-words similarity between stages stays flat.
inline constexpr std::array<std::array<const char*, 3>, 5> kVerbs{{
    {"woke", "stirred", "arose"},
    {"cooked", "brewed", "ate"},
    {"drove", "walked", "biked"},
    {"finished", "filed", "completed"},
    {"slept", "rested", "dozed"},
}};

inline constexpr std::array<std::array<const char*, 3>, 5> kObjects{{
    {"alarm", "sunrise", "rooster"},
    {"breakfast", "coffee", "eggs"},
    {"office", "market", "school"},
    {"report", "project", "paperwork"},
    {"bed", "couch", "hammock"},
}};

inline constexpr std::array<const char*, 20> kNames{
    "Anna", "Ben",  "Chloe", "Dev",  "Emma", "Farid", "Gina", "Hugo", "Ines", "Jon",
    "Kira", "Liam", "Mona",  "Nils", "Omar", "Pia",   "Quin", "Rosa", "Sam",  "Tara"};

inline constexpr std::array<const char*, 10> kPlaces{
    "river", "park", "station", "bakery", "harbor", "library", "garden", "bridge", "plaza",
    "tower"};

inline std::vector<corpus::Story> routine_stories(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const auto pick = [&rng](const auto& pool) { return std::string(pool[rng.below(pool.size())]); };
  std::vector<corpus::Story> stories;
  stories.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    corpus::Story s;
    s.story_id = "routine-" + std::to_string(i);
    const std::string name = pick(kNames);
    const std::string place = pick(kPlaces);
    for (std::size_t stage = 0; stage < kVerbs.size(); ++stage) {
      s.sentences.push_back(name + " " + pick(kVerbs[stage]) + " the " + pick(kObjects[stage]) +
                            " near the " + place + ".");
    }
    stories.push_back(std::move(s));
  }
  return stories;
}

}  // namespace slm::synthetic
