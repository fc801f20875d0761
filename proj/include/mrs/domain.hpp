#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace mrs {

enum class Emotion { Angry = 0, Happy = 1, Neutral = 2, Sad = 3 };
enum class Ethnicity { White = 0, Black = 1, Asian = 2, Indian = 3, Others = 4 };
enum class AgeBucket { Child = 0, Youth = 1, Adult = 2, Senior = 3 };

inline constexpr int kNumEmotions = 4;
inline constexpr int kNumEthnicities = 5;
inline constexpr int kNumAgeBuckets = 4;
inline constexpr int kMinAge = 0;
inline constexpr int kMaxAge = 116;

inline constexpr std::array<Emotion, kNumEmotions> kAllEmotions{Emotion::Angry, Emotion::Happy, Emotion::Neutral,
                                                                Emotion::Sad};
inline constexpr std::array<Ethnicity, kNumEthnicities> kAllEthnicities{
    Ethnicity::White, Ethnicity::Black, Ethnicity::Asian, Ethnicity::Indian, Ethnicity::Others};
inline constexpr std::array<AgeBucket, kNumAgeBuckets> kAllAgeBuckets{AgeBucket::Child, AgeBucket::Youth,
                                                                      AgeBucket::Adult, AgeBucket::Senior};

// Lowercase wire tokens ("angry", "youth", "others", ...).
std::string_view token(Emotion e);
std::string_view token(Ethnicity e);
std::string_view token(AgeBucket b);
std::optional<Emotion> parse_emotion(std::string_view s);
std::optional<Ethnicity> parse_ethnicity(std::string_view s);
std::optional<AgeBucket> parse_age_bucket(std::string_view s);

// 0-12 child, 13-24 youth, 25-44 adult, 45+ senior. Throws RangeError
// outside [0, 116].
AgeBucket bucket_age(int age);

// Rounds and clamps a regression output to a valid age.
int clamp_age(double years);

}  // namespace mrs
