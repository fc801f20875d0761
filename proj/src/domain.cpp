#include "mrs/domain.hpp"

#include <algorithm>
#include <cmath>

#include "mrs/errors.hpp"

namespace mrs {

namespace {

constexpr std::array<std::string_view, kNumEmotions> kEmotionTokens{"angry", "happy", "neutral", "sad"};
constexpr std::array<std::string_view, kNumEthnicities> kEthnicityTokens{"white", "black", "asian", "indian",
                                                                         "others"};
constexpr std::array<std::string_view, kNumAgeBuckets> kBucketTokens{"child", "youth", "adult", "senior"};

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(const std::array<std::string_view, N>& tokens, std::string_view s) {
  const auto it = std::find(tokens.begin(), tokens.end(), s);
  if (it == tokens.end()) return std::nullopt;
  return static_cast<Enum>(it - tokens.begin());
}

}  // namespace

std::string_view token(Emotion e) { return kEmotionTokens.at(static_cast<std::size_t>(e)); }
std::string_view token(Ethnicity e) { return kEthnicityTokens.at(static_cast<std::size_t>(e)); }
std::string_view token(AgeBucket b) { return kBucketTokens.at(static_cast<std::size_t>(b)); }

std::optional<Emotion> parse_emotion(std::string_view s) { return lookup<Emotion>(kEmotionTokens, s); }
std::optional<Ethnicity> parse_ethnicity(std::string_view s) { return lookup<Ethnicity>(kEthnicityTokens, s); }
std::optional<AgeBucket> parse_age_bucket(std::string_view s) { return lookup<AgeBucket>(kBucketTokens, s); }

AgeBucket bucket_age(int age) {
  if (age < kMinAge || age > kMaxAge) {
    throw RangeError("age " + std::to_string(age) + " outside [0, 116]");
  }
  if (age <= 12) return AgeBucket::Child;
  if (age <= 24) return AgeBucket::Youth;
  if (age <= 44) return AgeBucket::Adult;
  return AgeBucket::Senior;
}

int clamp_age(double years) {
  if (!std::isfinite(years)) return kMinAge;
  return static_cast<int>(std::clamp(std::lround(years), long{kMinAge}, long{kMaxAge}));
}

}  // namespace mrs
