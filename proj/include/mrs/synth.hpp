#pragma once

#include <cstdint>
#include <filesystem>

#include "mrs/domain.hpp"
#include "mrs/image.hpp"
#include "mrs/random.hpp"

// Procedural 48x48 stand-ins for the two face datasets, written in their
// exact CSV layouts. Expression drives mouth and brows, age drives head
// proportions, wrinkles and hair grey, and the ethnicity class drives tone
// and feature shape, each with enough nuisance variation (lighting, pose
// jitter, noise) that the labels have to be learned rather than read off.
namespace mrs::synth {

// Native FER-2013 codes: 0 angry, 1 disgust, 2 fear, 3 happy, 4 sad,
// 5 surprise, 6 neutral.
struct FaceParams {
  int fer_code = 6;
  int age = 30;
  Ethnicity ethnicity = Ethnicity::White;
};

GrayImage render_face(const FaceParams& params, Rng& rng);

// Class frequencies follow the public FER-2013 release.
int sample_fer_code(Rng& rng);
// Skewed towards young adults with a long tail to 116.
int sample_age(Rng& rng);

// `emotion,pixels,Usage` with roughly 80/10/10 Training/PublicTest/PrivateTest.
void write_fer_csv(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed);
// `age,ethnicity,gender,img_name,pixels`.
void write_age_csv(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed);

}  // namespace mrs::synth
