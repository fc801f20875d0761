#pragma once

#include <cstdint>
#include <filesystem>

#include "mrs/data.hpp"
#include "mrs/model.hpp"

namespace mrs {

inline constexpr std::uint64_t kDefaultSplitSeed = 42;
inline constexpr double kAgeTestFraction = 0.2;

struct TaskData {
  Dataset train;
  Dataset test;
};

// Emotion reads FER-2013 (CSV or directory) and keeps the file's own
// Training / test split. Age and ethnicity read the age/ethnicity CSV and
// hold out a seeded 20%, so train and evaluate agree on the partition.
TaskData load_task_data(Task task, const std::filesystem::path& data, std::uint64_t split_seed = kDefaultSplitSeed,
                        bool strict = false);

}  // namespace mrs
