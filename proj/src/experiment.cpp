#include "mrs/experiment.hpp"

#include "mrs/errors.hpp"
#include "mrs/log.hpp"

namespace mrs {

TaskData load_task_data(Task task, const std::filesystem::path& data, std::uint64_t split_seed, bool strict) {
  if (!std::filesystem::exists(data)) throw DatasetError("dataset " + data.string() + " does not exist");
  LoadOptions options;
  options.strict = strict;
  TaskData out;
  if (task == Task::Emotion) {
    out.train = load_fer2013(data, Split::Train, FerLabelMap::canonical(), options);
    out.test = load_fer2013(data, Split::Test, FerLabelMap::canonical(), options);
  } else {
    const Dataset all = load_age_ethnicity(data, options);
    if (all.size() < 2) throw DatasetError(data.string() + " has fewer than two usable rows");
    auto [train, test] = split(all, kAgeTestFraction, split_seed);
    out.train = std::move(train);
    out.test = std::move(test);
  }
  if (out.train.empty()) throw DatasetError(data.string() + " has no training rows");
  const std::size_t skipped = out.train.skipped_rows;
  if (skipped > 0) log::warn("data", data.string() + ": skipped " + std::to_string(skipped) + " invalid rows");
  return out;
}

}  // namespace mrs
