// Writes procedural stand-ins for the two face datasets in their CSV
// layouts, for machines without the real downloads.

#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "mrs/errors.hpp"
#include "mrs/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate synthetic FER-2013 and age/ethnicity CSVs"};
  std::string fer, age;
  std::size_t fer_rows = 10000, age_rows = 8000;
  std::uint64_t seed = 42;
  app.add_option("--fer", fer, "write a FER-2013 style CSV here");
  app.add_option("--fer-rows", fer_rows, "rows in the FER CSV")->capture_default_str();
  app.add_option("--age", age, "write an age/ethnicity CSV here");
  app.add_option("--age-rows", age_rows, "rows in the age/ethnicity CSV")->capture_default_str();
  app.add_option("--seed", seed, "generator seed")->capture_default_str();
  try {
    app.parse(argc, argv);
    if (fer.empty() && age.empty()) throw CLI::RequiredError("--fer or --age");
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    if (!fer.empty()) mrs::synth::write_fer_csv(fer, fer_rows, seed);
    if (!age.empty()) mrs::synth::write_age_csv(age, age_rows, mrs::mix_seed(seed, 1));
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", {{"message", e.what()}}}}.dump() << std::endl;
    return 1;
  }
  return 0;
}
