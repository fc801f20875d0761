#pragma once

#include <cstdint>
#include <vector>

#include "mrs/cascade.hpp"
#include "mrs/image.hpp"

namespace mrs {

// Summed-area table with a zero row and column in front, so at(x, y) is the
// inclusive sum over (0,0)-(x,y) and any rectangle costs four lookups.
class IntegralImage {
 public:
  IntegralImage() = default;
  explicit IntegralImage(const GrayImage& g, bool squared = false);

  int width() const { return width_; }
  int height() const { return height_; }
  std::int64_t at(int x, int y) const { return table_[index(x + 1, y + 1)]; }
  std::int64_t rect_sum(int x, int y, int w, int h) const {
    return table_[index(x + w, y + h)] - table_[index(x, y + h)] - table_[index(x + w, y)] + table_[index(x, y)];
  }

 private:
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * (width_ + 1) + x; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::int64_t> table_;
};

struct IntegralImages {
  IntegralImage sum;
  IntegralImage squared;
};

IntegralImages integral_image(const GrayImage& g);

struct FaceBox {
  int x = 0, y = 0, w = 0, h = 0;
  int score = 0;  // neighbours merged into this box

  long area() const { return static_cast<long>(w) * h; }
  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

double iou(const FaceBox& a, const FaceBox& b);

// Windows whose pixel standard deviation is below this are rejected.
inline constexpr double kMinWindowStd = 1.0;

// True iff the window passes every stage. Features are scaled to the window
// and normalized by its standard deviation.
bool evaluate_window(const Cascade& cascade, const IntegralImages& ii, const FaceBox& window);

struct DetectParams {
  double scale_factor = 1.1;
  int min_size = 24;
  int min_neighbors = 3;
  double group_iou = 0.3;
  // Scan stride as a fraction of the window side (at least one pixel).
  double step_fraction = 1.0 / 24.0;
  unsigned threads = 0;  // 0 = hardware concurrency
};

// Raw window hits before grouping, sorted top-left first.
std::vector<FaceBox> scan_windows(const Cascade& cascade, const GrayImage& g, const DetectParams& params = {});

// Clusters boxes whose IoU reaches `min_iou` (transitively), averages each
// cluster and keeps those with at least `min_neighbors` members.
std::vector<FaceBox> group_boxes(const std::vector<FaceBox>& raw, int min_neighbors, double min_iou);

std::vector<FaceBox> detect_faces(const Cascade& cascade, const GrayImage& g, const DetectParams& params = {});

// Largest area, then higher score, then top-most, then left-most.
// Throws NoFaceError on an empty list.
FaceBox select_primary_face(const std::vector<FaceBox>& boxes);

// Crops `box` and resamples it bilinearly (pixel centres aligned, edges
// clamped) to out x out. Throws DimensionError on a degenerate box or one
// that leaves the image.
GrayImage crop_resize(const GrayImage& g, const FaceBox& box, int out = 48);

}  // namespace mrs
