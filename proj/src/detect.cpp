#include "mrs/detect.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>
#include <tuple>

#include "mrs/errors.hpp"

namespace mrs {

IntegralImage::IntegralImage(const GrayImage& g, bool squared)
    : width_(g.width), height_(g.height), table_(static_cast<std::size_t>(g.width + 1) * (g.height + 1), 0) {
  for (int y = 0; y < height_; ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < width_; ++x) {
      const std::int64_t v = g.at(x, y);
      row += squared ? v * v : v;
      table_[index(x + 1, y + 1)] = table_[index(x + 1, y)] + row;
    }
  }
}

IntegralImages integral_image(const GrayImage& g) { return {IntegralImage(g, false), IntegralImage(g, true)}; }

double iou(const FaceBox& a, const FaceBox& b) {
  const int ix = std::max(0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
  const int iy = std::max(0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

namespace {

struct ScaledRect {
  int x, y, w, h;
  double weight;
};

struct ScaledStump {
  std::vector<ScaledRect> rects;
  double threshold, left, right;
};

struct ScaledStage {
  double threshold;
  std::vector<ScaledStump> stumps;
};

// A cascade with every rectangle resized for one window size. Rounding
// changes rectangle areas, so the first weight is re-derived to keep
// zero-sum features zero-sum.
struct ScaledCascade {
  int win_w = 0, win_h = 0;
  ScaledRect norm{};        // inner window used for mean and variance
  double inv_norm_area = 0;  // feature sums are divided by this area
  std::vector<ScaledStage> stages;

  ScaledCascade(const Cascade& c, int w, int h) : win_w(w), win_h(h) {
    const double sx = static_cast<double>(w) / c.window_width;
    const double sy = static_cast<double>(h) / c.window_height;
    auto scale = [&](const WeightedRect& r) {
      const int x = static_cast<int>(std::lround(r.x * sx)), y = static_cast<int>(std::lround(r.y * sy));
      const int x2 = static_cast<int>(std::lround((r.x + r.w) * sx));
      const int y2 = static_cast<int>(std::lround((r.y + r.h) * sy));
      return ScaledRect{x, y, std::max(1, x2 - x), std::max(1, y2 - y), r.weight};
    };
    // One-pixel inset, as in the file's training convention.
    norm = scale(WeightedRect{1, 1, c.window_width - 2, c.window_height - 2, 1.0});
    inv_norm_area = 1.0 / (static_cast<double>(norm.w) * norm.h);

    for (const auto& st : c.stages) {
      ScaledStage s{st.threshold, {}};
      for (const auto& wc : st.weak_classifiers) {
        ScaledStump ss{{}, wc.threshold, wc.left_value, wc.right_value};
        double base_balance = 0;
        for (const auto& r : wc.feature.rects) base_balance += r.weight * r.w * r.h;
        for (const auto& r : wc.feature.rects) ss.rects.push_back(scale(r));
        if (std::abs(base_balance) < 1e-9 && ss.rects.size() > 1) {
          double rest = 0;
          for (std::size_t k = 1; k < ss.rects.size(); ++k) rest += ss.rects[k].weight * ss.rects[k].w * ss.rects[k].h;
          ss.rects[0].weight = -rest / (static_cast<double>(ss.rects[0].w) * ss.rects[0].h);
        }
        s.stumps.push_back(std::move(ss));
      }
      stages.push_back(std::move(s));
    }
  }

  bool passes(const IntegralImages& ii, int x0, int y0) const {
    const double n = static_cast<double>(norm.w) * norm.h;
    const double sum = static_cast<double>(ii.sum.rect_sum(x0 + norm.x, y0 + norm.y, norm.w, norm.h));
    const double sq = static_cast<double>(ii.squared.rect_sum(x0 + norm.x, y0 + norm.y, norm.w, norm.h));
    const double mean = sum / n;
    const double var = sq / n - mean * mean;
    if (!(var > 0) || std::sqrt(var) < kMinWindowStd) return false;
    const double stddev = std::sqrt(var);

    for (const auto& stage : stages) {
      double total = 0;
      for (const auto& st : stage.stumps) {
        double f = 0;
        for (const auto& r : st.rects) f += r.weight * static_cast<double>(ii.sum.rect_sum(x0 + r.x, y0 + r.y, r.w, r.h));
        f *= inv_norm_area;
        total += f < st.threshold * stddev ? st.left : st.right;
      }
      if (total < stage.threshold) return false;
    }
    return true;
  }
};

}  // namespace

bool evaluate_window(const Cascade& cascade, const IntegralImages& ii, const FaceBox& window) {
  if (window.w <= 0 || window.h <= 0 || window.x < 0 || window.y < 0 || window.x + window.w > ii.sum.width() ||
      window.y + window.h > ii.sum.height()) {
    throw DimensionError("window lies outside the image");
  }
  return ScaledCascade(cascade, window.w, window.h).passes(ii, window.x, window.y);
}

std::vector<FaceBox> scan_windows(const Cascade& cascade, const GrayImage& g, const DetectParams& params) {
  if (params.scale_factor <= 1.0) throw ParameterError("scale_factor must exceed 1");
  if (params.min_size < std::max(cascade.window_width, cascade.window_height)) {
    throw ParameterError("min_size must be at least the cascade window");
  }
  if (params.step_fraction <= 0) throw ParameterError("step_fraction must be positive");

  // Window sizes: base * factor^k starting from the smallest scale that
  // reaches min_size.
  std::vector<std::pair<int, int>> sizes;
  const double base = std::max(cascade.window_width, cascade.window_height);
  for (double s = params.min_size / base;; s *= params.scale_factor) {
    const int w = static_cast<int>(std::lround(cascade.window_width * s));
    const int h = static_cast<int>(std::lround(cascade.window_height * s));
    if (w > g.width || h > g.height) break;
    if (sizes.empty() || sizes.back().first != w) sizes.emplace_back(w, h);
  }
  if (sizes.empty()) return {};

  const IntegralImages ii = integral_image(g);
  std::vector<std::vector<FaceBox>> hits(sizes.size());
  auto run = [&](std::size_t k) {
    const auto [w, h] = sizes[k];
    const ScaledCascade sc(cascade, w, h);
    const int step = std::max(1, static_cast<int>(std::lround(w * params.step_fraction)));
    for (int y = 0; y + h <= g.height; y += step) {
      for (int x = 0; x + w <= g.width; x += step) {
        if (sc.passes(ii, x, y)) hits[k].push_back(FaceBox{x, y, w, h, 1});
      }
    }
  };

  unsigned n_threads = params.threads ? params.threads : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(sizes.size()));
  if (n_threads <= 1) {
    for (std::size_t k = 0; k < sizes.size(); ++k) run(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k; (k = next.fetch_add(1)) < sizes.size();) run(k);
      });
    }
  }

  std::vector<FaceBox> raw;
  for (auto& v : hits) raw.insert(raw.end(), v.begin(), v.end());
  std::sort(raw.begin(), raw.end(), [](const FaceBox& a, const FaceBox& b) {
    return std::tie(a.y, a.x, a.w, a.h) < std::tie(b.y, b.x, b.w, b.h);
  });
  return raw;
}

std::vector<FaceBox> group_boxes(const std::vector<FaceBox>& raw, int min_neighbors, double min_iou) {
  std::vector<std::size_t> parent(raw.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < raw.size(); ++i) {
    for (std::size_t j = i + 1; j < raw.size(); ++j) {
      if (iou(raw[i], raw[j]) >= min_iou) {
        const std::size_t a = find(i), b = find(j);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
      }
    }
  }

  struct Acc {
    double x = 0, y = 0, w = 0, h = 0;
    int n = 0;
    int members = 0;
  };
  std::vector<Acc> acc(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    Acc& a = acc[find(i)];
    a.x += raw[i].x;
    a.y += raw[i].y;
    a.w += raw[i].w;
    a.h += raw[i].h;
    a.n += std::max(1, raw[i].score);
    ++a.members;
  }
  std::vector<FaceBox> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (find(i) != i) continue;
    const Acc& a = acc[i];
    if (a.n < min_neighbors) continue;
    const double m = a.members;
    out.push_back(FaceBox{static_cast<int>(std::lround(a.x / m)), static_cast<int>(std::lround(a.y / m)),
                          static_cast<int>(std::lround(a.w / m)), static_cast<int>(std::lround(a.h / m)), a.n});
  }
  return out;
}

std::vector<FaceBox> detect_faces(const Cascade& cascade, const GrayImage& g, const DetectParams& params) {
  if (g.width < params.min_size || g.height < params.min_size) return {};
  return group_boxes(scan_windows(cascade, g, params), params.min_neighbors, params.group_iou);
}

FaceBox select_primary_face(const std::vector<FaceBox>& boxes) {
  if (boxes.empty()) throw NoFaceError("no face detected");
  return *std::min_element(boxes.begin(), boxes.end(), [](const FaceBox& a, const FaceBox& b) {
    if (a.area() != b.area()) return a.area() > b.area();
    if (a.score != b.score) return a.score > b.score;
    return std::tie(a.y, a.x) < std::tie(b.y, b.x);
  });
}

GrayImage crop_resize(const GrayImage& g, const FaceBox& box, int out) {
  if (out <= 0) throw DimensionError("output size must be positive");
  if (box.w <= 0 || box.h <= 0) throw DimensionError("degenerate crop box");
  if (box.x < 0 || box.y < 0 || box.x + box.w > g.width || box.y + box.h > g.height) {
    throw DimensionError("crop box lies outside the " + std::to_string(g.width) + "x" + std::to_string(g.height) +
                         " image");
  }
  GrayImage r(out, out);
  const double sx = static_cast<double>(box.w) / out, sy = static_cast<double>(box.h) / out;
  for (int oy = 0; oy < out; ++oy) {
    const double fy = std::clamp((oy + 0.5) * sy - 0.5, 0.0, box.h - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, box.h - 1);
    const double ty = fy - y0;
    for (int ox = 0; ox < out; ++ox) {
      const double fx = std::clamp((ox + 0.5) * sx - 0.5, 0.0, box.w - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, box.w - 1);
      const double tx = fx - x0;
      const double top = (1 - tx) * g.at(box.x + x0, box.y + y0) + tx * g.at(box.x + x1, box.y + y0);
      const double bot = (1 - tx) * g.at(box.x + x0, box.y + y1) + tx * g.at(box.x + x1, box.y + y1);
      const double v = (1 - ty) * top + ty * bot;
      r.at(ox, oy) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return r;
}

}  // namespace mrs
