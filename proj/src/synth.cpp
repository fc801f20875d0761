#include "mrs/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <vector>

#include "mrs/errors.hpp"

namespace mrs::synth {

namespace {

constexpr int kSize = 48;

struct Canvas {
  std::array<double, kSize * kSize> px{};

  double& at(int x, int y) { return px[static_cast<std::size_t>(y * kSize + x)]; }

  void blend(int x, int y, double value, double coverage) {
    if (x < 0 || y < 0 || x >= kSize || y >= kSize || coverage <= 0) return;
    double& p = at(x, y);
    p += (value - p) * std::min(1.0, coverage);
  }

  void fill_ellipse(double cx, double cy, double rx, double ry, double value, double opacity = 1.0) {
    const int x0 = static_cast<int>(std::floor(cx - rx - 1)), x1 = static_cast<int>(std::ceil(cx + rx + 1));
    const int y0 = static_cast<int>(std::floor(cy - ry - 1)), y1 = static_cast<int>(std::ceil(cy + ry + 1));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        const double d = std::sqrt(dx * dx + dy * dy);
        blend(x, y, value, opacity * std::clamp((1 - d) * std::min(rx, ry) + 0.5, 0.0, 1.0));
      }
    }
  }

  // Soft polyline stroke.
  void stroke(const std::vector<std::array<double, 2>>& pts, double width, double value, double opacity = 1.0) {
    double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
    for (const auto& p : pts) {
      minx = std::min(minx, p[0]);
      maxx = std::max(maxx, p[0]);
      miny = std::min(miny, p[1]);
      maxy = std::max(maxy, p[1]);
    }
    const double pad = width + 1;
    for (int y = static_cast<int>(miny - pad); y <= static_cast<int>(maxy + pad); ++y) {
      for (int x = static_cast<int>(minx - pad); x <= static_cast<int>(maxx + pad); ++x) {
        const double qx = x + 0.5, qy = y + 0.5;
        double best = 1e9;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
          const double ax = pts[i][0], ay = pts[i][1], bx = pts[i + 1][0], by = pts[i + 1][1];
          const double vx = bx - ax, vy = by - ay;
          const double len2 = vx * vx + vy * vy;
          const double t = len2 > 0 ? std::clamp(((qx - ax) * vx + (qy - ay) * vy) / len2, 0.0, 1.0) : 0.0;
          best = std::min(best, std::hypot(qx - ax - t * vx, qy - ay - t * vy));
        }
        blend(x, y, value, opacity * std::clamp(width / 2 - best + 0.5, 0.0, 1.0));
      }
    }
  }

  // y = cy - curve * (1 - (dx/half)^2) shape; positive curve bows upwards in
  // the middle, so a smile uses a negative value.
  void arc(double cx, double cy, double half, double curve, double width, double value, double tilt = 0) {
    std::vector<std::array<double, 2>> pts;
    for (int i = 0; i <= 10; ++i) {
      const double u = -1 + i / 5.0;
      pts.push_back({cx + u * half, cy - curve * (1 - u * u) + tilt * u});
    }
    stroke(pts, width, value);
  }
};

struct Tone {
  double mean, spread;
};

// Base skin tone and feature geometry per class; ranges overlap once lighting
// varies.
constexpr std::array<Tone, kNumEthnicities> kSkin{{{182, 14}, {78, 14}, {160, 14}, {118, 14}, {142, 16}}};

}  // namespace

int sample_fer_code(Rng& rng) {
  static constexpr std::array<double, 7> kCounts{4953, 547, 5121, 8989, 6077, 4002, 6198};
  double total = 0;
  for (double c : kCounts) total += c;
  double u = rng.uniform() * total;
  for (int i = 0; i < 7; ++i) {
    if ((u -= kCounts[static_cast<std::size_t>(i)]) < 0) return i;
  }
  return 6;
}

int sample_age(Rng& rng) {
  const double u = rng.uniform();
  double a;
  if (u < 0.12) a = rng.uniform(0, 13);
  else if (u < 0.30) a = rng.uniform(13, 25);
  else if (u < 0.72) a = rng.uniform(25, 45);
  else a = 45 - 18 * std::log(1 - rng.uniform() * 0.97);
  return std::clamp(static_cast<int>(a), kMinAge, kMaxAge);
}

GrayImage render_face(const FaceParams& p, Rng& rng) {
  if (p.fer_code < 0 || p.fer_code > 6) throw RangeError("FER code outside 0-6");
  if (p.age < kMinAge || p.age > kMaxAge) throw RangeError("age outside [0, 116]");
  const auto eth = static_cast<std::size_t>(p.ethnicity);
  Canvas c;

  // Background with a random gradient.
  const double bg = rng.uniform(25, 225), gx = rng.uniform(-1.2, 1.2), gy = rng.uniform(-1.2, 1.2);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) c.at(x, y) = bg + gx * (x - 24) + gy * (y - 24);
  }

  const double light = rng.uniform(0.8, 1.15);
  const double skin = std::clamp(rng.normal(kSkin[eth].mean, kSkin[eth].spread) * light, 20.0, 240.0);
  const double cx = 24 + rng.uniform(-2, 2), cy = 25 + rng.uniform(-2, 2);
  const double s = rng.uniform(0.92, 1.08);

  // Youth: rounder head, lower and larger eyes.
  const double grown = std::clamp(p.age / 18.0, 0.0, 1.0);
  const double face_rx = (16.0 + 0.5 * (1 - grown)) * s, face_ry = (17.5 + 3.0 * grown) * s;

  // Hair: dark, greying from 40, thinning for infants.
  const double grey = std::clamp((p.age - 40) / 40.0 + rng.normal(0, 0.12), 0.0, 1.0);
  const double hair_base = p.ethnicity == Ethnicity::White ? rng.uniform(50, 150) : rng.uniform(20, 60);
  const double hair = (hair_base + (215 - hair_base) * grey) * light;
  const double hair_amount = p.age < 2 ? 0.35 : 1.0;
  c.fill_ellipse(cx, cy - 5 * s, face_rx + 2.5 * s, face_ry, hair, hair_amount);
  if (p.ethnicity == Ethnicity::Black) {
    for (int i = 0; i < 40; ++i) {
      c.fill_ellipse(cx + rng.uniform(-16, 16) * s, cy - face_ry + rng.uniform(-1, 6) * s, 1.2, 1.2, hair * 0.6);
    }
  }
  c.fill_ellipse(cx, cy + 1, face_rx, face_ry, skin);

  // Texture cue for the "others" class: faint mottling.
  if (p.ethnicity == Ethnicity::Others) {
    for (int i = 0; i < 18; ++i) {
      c.fill_ellipse(cx + rng.uniform(-10, 10) * s, cy + rng.uniform(-4, 12) * s, 1.0, 1.0, skin * 0.82, 0.8);
    }
  }

  // Eyes.
  const double eye_y = cy + (3.5 - 6.0 * grown) * s;
  const double eye_dx = 6.5 * s;
  double eye_rx = (3.9 - 0.8 * grown) * s;
  double eye_ry = eye_rx * (p.ethnicity == Ethnicity::Asian ? 0.45 : 0.75);
  if (p.fer_code == 2 || p.fer_code == 5) eye_ry *= 1.35;  // fear, surprise: wide
  if (p.fer_code == 3) eye_ry *= 0.8;                      // happy: squint
  const double sclera = std::min(250.0, skin + 50);
  for (double side : {-1.0, 1.0}) {
    c.fill_ellipse(cx + side * eye_dx, eye_y, eye_rx, eye_ry, sclera);
    c.fill_ellipse(cx + side * eye_dx, eye_y, eye_rx * 0.5, std::min(eye_ry, eye_rx * 0.5), 25 * light);
  }

  // Brows: slant encodes expression (inner end down for anger, up for sadness).
  double slant = rng.normal(0, 0.35), lift = 0;
  switch (p.fer_code) {
    case 0: slant = rng.uniform(1.4, 2.6); break;
    case 1: slant = rng.uniform(0.6, 1.4); break;
    case 2: slant = rng.uniform(-2.0, -0.8); lift = 1.5; break;
    case 4: slant = rng.uniform(-2.4, -1.2); break;
    case 5: lift = rng.uniform(2.0, 3.0); break;
    default: break;
  }
  const double brow_w = (p.ethnicity == Ethnicity::Indian ? 2.2 : 1.5) * s;
  const double brow = std::max(10.0, std::min(hair, skin) * 0.45);
  const double brow_y = eye_y - (4.5 + lift) * s;
  for (double side : {-1.0, 1.0}) {
    const double inner = cx + side * 3.0 * s, outer = cx + side * 10.0 * s;
    c.stroke({{inner, brow_y + slant * 0.8}, {outer, brow_y - slant * 0.4}}, brow_w, brow);
  }

  // Nose.
  c.stroke({{cx, eye_y + 2 * s}, {cx - 1.2 * s, eye_y + 8 * s}, {cx + 1.2 * s, eye_y + 8.5 * s}}, 1.0, skin * 0.75);

  // Mouth: curvature encodes expression.
  const double mouth_y = cy + (10.5 + 1.0 * grown) * s;
  const double lips = std::max(15.0, skin * 0.55);
  const double half = rng.uniform(5.0, 6.5) * s;
  switch (p.fer_code) {
    case 3: {  // happy
      const double bend = rng.uniform(-3.2, -1.8) * s;
      if (rng.uniform() < 0.5) {
        c.fill_ellipse(cx, mouth_y + 0.8 * s, half * 0.85, 2.2 * s, std::min(245.0, skin + 60));
      }
      c.arc(cx, mouth_y, half, bend, 1.5, lips);
      break;
    }
    case 4: c.arc(cx, mouth_y, half * 0.9, rng.uniform(1.4, 2.6) * s, 1.4, lips); break;  // sad
    case 0: c.arc(cx, mouth_y, half * 0.8, rng.uniform(0.2, 1.0) * s, 2.2, lips * 0.8); break;  // angry
    case 6: c.arc(cx, mouth_y, half, rng.uniform(-0.4, 0.4) * s, 1.3, lips); break;  // neutral
    case 5: c.fill_ellipse(cx, mouth_y, 2.6 * s, 3.4 * s, 25 * light); break;  // surprise
    case 2: c.fill_ellipse(cx, mouth_y, 3.8 * s, 1.8 * s, 30 * light); break;  // fear
    case 1: c.arc(cx, mouth_y, half * 0.9, 0.8 * s, 1.8, lips, rng.uniform(1.2, 2.2)); break;  // disgust
    default: break;
  }

  // Wrinkles from the mid thirties on.
  const double lines = std::clamp((p.age - 33) / 14.0, 0.0, 5.0);
  const double wrinkle = skin * 0.68;
  for (int i = 0; i < static_cast<int>(lines); ++i) {
    const double y = brow_y - (3.0 + 1.8 * i) * s;
    c.arc(cx, y, 6.5 * s, rng.uniform(-0.4, 0.4), 0.9, wrinkle);
  }
  if (p.age > 50) {
    const double depth = std::clamp((p.age - 50) / 30.0, 0.0, 1.0);
    for (double side : {-1.0, 1.0}) {
      c.stroke({{cx + side * 3.5 * s, eye_y + 7 * s}, {cx + side * 7.5 * s, mouth_y + 1.5 * s}}, 1.0,
               skin * (1 - 0.35 * depth));
    }
  }

  const double sigma = rng.uniform(3, 9);
  GrayImage out(kSize, kSize);
  for (int y = 0; y < kSize; ++y) {
    for (int x = 0; x < kSize; ++x) {
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(c.at(x, y) + rng.normal(0, sigma)), 0L, 255L));
    }
  }
  return out;
}

namespace {

std::string pixel_string(const GrayImage& g) {
  std::string s;
  s.reserve(g.pixels.size() * 4);
  for (std::size_t i = 0; i < g.pixels.size(); ++i) {
    if (i) s += ' ';
    s += std::to_string(g.pixels[i]);
  }
  return s;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_fer_csv(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed) {
  auto out = open_out(path);
  out << "emotion,pixels,Usage\n";
  for (std::size_t i = 0; i < rows; ++i) {
    Rng rng(mix_seed(seed, i));
    FaceParams p;
    p.fer_code = sample_fer_code(rng);
    p.age = std::clamp(sample_age(rng), 8, 70);
    p.ethnicity = static_cast<Ethnicity>(rng.below(kNumEthnicities));
    const double u = rng.uniform();
    const char* usage = u < 0.8 ? "Training" : u < 0.9 ? "PublicTest" : "PrivateTest";
    out << p.fer_code << ',' << pixel_string(render_face(p, rng)) << ',' << usage << '\n';
  }
}

void write_age_csv(const std::filesystem::path& path, std::size_t rows, std::uint64_t seed) {
  auto out = open_out(path);
  out << "age,ethnicity,gender,img_name,pixels\n";
  for (std::size_t i = 0; i < rows; ++i) {
    Rng rng(mix_seed(seed, i));
    FaceParams p;
    p.age = sample_age(rng);
    p.ethnicity = static_cast<Ethnicity>(rng.below(kNumEthnicities));
    // Mostly neutral or happy, as in posed portrait collections.
    p.fer_code = rng.uniform() < 0.6 ? 6 : 3;
    const int gender = static_cast<int>(rng.below(2));
    out << p.age << ',' << static_cast<int>(p.ethnicity) << ',' << gender << ",synthetic_" << i << ".jpg,\""
        << pixel_string(render_face(p, rng)) << "\"\n";
  }
}

}  // namespace mrs::synth
