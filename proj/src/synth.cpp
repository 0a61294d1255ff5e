#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "classmark/dataset.hpp"

namespace classmark::data {

namespace {

constexpr int kSide = 28;

double clamp01(double v) { return v < 0 ? 0 : (v > 1 ? 1 : v); }

std::uint8_t quantize(double v) {
  const double r = std::round(v);
  return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

struct GarmentParams {
  double cx, cy, scale, fg, noise_sigma, phase, thickness;
};

// Shape mask value in [0,1] for garment class `cls` at (row, col).
double garment_mask(int cls, double row, double col, const GarmentParams& p) {
  const double dx = col - p.cx;
  const double dy = row - p.cy;
  const double s = p.scale;
  const double boxw = 8.5 * s, boxh = 9.5 * s;
  const bool in_box = std::abs(dx) < boxw && std::abs(dy) < boxh;
  switch (cls) {
    case 0:  // solid block
      return (std::abs(dx) < 6.5 * s && std::abs(dy) < 8.0 * s) ? 1.0 : 0.0;
    case 1:  // vertical stripes
      return in_box && std::fmod(col + p.phase, 4.0) < 2.0 ? 1.0 : 0.0;
    case 2:  // horizontal stripes
      return in_box && std::fmod(row + p.phase, 4.0) < 2.0 ? 1.0 : 0.0;
    case 3: {  // filled ellipse
      const double a = 6.5 * s, b = 8.0 * s;
      return (dx * dx) / (a * a) + (dy * dy) / (b * b) < 1.0 ? 1.0 : 0.0;
    }
    case 4:  // diagonal stripes
      return in_box && std::fmod(col + row + p.phase, 5.0) < 2.5 ? 1.0 : 0.0;
    case 5: {  // filled triangle, apex up
      const double b = 8.5 * s;
      if (dy < -b || dy > b) return 0.0;
      const double half = 7.5 * s * (dy + b) / (2 * b);
      return std::abs(dx) < half ? 1.0 : 0.0;
    }
    case 6: {  // checkerboard
      if (!in_box) return 0.0;
      const int bx = int(std::floor((col + p.phase) / 4.0));
      const int by = int(std::floor((row + p.phase) / 4.0));
      return ((bx + by) & 1) == 0 ? 1.0 : 0.0;
    }
    case 7: {  // X cross
      if (!in_box) return 0.0;
      const double t = p.thickness * 1.6;
      const double d1 = std::abs(dx - dy) / std::sqrt(2.0);
      const double d2 = std::abs(dx + dy) / std::sqrt(2.0);
      return (d1 < t || d2 < t) ? 1.0 : 0.0;
    }
    case 8: {  // hollow frame
      const double a = 7.5 * s, b = 8.5 * s, t = p.thickness + 1.0;
      const bool outer = std::abs(dx) < a && std::abs(dy) < b;
      const bool inner = std::abs(dx) < a - t && std::abs(dy) < b - t;
      return outer && !inner ? 1.0 : 0.0;
    }
    case 9: {  // T shape
      const double a = 7.5 * s, b = 8.5 * s, t = p.thickness + 1.5;
      const bool bar = std::abs(dx) < a && dy > -b && dy < -b + t;
      const bool stem = std::abs(dx) < t * 0.8 && dy >= -b && dy < b;
      return (bar || stem) ? 1.0 : 0.0;
    }
    default:
      return 0.0;
  }
}

RasterImage render_garment(int cls, std::mt19937& rng) {
  std::uniform_real_distribution<double> jitter(-2.2, 2.2);
  std::uniform_real_distribution<double> scale(0.85, 1.12);
  std::uniform_real_distribution<double> fg(140.0, 245.0);
  std::uniform_real_distribution<double> sigma(8.0, 20.0);
  std::uniform_real_distribution<double> phase(0.0, 4.0);
  std::uniform_real_distribution<double> thick(1.4, 2.4);
  GarmentParams p{13.5 + jitter(rng), 13.5 + jitter(rng), scale(rng),
                  fg(rng),            sigma(rng),         phase(rng),
                  thick(rng)};
  std::normal_distribution<double> noise(0.0, p.noise_sigma);

  RasterImage img(kSide, kSide, 1);
  for (int r = 0; r < kSide; ++r)
    for (int c = 0; c < kSide; ++c) {
      const double v = garment_mask(cls, r, c, p) * p.fg + noise(rng);
      img.at(r, c) = quantize(v);
    }
  return img;
}

// Seven-segment layout used for the stroke digits 1..9.
struct Segment {
  double x0, y0, x1, y1;
};

double point_segment_dist(double px, double py, const Segment& s) {
  const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
  const double wx = px - s.x0, wy = py - s.y0;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
  return std::sqrt(dx * dx + dy * dy);
}

RasterImage render_digit(int digit, std::mt19937& rng) {
  std::uniform_real_distribution<double> jx(-1.0, 1.0);
  std::uniform_real_distribution<double> rxd(4.3, 6.0);
  std::uniform_real_distribution<double> ryd(5.2, 6.2);
  std::uniform_real_distribution<double> thick(1.1, 1.7);
  std::uniform_real_distribution<double> tone(0.75, 1.0);

  const double cx = 13.5 + jx(rng), cy = 13.5 + jx(rng);
  const double t = thick(rng);
  const double peak = 255.0 * tone(rng);

  RasterImage img(kSide, kSide, 1);

  // Full intensity inside the stroke, linear falloff over one pixel at the
  // rim, exact zero elsewhere (keeps the border rows black, like scanned
  // digits on a dark field).
  auto stroke_value = [&](double d) { return peak * clamp01(t + 1.0 - d); };

  if (digit == 0) {
    const double rx = rxd(rng), ry = ryd(rng);
    // Euclidean distance to the ellipse outline, via a sampled polyline.
    constexpr int kArcSamples = 64;
    double px[kArcSamples], py[kArcSamples];
    for (int i = 0; i < kArcSamples; ++i) {
      const double ang = 2.0 * M_PI * i / kArcSamples;
      px[i] = cx + rx * std::cos(ang);
      py[i] = cy + ry * std::sin(ang);
    }
    for (int r = 0; r < kSide; ++r)
      for (int c = 0; c < kSide; ++c) {
        double d2 = 1e18;
        for (int i = 0; i < kArcSamples; ++i) {
          const double dx = c - px[i], dy = r - py[i];
          d2 = std::min(d2, dx * dx + dy * dy);
        }
        const double v = stroke_value(std::sqrt(d2));
        if (v > 8) img.at(r, c) = quantize(v);
      }
    return img;
  }

  // Segment endpoints for a digit box of half-width a, half-height b.
  const double a = 4.2, b = 6.5;
  const Segment A{cx - a, cy - b, cx + a, cy - b};
  const Segment B{cx + a, cy - b, cx + a, cy};
  const Segment C{cx + a, cy, cx + a, cy + b};
  const Segment D{cx - a, cy + b, cx + a, cy + b};
  const Segment E{cx - a, cy, cx - a, cy + b};
  const Segment F{cx - a, cy - b, cx - a, cy};
  const Segment G{cx - a, cy, cx + a, cy};
  static const char* kMap[10] = {"",       "BC",    "ABGED", "ABGCD", "FGBC",
                                 "AFGCD",  "AFGEDC", "ABC",  "ABCDEFG", "ABCDFG"};
  std::vector<Segment> segs;
  for (char ch : std::string(kMap[digit])) {
    switch (ch) {
      case 'A': segs.push_back(A); break;
      case 'B': segs.push_back(B); break;
      case 'C': segs.push_back(C); break;
      case 'D': segs.push_back(D); break;
      case 'E': segs.push_back(E); break;
      case 'F': segs.push_back(F); break;
      case 'G': segs.push_back(G); break;
    }
  }
  for (int r = 0; r < kSide; ++r)
    for (int c = 0; c < kSide; ++c) {
      double d = 1e9;
      for (const auto& s : segs)
        d = std::min(d, point_segment_dist(c, r, s));
      const double v = stroke_value(d);
      if (v > 8) img.at(r, c) = quantize(v);
    }
  return img;
}

std::vector<int> class_allocation(int total, const std::vector<int>& base) {
  const long long base_total = std::accumulate(base.begin(), base.end(), 0ll);
  std::vector<int> alloc(base.size());
  std::vector<std::pair<double, int>> frac;
  int assigned = 0;
  for (std::size_t c = 0; c < base.size(); ++c) {
    const double exact = double(total) * base[c] / double(base_total);
    alloc[c] = int(exact);
    assigned += alloc[c];
    frac.push_back({exact - alloc[c], int(c)});
  }
  std::sort(frac.begin(), frac.end(), [](auto& a, auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (int i = 0; i < total - assigned; ++i) alloc[frac[i % 10].second]++;
  return alloc;
}

LabeledDataset make_split(Split split, int count, std::uint32_t seed,
                          const std::vector<int>& base_counts, bool garments,
                          double label_noise,
                          const std::vector<std::string>& names) {
  std::mt19937 rng(seed);
  const auto alloc = garments ? std::vector<int>(10, 0) : class_allocation(count, base_counts);

  LabeledDataset ds;
  ds.split = split;
  ds.class_names = names;
  ds.images.reserve(count);
  ds.labels.reserve(count);

  std::vector<int> order;
  order.reserve(count);
  if (garments) {
    for (int i = 0; i < count; ++i) order.push_back(i % 10);
  } else {
    for (int c = 0; c < 10; ++c)
      for (int i = 0; i < alloc[c]; ++i) order.push_back(c);
  }
  std::shuffle(order.begin(), order.end(), rng);

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, 8);
  for (int cls : order) {
    ds.images.push_back(garments ? render_garment(cls, rng)
                                 : render_digit(cls, rng));
    int label = cls;
    if (label_noise > 0 && unit(rng) < label_noise) {
      const int shift = other(rng);
      label = (cls + 1 + shift) % 10;
    }
    ds.labels.push_back(label);
  }
  return ds;
}

}  // namespace

DatasetBundle synth_garments(const GarmentSynthConfig& cfg) {
  const std::vector<std::string> names = {"solid",   "vstripe", "hstripe",
                                          "ellipse", "dstripe", "triangle",
                                          "checker", "cross",   "frame",
                                          "tee"};
  DatasetBundle b;
  b.train = make_split(Split::Train, cfg.train_count, cfg.seed * 2654435761u + 1,
                       {}, true, cfg.label_noise, names);
  b.test = make_split(Split::Test, cfg.test_count, cfg.seed * 2654435761u + 2,
                      {}, true, cfg.label_noise, names);
  return b;
}

DatasetBundle synth_digits(const DigitSynthConfig& cfg) {
  // Class frequencies of the classic handwritten-digit corpus.
  static const std::vector<int> kTrainCounts = {5923, 6742, 5958, 6131, 5842,
                                                5421, 5918, 6265, 5851, 5949};
  static const std::vector<int> kTestCounts = {980, 1135, 1032, 1010, 982,
                                               892, 958,  1028, 974,  1009};
  const std::vector<std::string> names = {"0", "1", "2", "3", "4",
                                          "5", "6", "7", "8", "9"};
  DatasetBundle b;
  b.train = make_split(Split::Train, cfg.train_count, cfg.seed * 40503u + 11,
                       kTrainCounts, false, 0.0, names);
  b.test = make_split(Split::Test, cfg.test_count, cfg.seed * 40503u + 12,
                      kTestCounts, false, 0.0, names);
  return b;
}

}  // namespace classmark::data
