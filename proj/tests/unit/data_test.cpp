#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "pmrnet/data.hpp"
#include "pmrnet/image_io.hpp"
#include "test_support.hpp"

namespace pmrnet {
namespace {

using testing::TempDir;

Sample blank(std::size_t c, std::size_t h, std::size_t w, std::string id = "s") {
  return Sample{std::move(id), Tensor<float>(Shape{1, c, h, w}),
                Tensor<std::uint8_t>(Shape{1, 1, h, w})};
}

std::size_t foreground(const Sample& s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.mask.size(); ++i) n += s.mask[i];
  return n;
}

Sample first_synth(std::size_t hw = 32, std::uint64_t seed = 3) {
  return synth_dataset(1, hw, seed).data.get(0);
}

TEST(Synth, CountsNonemptyMasksAndDeterminism) {
  const auto a = synth_dataset(8, 64, 0);
  const auto b = synth_dataset(8, 64, 0);
  ASSERT_EQ(a.data.size(), 8u);
  EXPECT_EQ(a.data.ids(), b.data.ids());
  for (std::size_t i = 0; i < 8; ++i) {
    const Sample s = a.data.get(i), t = b.data.get(i);
    EXPECT_EQ(s.image.shape(), (Shape{1, 3, 64, 64}));
    EXPECT_EQ(s.image, t.image);
    EXPECT_EQ(s.mask, t.mask);
    EXPECT_GT(foreground(s), 0u);
    for (std::size_t k = 0; k < s.image.size(); ++k) {
      ASSERT_GE(s.image[k], 0.0f);
      ASSERT_LE(s.image[k], 1.0f);
    }
  }
  EXPECT_NE(synth_dataset(1, 64, 1).data.get(0).mask, a.data.get(0).mask);
}

TEST(Synth, MaskIsTheAnalyticInterior) {
  const auto ds = synth_dataset(6, 48, 11);
  for (const auto& id : ds.data.ids()) {
    const Sample s = ds.data.get(id);
    const auto& shapes = ds.shapes.at(id);
    ASSERT_FALSE(shapes.empty());
    for (std::size_t y = 0; y < 48; ++y)
      for (std::size_t x = 0; x < 48; ++x) {
        bool inside = false;
        for (const auto& sh : shapes) inside = inside || synth_inside(sh, y, x);
        ASSERT_EQ(s.mask.at(0, 0, y, x), inside ? 1 : 0) << id << " " << y << "," << x;
      }
  }
}

TEST(Synth, Divisibility) {
  EXPECT_THROW(synth_dataset(2, 60, 0, 64), DivisibilityError);
  EXPECT_NO_THROW(synth_dataset(2, 64, 0, 64));
}

TEST(Split, CountsDeterminismAndSeeds) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("id" + std::to_string(i));
  const auto s = split_ids(ids, 0.8, 7);
  EXPECT_EQ(s.train_ids.size(), 8u);
  EXPECT_EQ(s.test_ids.size(), 2u);
  std::set<std::string> all(s.train_ids.begin(), s.train_ids.end());
  for (const auto& t : s.test_ids) EXPECT_TRUE(all.insert(t).second);
  EXPECT_EQ(all, std::set<std::string>(ids.begin(), ids.end()));
  const auto again = split_ids(ids, 0.8, 7);
  EXPECT_EQ(again.train_ids, s.train_ids);
  EXPECT_EQ(again.test_ids, s.test_ids);

  std::vector<std::string> many;
  for (int i = 0; i < 100; ++i) many.push_back("m" + std::to_string(i));
  EXPECT_NE(split_ids(many, 0.8, 1).train_ids, split_ids(many, 0.8, 2).train_ids);
  EXPECT_THROW(split_ids(ids, 0.0, 1), RangeError);
  EXPECT_THROW(split_ids(ids, 1.0, 1), RangeError);
}

TEST(Split, FileRoundTrip) {
  TempDir dir("split");
  const std::vector<std::string> ids{"b", "a", "c~a3"};
  write_split_file(ids, dir.path() / "train.txt");
  EXPECT_EQ(read_split_file(dir.path() / "train.txt"), ids);
}

TEST(Augment, FlipsAreInvolutionsPreservingCounts) {
  const Sample s = first_synth();
  for (auto f : {&hflip, &vflip, &transpose}) {
    const Sample once = f(s);
    EXPECT_EQ(foreground(once), foreground(s));
    const Sample twice = f(once);
    EXPECT_EQ(twice.image, s.image);
    EXPECT_EQ(twice.mask, s.mask);
  }
  const Sample h = hflip(s);
  EXPECT_EQ(h.image.at(0, 1, 4, 0), s.image.at(0, 1, 4, 31));
  EXPECT_EQ(h.mask.at(0, 0, 9, 2), s.mask.at(0, 0, 9, 29));
  const Sample v = vflip(s);
  EXPECT_EQ(v.image.at(0, 2, 0, 5), s.image.at(0, 2, 31, 5));
  const Sample t = transpose(s);
  EXPECT_EQ(t.image.at(0, 0, 3, 17), s.image.at(0, 0, 17, 3));
  EXPECT_EQ(t.mask.at(0, 0, 3, 17), s.mask.at(0, 0, 17, 3));
}

TEST(Augment, ShiftRelocatesADelta) {
  Sample s = blank(1, 8, 8);
  s.mask.at(0, 0, 1, 2) = 1;
  s.image.at(0, 0, 1, 2) = 0.75f;
  const Sample m = shift_sample(s, 2, 3);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) {
      const bool hit = y == 3 && x == 5;
      EXPECT_EQ(m.mask.at(0, 0, y, x), hit ? 1 : 0);
      EXPECT_EQ(m.image.at(0, 0, y, x), hit ? 0.75f : 0.0f);
    }
  // Content pushed past the border is dropped.
  EXPECT_EQ(foreground(shift_sample(s, 0, -3)), 0u);
}

TEST(Augment, CentroidMovesWithTheShift) {
  Sample s = blank(3, 32, 32);
  for (std::size_t y = 10; y < 16; ++y)
    for (std::size_t x = 8; x < 19; ++x) {
      s.mask.at(0, 0, y, x) = 1;
      for (std::size_t c = 0; c < 3; ++c) s.image.at(0, c, y, x) = 0.1f * (c + 1);
    }
  auto centroid = [](const Sample& v) {
    double cy = 0, cx = 0, n = 0;
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x)
        if (v.mask.at(0, 0, y, x)) { cy += y; cx += x; n += 1; }
    return std::pair{cy / n, cx / n};
  };
  const auto [y0, x0] = centroid(s);
  const Sample m = shift_sample(s, -3, 2);
  const auto [y1, x1] = centroid(m);
  EXPECT_DOUBLE_EQ(y1 - y0, -3.0);
  EXPECT_DOUBLE_EQ(x1 - x0, 2.0);
  EXPECT_EQ(m.image.at(0, 2, 7, 10), s.image.at(0, 2, 10, 8));
}

TEST(Augment, HsvTouchesColourOnly) {
  const Sample s = first_synth();
  const Sample j = hsv_jitter(s, 0.04, 0.85, 1.15);
  EXPECT_EQ(j.mask, s.mask);
  EXPECT_NE(j.image, s.image);
  for (std::size_t i = 0; i < j.image.size(); ++i) {
    ASSERT_GE(j.image[i], 0.0f);
    ASSERT_LE(j.image[i], 1.0f);
  }
  const Sample same = hsv_jitter(s, 0.0, 1.0, 1.0);
  for (std::size_t i = 0; i < s.image.size(); ++i) EXPECT_NEAR(same.image[i], s.image[i], 1e-5);
  Sample gray = match_channels(s, 1);
  const Sample g2 = hsv_jitter(gray, 0.05, 1.2, 0.8);
  EXPECT_EQ(g2.image, gray.image);
}

TEST(Augment, EightVariantsInOrder) {
  const Sample s = first_synth(32, 5);
  AugmentParams p;
  p.hue_shift = -0.03;
  p.sat_scale = 1.1;
  p.val_scale = 0.9;
  p.dy = 2;
  p.dx = -1;
  const auto v = augment_x8(s, p);
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v[0].id, s.id);
  for (std::size_t k = 1; k < 8; ++k) EXPECT_EQ(v[k].id, s.id + "~a" + std::to_string(k));
  EXPECT_EQ(v[0].image, s.image);
  EXPECT_EQ(v[1].image, hflip(s).image);
  EXPECT_EQ(v[2].image, vflip(s).image);
  EXPECT_EQ(v[3].image, transpose(s).image);
  EXPECT_EQ(v[4].image, vflip(hflip(s)).image);
  EXPECT_EQ(v[5].mask, s.mask);
  EXPECT_EQ(v[6].mask, shift_sample(s, 2, -1).mask);
  EXPECT_EQ(v[7].mask, v[6].mask);
  for (const auto& x : v) EXPECT_EQ(x.image.shape(), s.image.shape());

  const auto a = augment_x8(s, 9), b = augment_x8(s, 9);
  for (std::size_t k = 0; k < 8; ++k) EXPECT_EQ(a[k].image, b[k].image);
  const auto ds = augment_dataset(synth_dataset(3, 32, 1).data, 4);
  EXPECT_EQ(ds.size(), 24u);
}

TEST(Augment, DrawnParametersStayInRange) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto p = draw_augment_params({50, 40}, rng);
    EXPECT_LE(std::abs(p.hue_shift), 0.05);
    EXPECT_GE(p.sat_scale, 0.8);
    EXPECT_LE(p.sat_scale, 1.2);
    EXPECT_GE(p.val_scale, 0.8);
    EXPECT_LE(p.val_scale, 1.2);
    EXPECT_LE(std::abs(p.dy), 5);
    EXPECT_LE(std::abs(p.dx), 4);
  }
}

TEST(Resize, IdentityAndBinaryMasks) {
  const Sample s = first_synth(32, 8);
  const Sample same = resize_sample(s, {32, 32});
  EXPECT_EQ(same.image, s.image);
  EXPECT_EQ(same.mask, s.mask);
  const Sample big = resize_sample(s, {48, 80});
  EXPECT_EQ(big.image.shape(), (Shape{1, 3, 48, 80}));
  EXPECT_EQ(big.mask.shape(), (Shape{1, 1, 48, 80}));
  for (std::size_t i = 0; i < big.mask.size(); ++i) ASSERT_LE(big.mask[i], 1);
}

TEST(Resize, LargeDermoscopyFrameToTrainingSize) {
  Sample s = blank(3, 2166, 3188);
  for (std::size_t y = 800; y < 1400; ++y)
    for (std::size_t x = 1200; x < 2000; ++x) s.mask.at(0, 0, y, x) = 1;
  const Sample r = resize_sample(s, {512, 512});
  EXPECT_EQ(r.image.shape(), (Shape{1, 3, 512, 512}));
  EXPECT_EQ(r.mask.shape(), (Shape{1, 1, 512, 512}));
  // The box covers 600/2166 by 800/3188 of the frame.
  const double frac = static_cast<double>(foreground(r)) / (512.0 * 512.0);
  EXPECT_NEAR(frac, (600.0 / 2166) * (800.0 / 3188), 0.01);
}

TEST(Loading, RoundTripAndIdempotent) {
  TempDir dir("load");
  const auto synth = synth_dataset(4, 32, 2);
  write_dataset(synth.data, dir.path());
  const Dataset a = load_dataset(dir.path());
  const Dataset b = load_dataset(dir.path());
  ASSERT_EQ(a.size(), 4u);
  EXPECT_TRUE(a.lazy());
  auto sorted = synth.data.ids();
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(a.ids(), sorted);
  for (const auto& id : a.ids()) {
    const Sample x = a.get(id), y = b.get(id), orig = synth.data.get(id);
    EXPECT_EQ(x.image, y.image);
    EXPECT_EQ(x.mask, y.mask);
    EXPECT_EQ(x.mask, orig.mask);
    for (std::size_t i = 0; i < x.image.size(); ++i)
      ASSERT_NEAR(x.image[i], orig.image[i], 0.5 / 255 + 1e-6);
  }
  const auto sub = a.subset(std::vector<std::string>{sorted[2], sorted[0]});
  EXPECT_EQ(sub.ids(), (std::vector<std::string>{sorted[2], sorted[0]}));
  EXPECT_THROW(a.subset(std::vector<std::string>{"nope"}), Error);
}

TEST(Loading, BinarizesGrayscaleMasks) {
  TempDir dir("bin");
  std::filesystem::create_directories(dir.path() / "images");
  std::filesystem::create_directories(dir.path() / "masks");
  write_png(dir.path() / "images" / "p.png", Image8{1, 4, 1, {10, 20, 30, 40}});
  write_png(dir.path() / "masks" / "p.png", Image8{1, 4, 1, {0, 255, 100, 200}});
  const Sample s = load_dataset(dir.path()).get("p");
  EXPECT_EQ(s.image.shape(), (Shape{1, 1, 1, 4}));
  EXPECT_FLOAT_EQ(s.image[1], 20.0f / 255.0f);
  EXPECT_EQ(s.mask[0], 0);
  EXPECT_EQ(s.mask[1], 1);
  EXPECT_EQ(s.mask[2], 0);
  EXPECT_EQ(s.mask[3], 1);
}

TEST(Loading, Errors) {
  TempDir dir("err");
  std::filesystem::create_directories(dir.path() / "images");
  std::filesystem::create_directories(dir.path() / "masks");
  write_png(dir.path() / "images" / "lonely.png", Image8{2, 2, 1, {0, 0, 0, 0}});
  try {
    load_dataset(dir.path());
    FAIL() << "expected MissingMaskError";
  } catch (const MissingMaskError& e) {
    EXPECT_NE(std::string(e.what()).find("lonely"), std::string::npos);
  }
  std::filesystem::remove(dir.path() / "images" / "lonely.png");
  std::ofstream(dir.path() / "images" / "junk.png") << "not a png";
  std::ofstream(dir.path() / "masks" / "junk.png") << "still not a png";
  EXPECT_THROW(load_dataset(dir.path()).get("junk"), DecodeError);
  EXPECT_THROW(read_png(dir.path() / "images" / "junk.png"), DecodeError);
}

TEST(Batching, StacksAndChecksShapes) {
  const auto ds = synth_dataset(3, 16, 4).data;
  std::vector<Sample> v{ds.get(0), ds.get(1), ds.get(2)};
  const auto b = make_batch(v);
  EXPECT_EQ(b.images.shape(), (Shape{3, 3, 16, 16}));
  EXPECT_EQ(b.masks.shape(), (Shape{3, 1, 16, 16}));
  EXPECT_EQ(b.ids, (std::vector<std::string>{v[0].id, v[1].id, v[2].id}));
  EXPECT_EQ(b.images.at(2, 1, 5, 7), v[2].image.at(0, 1, 5, 7));
  v.push_back(blank(3, 8, 8));
  EXPECT_THROW(make_batch(v), ShapeError);
  std::vector<Sample> mixed{ds.get(0), match_channels(ds.get(1), 1)};
  EXPECT_THROW(make_batch(mixed), ShapeError);
}

TEST(Channels, GrayAndRgbConversions) {
  Sample g = blank(1, 2, 2);
  g.image[0] = 0.25f;
  const Sample rgb = match_channels(g, 3);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(rgb.image.at(0, c, 0, 0), 0.25f);
  EXPECT_NEAR(match_channels(rgb, 1).image[0], 0.25f, 1e-6);
  EXPECT_THROW(match_channels(g, 2), ShapeError);
}

}  // namespace
}  // namespace pmrnet
