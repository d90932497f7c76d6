#include "rebox/data.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "rebox/pipeline.hpp"

namespace rebox {
namespace {

namespace fs = std::filesystem;

fs::path temp_file(const char* name) { return fs::temp_directory_path() / name; }

TEST(GenerateScene, DeterministicPerSeed) {
  SceneParams params;
  params.width = 96;
  params.height = 96;
  params.min_size = 12;
  params.max_size = 32;
  const Scene a = generate_scene(params, 5);
  const Scene b = generate_scene(params, 5);
  ASSERT_EQ(a.image.numel(), b.image.numel());
  EXPECT_EQ(std::memcmp(a.image.data(), b.image.data(), a.image.numel() * sizeof(float)), 0);
  ASSERT_EQ(a.objects.size(), b.objects.size());
  for (std::size_t i = 0; i < a.objects.size(); ++i) {
    EXPECT_EQ(a.objects[i].box.x1, b.objects[i].box.x1);
    EXPECT_EQ(a.objects[i].cls, b.objects[i].cls);
  }
  const Scene c = generate_scene(params, 6);
  EXPECT_NE(std::memcmp(a.image.data(), c.image.data(), a.image.numel() * sizeof(float)), 0);
}

TEST(GenerateScene, AuditInvariantsAcrossSeeds) {
  SceneParams params;
  params.width = 160;
  params.height = 160;
  params.min_size = 16;
  params.max_size = 48;
  int total_objects = 0;
  for (std::uint64_t seed = 1; seed <= 150; ++seed) {
    const Scene s = generate_scene(params, seed);
    ASSERT_GE(s.objects.size(), std::size_t(1)) << "seed " << seed;
    ASSERT_LE(s.objects.size(), std::size_t(params.max_objects)) << "seed " << seed;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      const auto& b = s.objects[i].box;
      ASSERT_GE(b.x1, 0.0);
      ASSERT_GE(b.y1, 0.0);
      ASSERT_LE(b.x2, double(params.width));
      ASSERT_LE(b.y2, double(params.height));
      ASSERT_GE(b.width(), std::floor(params.min_size));
      ASSERT_LE(b.width(), params.max_size);
      ASSERT_GE(b.height(), std::floor(params.min_size));
      ASSERT_LE(b.height(), params.max_size);
      for (std::size_t j = i + 1; j < s.objects.size(); ++j)
        ASSERT_LT(iou(b, s.objects[j].box), 0.2) << "seed " << seed;
    }
    for (std::size_t i = 0; i < s.image.numel(); i += 7) {
      ASSERT_GE(s.image[i], 0.0f);
      ASSERT_LE(s.image[i], 1.0f);
    }
    total_objects += int(s.objects.size());
  }
  EXPECT_GT(total_objects, 150 * params.min_objects / 2);
}

TEST(GenerateScene, RejectsBadParams) {
  SceneParams p;
  p.width = 32;
  EXPECT_THROW(generate_scene(p, 1), ConfigError);
  p = SceneParams{};
  p.max_size = p.min_size - 1;
  EXPECT_THROW(generate_scene(p, 1), ConfigError);
  p = SceneParams{};
  p.noise = 0.5;
  EXPECT_THROW(generate_scene(p, 1), ConfigError);
}

TEST(ProposeRegions, DeterministicDedupedAndRecalling) {
  SceneParams params;
  int covered = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const Scene s = generate_scene(params, seed);
    const auto props = propose_regions(s);
    ASSERT_FALSE(props.empty());
    for (std::size_t i = 0; i < props.size(); ++i)
      for (std::size_t j = i + 1; j < props.size(); ++j)
        ASSERT_LE(iou(props[i], props[j]), MstParams{}.dedup_iou + 1e-12);
    for (const auto& obj : s.objects) {
      ++total;
      for (const auto& p : props)
        if (iou(p, obj.box) >= 0.5) {
          ++covered;
          break;
        }
    }
    if (seed == 1) {
      const auto again = propose_regions(s);
      ASSERT_EQ(props.size(), again.size());
      for (std::size_t i = 0; i < props.size(); ++i) EXPECT_EQ(props[i].x1, again[i].x1);
    }
  }
  EXPECT_GE(double(covered) / total, 0.8) << covered << "/" << total;
}

Scene fixture_scene() {
  Scene s;
  s.seed = 42;
  s.image = Tensor({64, 64, 3});
  s.image.fill(0.1f);
  s.objects.push_back({{8, 8, 24, 24}, ShapeClass::rectangle});
  s.objects.push_back({{36, 36, 56, 52}, ShapeClass::ellipse});
  return s;
}

TEST(MinePositives, GroundTruthAlwaysAndProposalsByBestOverlap) {
  const Scene s = fixture_scene();
  const std::vector<BoundingBox> proposals = {
      {10, 8, 26, 24},   // IoU 0.78 with object 0
      {30, 30, 40, 40},  // below 0.5 everywhere
      {34, 34, 58, 54},  // IoU 0.67 with object 1
  };
  const auto samples = mine_positives(s, proposals, 16);
  ASSERT_EQ(samples.size(), std::size_t(4));

  EXPECT_EQ(samples[0].provenance, Provenance::ground_truth);
  EXPECT_EQ(samples[0].gt.x1, 8);
  EXPECT_DOUBLE_EQ(samples[0].target.nx1, -0.5);
  EXPECT_DOUBLE_EQ(samples[0].target.ny1, -0.5);
  EXPECT_DOUBLE_EQ(samples[0].target.nx2, 0.5);
  EXPECT_DOUBLE_EQ(samples[0].target.ny2, 0.5);
  EXPECT_EQ(samples[1].provenance, Provenance::ground_truth);

  EXPECT_EQ(samples[2].provenance, Provenance::mined);
  EXPECT_EQ(samples[2].proposal.x1, 10);
  EXPECT_EQ(samples[2].gt.x1, 8);  // matched to object 0
  EXPECT_EQ(samples[3].provenance, Provenance::mined);
  EXPECT_EQ(samples[3].proposal.x1, 34);
  EXPECT_EQ(samples[3].gt.x1, 36);  // matched to object 1
  EXPECT_EQ(samples[3].patch.extent(0), 16);
}

TEST(TargetTransforms, FlipsAreInvolutionsRotationHasPeriodFour) {
  const NormalizedBox t{-0.41, 0.12, 0.33, 0.5};
  const auto hh = target_flip_h(target_flip_h(t));
  EXPECT_EQ(hh.nx1, t.nx1);
  EXPECT_EQ(hh.ny1, t.ny1);
  EXPECT_EQ(hh.nx2, t.nx2);
  EXPECT_EQ(hh.ny2, t.ny2);
  const auto vv = target_flip_v(target_flip_v(t));
  EXPECT_EQ(vv.nx1, t.nx1);
  EXPECT_EQ(vv.ny2, t.ny2);
  auto r = t;
  for (int i = 0; i < 4; ++i) r = target_rot90(r);
  EXPECT_EQ(r.nx1, t.nx1);
  EXPECT_EQ(r.ny1, t.ny1);
  EXPECT_EQ(r.nx2, t.nx2);
  EXPECT_EQ(r.ny2, t.ny2);

  // Two quarter turns equal the composition of both flips.
  const auto two = target_rot90(target_rot90(t));
  const auto both = target_flip_h(target_flip_v(t));
  EXPECT_EQ(two.nx1, both.nx1);
  EXPECT_EQ(two.ny1, both.ny1);
  EXPECT_EQ(two.nx2, both.nx2);
  EXPECT_EQ(two.ny2, both.ny2);
}

TrainingSample marked_sample() {
  TrainingSample s;
  s.patch = Tensor({4, 4, 3});
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      for (int k = 0; k < 3; ++k) s.patch.at3(r, c, k) = float(r * 4 + c + k * 100);
  s.proposal = {10, 20, 30, 40};
  s.gt = {12, 22, 26, 38};
  s.target = normalize_box(s.gt, s.proposal);
  return s;
}

TEST(RotateSample, QuarterTurnMovesPatchAndBoxesConsistently) {
  const TrainingSample s = marked_sample();
  const TrainingSample r = rotate_sample_90(s);
  EXPECT_EQ(r.provenance, Provenance::rotated);
  // Clockwise turn: input (0, 1) lands at (1, 3).
  EXPECT_EQ(r.patch.at3(1, 3, 0), s.patch.at3(0, 1, 0));
  EXPECT_EQ(r.patch.at3(0, 0, 2), s.patch.at3(3, 0, 2));

  // Proposal (10,20,30,40) is square, so it maps to itself. The target algebra
  // sends normalized (-0.4,-0.4,0.3,0.4) to (-0.4,-0.4,0.4,0.3), which lands
  // the ground truth at (12,22,28,36).
  EXPECT_NEAR(r.proposal.x1, 10, 1e-12);
  EXPECT_NEAR(r.proposal.y2, 40, 1e-12);
  EXPECT_NEAR(r.gt.x1, 12, 1e-9);
  EXPECT_NEAR(r.gt.y1, 22, 1e-9);
  EXPECT_NEAR(r.gt.x2, 28, 1e-9);
  EXPECT_NEAR(r.gt.y2, 36, 1e-9);

  // target always re-measures as normalize_box(gt, proposal).
  const NormalizedBox re = normalize_box(r.gt, r.proposal);
  EXPECT_NEAR(r.target.nx1, re.nx1, 1e-12);
  EXPECT_NEAR(r.target.ny2, re.ny2, 1e-12);

  TrainingSample back = r;
  for (int i = 0; i < 3; ++i) back = rotate_sample_90(back);
  EXPECT_NEAR(back.gt.x1, s.gt.x1, 1e-9);
  EXPECT_NEAR(back.gt.y1, s.gt.y1, 1e-9);
  EXPECT_NEAR(back.gt.x2, s.gt.x2, 1e-9);
  EXPECT_NEAR(back.gt.y2, s.gt.y2, 1e-9);
  EXPECT_EQ(back.patch.at3(2, 1, 0), s.patch.at3(2, 1, 0));
}

TEST(FlipSample, ReflectsAboutTheProposalAxes) {
  const TrainingSample s = marked_sample();
  const TrainingSample h = flip_sample(s, true);
  EXPECT_EQ(h.provenance, Provenance::flipped);
  EXPECT_EQ(h.patch.at3(0, 2, 0), s.patch.at3(0, 1, 0));
  // Proposal center x is 20: gt x-range (12,26) reflects to (14,28).
  EXPECT_NEAR(h.gt.x1, 14, 1e-9);
  EXPECT_NEAR(h.gt.x2, 28, 1e-9);
  EXPECT_NEAR(h.gt.y1, 22, 1e-9);
  EXPECT_NEAR(h.gt.y2, 38, 1e-9);

  const TrainingSample v = flip_sample(s, false);
  EXPECT_EQ(v.patch.at3(3, 1, 0), s.patch.at3(0, 1, 0));
  // Proposal center y is 30: gt y-range (22,38) is symmetric and stays put.
  EXPECT_NEAR(v.gt.y1, 22, 1e-9);
  EXPECT_NEAR(v.gt.y2, 38, 1e-9);
  EXPECT_NEAR(v.gt.x1, 12, 1e-9);

  const TrainingSample hh = flip_sample(h, true);
  EXPECT_NEAR(hh.gt.x1, s.gt.x1, 1e-9);
  EXPECT_EQ(hh.patch.at3(1, 1, 1), s.patch.at3(1, 1, 1));
}

TEST(AugmentSamples, FullPolicyYieldsTwentyFourPerSample) {
  const Scene s = fixture_scene();
  const auto mined = mine_positives(s, {}, 16);
  ASSERT_EQ(mined.size(), std::size_t(2));
  const auto out = augment_samples(s.image, {mined[0]}, AugmentPolicy{}, 16);
  ASSERT_EQ(out.size(), std::size_t(24));
  int by_prov[5] = {};
  for (const auto& sample : out) ++by_prov[int(sample.provenance)];
  EXPECT_EQ(by_prov[int(Provenance::ground_truth)], 1);
  EXPECT_EQ(by_prov[int(Provenance::size_augmented)], 3);
  EXPECT_EQ(by_prov[int(Provenance::rotated)], 12);
  EXPECT_EQ(by_prov[int(Provenance::flipped)], 8);
  for (const auto& sample : out) {
    const NormalizedBox re = normalize_box(sample.gt, sample.proposal);
    ASSERT_NEAR(sample.target.nx1, re.nx1, 1e-9);
    ASSERT_NEAR(sample.target.ny1, re.ny1, 1e-9);
    ASSERT_NEAR(sample.target.nx2, re.nx2, 1e-9);
    ASSERT_NEAR(sample.target.ny2, re.ny2, 1e-9);
  }
}

TEST(AugmentSamples, SizeCopiesGrowTheProposal) {
  const Scene s = fixture_scene();
  const auto mined = mine_positives(s, {}, 16);
  AugmentPolicy policy;
  policy.rotations = false;
  policy.flips = false;
  const auto out = augment_samples(s.image, {mined[0]}, policy, 16);
  ASSERT_EQ(out.size(), std::size_t(4));
  const double base_area = out[0].proposal.area();
  for (std::size_t i = 1; i < 4; ++i) {
    const double expect = (1.0 + policy.sizes[i - 1]);
    EXPECT_NEAR(out[i].proposal.area() / base_area, expect * expect, 1e-9);
    EXPECT_EQ(out[i].gt.x1, out[0].gt.x1);
  }
}

std::vector<TrainingSample> varied_samples(int n) {
  std::vector<TrainingSample> samples;
  Rng rng(77);
  for (int i = 0; i < n; ++i) {
    TrainingSample s;
    s.patch = Tensor({4, 4, 3});
    for (std::size_t j = 0; j < s.patch.numel(); ++j) s.patch[j] = float(rng.uniform());
    s.proposal = {double(i), 1, double(i) + 5, 7};
    s.gt = {double(i) + 1, 2, double(i) + 4, 6};
    s.target = normalize_box(s.gt, s.proposal);
    s.provenance = Provenance(i % 5);
    samples.push_back(std::move(s));
  }
  return samples;
}

TEST(DatasetFile, RoundTripsAllFields) {
  const auto path = temp_file("rebox_data_rt.bin");
  const auto samples = varied_samples(7);
  write_dataset(samples, path.string());
  const auto loaded = read_dataset(path.string());
  ASSERT_EQ(loaded.size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(std::memcmp(loaded[i].patch.data(), samples[i].patch.data(),
                          samples[i].patch.numel() * sizeof(float)),
              0);
    EXPECT_EQ(loaded[i].proposal.x1, samples[i].proposal.x1);
    EXPECT_EQ(loaded[i].gt.y2, samples[i].gt.y2);
    EXPECT_EQ(float(loaded[i].target.nx1), float(samples[i].target.nx1));
    EXPECT_EQ(loaded[i].provenance, samples[i].provenance);
  }
  fs::remove(path);
}

void corrupt_byte(const fs::path& path, std::int64_t offset, char value) {
  std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
  if (offset < 0) {
    f.seekg(0, std::ios::end);
    offset = std::int64_t(f.tellg()) + offset;
  }
  f.seekp(offset);
  f.put(value);
}

TEST(DatasetFile, RejectsCorruption) {
  const auto path = temp_file("rebox_data_bad.bin");
  const auto samples = varied_samples(3);

  write_dataset(samples, path.string());
  corrupt_byte(path, 0, 'X');
  EXPECT_THROW(read_dataset(path.string()), FormatError);

  write_dataset(samples, path.string());
  corrupt_byte(path, 4, 9);
  EXPECT_THROW(read_dataset(path.string()), FormatError);

  write_dataset(samples, path.string());
  corrupt_byte(path, 40, 'x');  // inside the first patch: caught by the checksum
  EXPECT_THROW(read_dataset(path.string()), FormatError);

  write_dataset(samples, path.string());
  corrupt_byte(path, -5, 9);  // provenance tag of the last sample
  EXPECT_THROW(read_dataset(path.string()), FormatError);

  write_dataset(samples, path.string());
  fs::resize_file(path, fs::file_size(path) - 6);
  EXPECT_THROW(read_dataset(path.string()), FormatError);

  fs::remove(path);
}

TEST(SceneFile, RoundTripsAndStreams) {
  SceneParams params;
  params.width = 96;
  params.height = 96;
  params.min_size = 12;
  params.max_size = 32;
  const auto path = temp_file("rebox_scenes_rt.bin");
  SceneWriter w(path.string());
  std::vector<Scene> scenes;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    scenes.push_back(generate_scene(params, seed));
    w.add(scenes.back());
  }
  EXPECT_EQ(w.count(), std::uint64_t(3));
  w.finish();

  SceneReader reader(path.string());
  EXPECT_EQ(reader.count(), std::uint64_t(3));
  Scene s;
  for (int i = 0; i < 3; ++i) {
    ASSERT_TRUE(reader.next(s));
    EXPECT_EQ(s.seed, scenes[std::size_t(i)].seed);
    EXPECT_EQ(std::memcmp(s.image.data(), scenes[std::size_t(i)].image.data(),
                          s.image.numel() * sizeof(float)),
              0);
    ASSERT_EQ(s.objects.size(), scenes[std::size_t(i)].objects.size());
    for (std::size_t j = 0; j < s.objects.size(); ++j) {
      EXPECT_EQ(s.objects[j].box.x2, scenes[std::size_t(i)].objects[j].box.x2);
      EXPECT_EQ(s.objects[j].cls, scenes[std::size_t(i)].objects[j].cls);
    }
  }
  EXPECT_FALSE(reader.next(s));

  const auto all = read_scenes(path.string());
  EXPECT_EQ(all.size(), std::size_t(3));

  corrupt_byte(path, 0, 'Z');
  EXPECT_THROW(SceneReader bad(path.string()), FormatError);
  fs::remove(path);
}

TEST(ToTrainSet, FlattensSamplesAndRejectsMixedShapes) {
  auto samples = varied_samples(3);
  const TrainSet set = to_train_set(samples);
  EXPECT_EQ(set.count(), 3);
  EXPECT_EQ(set.inputs.extent(1), 4);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(set.targets.at2(i, 0), float(samples[std::size_t(i)].target.nx1));
    EXPECT_EQ(set.sizes[std::size_t(i)][0], samples[std::size_t(i)].proposal.width());
    EXPECT_EQ(set.sizes[std::size_t(i)][1], samples[std::size_t(i)].proposal.height());
  }
  EXPECT_EQ(set.inputs[0], samples[0].patch[0]);

  samples[1].patch = Tensor({5, 5, 3});
  EXPECT_THROW(to_train_set(samples), ShapeError);
  EXPECT_THROW(to_train_set({}), Error);
}

TEST(SubsampleToQuota, KeepsAllWhenUnderQuotaElseSelectsDeterministically) {
  const auto samples = varied_samples(10);
  const auto all = subsample_to_quota(samples, 20, 1);
  ASSERT_EQ(all.size(), std::size_t(10));
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i].proposal.x1, double(i));

  const auto four = subsample_to_quota(samples, 4, 1);
  ASSERT_EQ(four.size(), std::size_t(4));
  for (const auto& s : four) {
    EXPECT_GE(s.proposal.x1, 0.0);
    EXPECT_LT(s.proposal.x1, 10.0);
  }
  const auto again = subsample_to_quota(samples, 4, 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(four[i].proposal.x1, again[i].proposal.x1);

  const auto other = subsample_to_quota(samples, 4, 2);
  bool same = true;
  for (std::size_t i = 0; i < 4; ++i) same = same && four[i].proposal.x1 == other[i].proposal.x1;
  EXPECT_FALSE(same);
}

TrainSet indexed_set(int n) {
  TrainSet set;
  set.inputs = Tensor({n, 2, 2, 3});
  set.targets = Tensor({n, 4});
  for (int i = 0; i < n; ++i) set.targets.at2(i, 0) = float(i);
  set.sizes.assign(std::size_t(n), {1, 1});
  return set;
}

TEST(SplitTrainVal, PartitionsRowsExactly) {
  const TrainSet full = indexed_set(10);
  const auto [train, val] = split_train_val(full, 0.3, 1);
  EXPECT_EQ(val.count(), 3);
  EXPECT_EQ(train.count(), 7);
  std::vector<int> seen(10, 0);
  for (int i = 0; i < train.count(); ++i) ++seen[std::size_t(train.targets.at2(i, 0))];
  for (int i = 0; i < val.count(); ++i) ++seen[std::size_t(val.targets.at2(i, 0))];
  for (int i = 0; i < 10; ++i) EXPECT_EQ(seen[std::size_t(i)], 1) << "row " << i;

  const auto [t2, v2] = split_train_val(full, 0.3, 1);
  for (int i = 0; i < val.count(); ++i) EXPECT_EQ(val.targets.at2(i, 0), v2.targets.at2(i, 0));

  const auto [t0, v0] = split_train_val(full, 0.0, 1);
  EXPECT_EQ(v0.count(), 0);
  EXPECT_EQ(t0.count(), 10);
  const auto [t1, v1] = split_train_val(full, 1.0, 1);
  EXPECT_EQ(v1.count(), 9);  // clamped to leave one training row
  EXPECT_EQ(t1.count(), 1);
}

}  // namespace
}  // namespace rebox
