#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "rowssl/data.hpp"
#include "rowssl/errors.hpp"

using namespace rowssl;

namespace {

// Spearman correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

EmbeddingDataset pool(int classes, std::size_t per_class, std::uint64_t seed = 1) {
  BlobSpec spec;
  spec.num_classes = classes;
  spec.dim = 4;
  spec.per_class = per_class;
  spec.seed = seed;
  return generate_blobs(spec);
}

}  // namespace

TEST(Blobs, DeterministicAndBalanced) {
  BlobSpec spec;
  spec.per_class = 20;
  spec.seed = 3;
  const EmbeddingDataset a = generate_blobs(spec);
  EXPECT_EQ(a, generate_blobs(spec));
  EXPECT_EQ(a.size(), 160u);
  for (auto c : a.class_counts()) EXPECT_EQ(c, 20u);
  spec.seed = 4;
  EXPECT_NE(a, generate_blobs(spec));
}

TEST(Blobs, CentersLieOnTheSphere) {
  BlobSpec spec;
  spec.separation = 7.5;
  const Matrix centers = blob_centers(spec);
  for (std::size_t c = 0; c < centers.rows(); ++c) EXPECT_NEAR(norm(centers.row(c)), 7.5, 1e-12);
}

TEST(Blobs, TinyNoiseCollapsesOntoCenters) {
  BlobSpec spec;
  spec.stddev = 1e-12;
  spec.per_class = 5;
  const Matrix centers = blob_centers(spec);
  for (const auto& s : generate_blobs(spec).samples)
    for (std::size_t j = 0; j < spec.dim; ++j) EXPECT_NEAR(s.x[j], centers(static_cast<std::size_t>(s.label), j), 1e-9);
}

TEST(Blobs, TwoSeparatedClassesAreRecoveredByKMeans) {
  BlobSpec spec;
  spec.num_classes = 2;
  spec.separation = 10.0;
  spec.stddev = 0.1;
  spec.per_class = 50;
  const EmbeddingDataset ds = generate_blobs(spec);
  Matrix pts;
  for (const auto& s : ds.samples) pts.append_row(s.x);
  const KMeansResult km = kmeans(pts, 2, 0);
  // Brute force: every sample's nearest true center must agree with its cluster.
  const Matrix centers = blob_centers(spec);
  std::set<std::pair<std::size_t, int>> pairs;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int nearest =
        squared_distance(ds.samples[i].x, centers.row(0)) < squared_distance(ds.samples[i].x, centers.row(1)) ? 0 : 1;
    EXPECT_EQ(nearest, ds.samples[i].label);
    pairs.insert({km.assignments[i], ds.samples[i].label});
  }
  EXPECT_EQ(pairs.size(), 2u);
}

TEST(Profile, ExponentialCounts) {
  EXPECT_EQ(long_tail_profile(100, 100.0, 3), (std::vector<std::size_t>{100, 10, 1}));
  EXPECT_EQ(long_tail_profile(50, 1.0, 4), (std::vector<std::size_t>{50, 50, 50, 50}));
  // 200 * 10^(-1/7) = 143.95..., 200 * 10^(-6/7) = 27.78...
  const auto p = long_tail_profile(200, 10.0, 8);
  EXPECT_EQ(p.front(), 200u);
  EXPECT_EQ(p[1], 144u);
  EXPECT_EQ(p[6], 28u);
  EXPECT_EQ(p.back(), 20u);
  EXPECT_EQ(long_tail_profile(3, 1000.0, 3).back(), 1u);
}

TEST(Split, CountsFollowTheProfile) {
  SplitSpec spec;
  spec.num_old = 2;
  spec.num_new = 1;
  spec.n_max = 100;
  spec.gamma_l = 100.0;
  spec.gamma_u = 100.0;
  const SplitCounts counts = split_counts(spec);
  EXPECT_EQ(counts.unlabeled, (std::vector<std::size_t>{100, 10, 1}));
  EXPECT_EQ(counts.labeled, (std::vector<std::size_t>{100, 1}));

  const SplitResult split = make_long_tailed_split(pool(3, 300), spec);
  EXPECT_EQ(split.unlabeled.class_counts(), (std::vector<std::size_t>{100, 10, 1}));
  EXPECT_EQ(split.labeled.class_counts(), (std::vector<std::size_t>{100, 1, 0}));
}

TEST(Split, LabeledRatioMatchesGamma) {
  SplitSpec spec;
  spec.num_old = 5;
  spec.num_new = 3;
  spec.n_max = 64;
  spec.gamma_l = 16.0;
  spec.gamma_u = 4.0;
  const SplitCounts counts = split_counts(spec);
  EXPECT_EQ(counts.labeled, (std::vector<std::size_t>{64, 32, 16, 8, 4}));
  const auto [lo, hi] = std::minmax_element(counts.labeled.begin(), counts.labeled.end());
  EXPECT_DOUBLE_EQ(static_cast<double>(*hi) / static_cast<double>(*lo), 16.0);
}

TEST(Split, LabeledSetHoldsOnlyKnownClassesAndUnlabeledCoversAll) {
  SplitSpec spec;
  spec.seed = 9;
  const SplitResult split = make_long_tailed_split(pool(8, 500), spec);
  for (const auto& s : split.labeled.samples) {
    EXPECT_TRUE(s.labeled);
    EXPECT_LT(s.label, spec.num_old);
  }
  for (auto c : split.unlabeled.class_counts()) EXPECT_GE(c, 1u);
  std::set<std::int64_t> ids;
  for (const auto* part : {&split.labeled, &split.unlabeled})
    for (const auto& s : part->samples) EXPECT_TRUE(ids.insert(s.id).second) << "id drawn twice: " << s.id;
  EXPECT_NO_THROW(merge(split.labeled, split.unlabeled).validate());
}

TEST(Split, MnarReversesTheUnlabeledOrdering) {
  SplitSpec spec;
  spec.num_old = 2;
  spec.num_new = 2;
  spec.n_max = 100;
  spec.gamma_l = spec.gamma_u = 100.0;
  spec.mode = MismatchMode::MNAR;
  const SplitCounts counts = split_counts(spec);
  EXPECT_EQ(counts.labeled[0], 100u);
  EXPECT_EQ(counts.unlabeled[0], *std::min_element(counts.unlabeled.begin(), counts.unlabeled.end()));

  spec.num_old = 4;
  spec.num_new = 4;
  const SplitCounts wide = split_counts(spec);
  std::vector<double> lab(wide.labeled.begin(), wide.labeled.end());
  std::vector<double> unl(wide.unlabeled.begin(), wide.unlabeled.begin() + 4);
  EXPECT_DOUBLE_EQ(spearman(lab, unl), -1.0);
  spec.mode = MismatchMode::MCAR;
  const SplitCounts matched = split_counts(spec);
  std::vector<double> unl_mcar(matched.unlabeled.begin(), matched.unlabeled.begin() + 4);
  EXPECT_DOUBLE_EQ(spearman(lab, unl_mcar), 1.0);
}

TEST(Split, DeterministicPerSeed) {
  SplitSpec spec;
  spec.seed = 5;
  const EmbeddingDataset p = pool(8, 500);
  const SplitResult a = make_long_tailed_split(p, spec);
  const SplitResult b = make_long_tailed_split(p, spec);
  EXPECT_EQ(a.labeled, b.labeled);
  EXPECT_EQ(a.unlabeled, b.unlabeled);
  spec.seed = 6;
  EXPECT_NE(make_long_tailed_split(p, spec).unlabeled, a.unlabeled);
}

TEST(Split, CapacityErrorNamesTheClass) {
  SplitSpec spec;
  spec.n_max = 100;
  try {
    make_long_tailed_split(pool(8, 150), spec);
    FAIL() << "expected a capacity error";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("class 0"), std::string::npos) << e.what();
  }
}

TEST(Split, RejectsInvalidSpecs) {
  SplitSpec spec;
  spec.gamma_l = 0.5;
  EXPECT_THROW(spec.validate(), InvalidArgument);
  spec = {};
  spec.labeled_fraction = 1.0;
  EXPECT_THROW(spec.validate(), InvalidArgument);
}

TEST(Holdout, BalancedAndDisjoint) {
  const EmbeddingDataset p = pool(4, 60);
  std::vector<std::int64_t> used;
  for (const auto& s : p.samples)
    if (s.id % 3 == 0) used.push_back(s.id);
  const EmbeddingDataset test = balanced_holdout(p, used, 30, 2, 2, 1);
  for (auto c : test.class_counts()) EXPECT_EQ(c, 30u);
  for (const auto& s : test.samples) EXPECT_NE(s.id % 3, 0);
  EXPECT_THROW(balanced_holdout(p, used, 41, 2, 2, 1), CapacityError);
}

TEST(Views, IdentityWithoutNoiseOrDropout) {
  const Vec x{1.0, -2.0, 3.5};
  const ViewPair v = two_views(x, {0.0, 0.0}, 7, 3, 11);
  EXPECT_EQ(v.first, x);
  EXPECT_EQ(v.second, x);
}

TEST(Views, DeterministicAndIndependent) {
  const Vec x(16, 1.0);
  const AugmentOptions opt{0.5, 0.25};
  const ViewPair a = two_views(x, opt, 1, 2, 3);
  const ViewPair b = two_views(x, opt, 1, 2, 3);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first, a.second);
  EXPECT_NE(two_views(x, opt, 1, 3, 3).first, a.first);
  EXPECT_EQ(std::count(a.first.begin(), a.first.end(), 0.0), 4);
}

TEST(Views, PureNoiseHasUnitSpreadAndZeroMean) {
  const Vec zero(4, 0.0);
  double sum = 0.0, sum_sq = 0.0;
  std::size_t n = 0;
  for (std::int64_t id = 0; id < 2500; ++id) {
    const ViewPair v = two_views(zero, {1.0, 0.0}, id, 0, 17);
    for (const Vec* view : {&v.first, &v.second})
      for (double e : *view) {
        sum += e;
        sum_sq += e * e;
        ++n;
      }
  }
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(sum_sq / static_cast<double>(n) - mean * mean);
  EXPECT_NEAR(sd, 1.0, 0.1);
  EXPECT_LT(std::abs(mean), 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Batches, PartitionEveryEpoch) {
  const auto batches = iterate_batches(103, 10, 4, 2);
  EXPECT_EQ(batches.size(), 11u);
  EXPECT_EQ(batches.back().size(), 3u);
  std::vector<std::size_t> all;
  for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expected(103);
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(all, expected);
  EXPECT_EQ(batches, iterate_batches(103, 10, 4, 2));
  EXPECT_NE(batches, iterate_batches(103, 10, 4, 3));
  EXPECT_EQ(iterate_batches(5, 64, 1, 0).size(), 1u);
}

TEST(DatasetFile, RoundTripIsExact) {
  SplitSpec spec;
  const SplitResult split = make_long_tailed_split(pool(8, 500), spec);
  const EmbeddingDataset ds = merge(split.labeled, split.unlabeled);
  EXPECT_EQ(parse_dataset(format_dataset(ds)), ds);

  const auto path = std::filesystem::temp_directory_path() / "rowssl_test_roundtrip.emb";
  save_dataset(ds, path);
  EXPECT_EQ(load_dataset(path), ds);
  std::filesystem::remove(path);
}

TEST(DatasetFile, ErrorsCarryLineNumbers) {
  auto line_of = [](const std::string& text) {
    try {
      parse_dataset(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  EXPECT_EQ(line_of("ROWSSL-EMB 2\n1 2 1 0\n0 0 0 1 2\n"), 1u);
  EXPECT_EQ(line_of("ROWSSL-EMB 1\n2 2 1 0\n0 0 0 1 2\n1 0 0 1\n"), 4u);
  EXPECT_EQ(line_of("ROWSSL-EMB 1\n1 2 1 0\n0 0 0 nan 2\n"), 3u);
  EXPECT_EQ(line_of("ROWSSL-EMB 1\n1 2 1 1\n0 1 1 0.5 2\n"), 3u);  // labeled novel sample
  EXPECT_EQ(line_of("ROWSSL-EMB 1\n2 1 1 0\n4 0 0 1\n4 0 0 2\n"), 4u);  // duplicate id
  EXPECT_EQ(line_of("ROWSSL-EMB 1\n1 1 1 0\n0 0 0 1\nextra\n"), 4u);
}
