#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "edna/config.hpp"
#include "edna/data.hpp"

using namespace edna;
namespace fs = std::filesystem;

namespace {

config::ConfigNode gaussian_args(std::int64_t n, std::int64_t d,
                                 std::int64_t classes, double sep,
                                 std::int64_t seed) {
  return config::make_map({
      {"n_samples", config::ConfigNode(n)},
      {"n_features", config::ConfigNode(d)},
      {"n_classes", config::ConfigNode(classes)},
      {"class_sep", config::ConfigNode(sep)},
      {"seed", config::ConfigNode(seed)},
  });
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / ("edna_test_" + name);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

} // namespace

TEST_CASE("synthetic_gaussian blobs: counts and mean separation") {
  const SampleSet set =
      crawl_synthetic_gaussian(gaussian_args(100, 2, 2, 2.0, 42));
  REQUIRE(set.records.size() == 100);
  CHECK(set.feature_dim == 2);
  CHECK(set.class_counts.at("label") == 2);

  // Round-robin assignment gives an exact 50/50 split.
  std::map<std::int64_t, int> counts;
  std::map<std::int64_t, std::vector<double>> sums;
  for (const SampleRecord& r : set.records) {
    const std::int64_t c = r.labels.at("label");
    CHECK((c == 0 || c == 1));
    counts[c] += 1;
    auto& s = sums[c];
    s.resize(2, 0.0);
    s[0] += r.features[0];
    s[1] += r.features[1];
  }
  CHECK(counts[0] == 50);
  CHECK(counts[1] == 50);

  // Empirical class means are ~class_sep apart (sigma/sqrt(50) noise).
  const double dx = sums[1][0] / 50 - sums[0][0] / 50;
  const double dy = sums[1][1] / 50 - sums[0][1] / 50;
  const double separation = std::sqrt(dx * dx + dy * dy);
  CHECK(separation == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("synthetic_gaussian is deterministic in the seed") {
  const SampleSet a = crawl_synthetic_gaussian(gaussian_args(20, 3, 2, 1.0, 7));
  const SampleSet b = crawl_synthetic_gaussian(gaussian_args(20, 3, 2, 1.0, 7));
  const SampleSet c = crawl_synthetic_gaussian(gaussian_args(20, 3, 2, 1.0, 8));
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.records[5].features == b.records[5].features);
  CHECK(a.records[5].features != c.records[5].features);
}

TEST_CASE("synthetic_gaussian argument validation") {
  CHECK_THROWS_AS(crawl_synthetic_gaussian(gaussian_args(10, 2, 1, 1.0, 1)),
                  Error);
  CHECK_THROWS_AS(crawl_synthetic_gaussian(gaussian_args(1, 2, 2, 1.0, 1)),
                  Error);
}

TEST_CASE("csv crawler reads rows in order, with and without headers") {
  TempDir dir("csv");
  const fs::path csv = dir.path / "data.csv";
  {
    std::ofstream f(csv);
    f << "x,y,target\n";
    f << "1.0,2.0,0\n";
    f << "3.0,4.0,1\n";
    f << "5.5,6.5,1\n";
  }
  config::ConfigNode args = config::make_map({
      {"path", config::ConfigNode(csv.string())},
      {"label_column", config::ConfigNode("target")},
      {"label_name", config::ConfigNode("target")},
  });
  const SampleSet set = crawl_csv_file(args);
  REQUIRE(set.records.size() == 3);
  CHECK(set.feature_dim == 2);
  CHECK(set.records[0].features == std::vector<double>{1.0, 2.0});
  CHECK(set.records[2].labels.at("target") == 1);

  // Headerless file: label column by index.
  const fs::path raw = dir.path / "raw.csv";
  {
    std::ofstream f(raw);
    f << "0.5,0\n1.5,1\n";
  }
  config::ConfigNode raw_args = config::make_map({
      {"path", config::ConfigNode(raw.string())},
      {"label_column", config::ConfigNode(std::int64_t(1))},
  });
  const SampleSet raw_set = crawl_csv_file(raw_args);
  CHECK(raw_set.records.size() == 2);
  CHECK(raw_set.feature_dim == 1);
}

TEST_CASE("csv crawler reports malformed rows with their number") {
  TempDir dir("csv_bad");
  const fs::path csv = dir.path / "bad.csv";
  {
    std::ofstream f(csv);
    f << "a,b,label\n1.0,x,0\n";
  }
  config::ConfigNode args =
      config::make_map({{"path", config::ConfigNode(csv.string())}});
  try {
    crawl_csv_file(args);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("row 2") != std::string::npos);
  }
}

TEST_CASE("transform: normalize, scale, identity") {
  SampleRecord rec;
  rec.features = {0.1307};
  rec.labels["label"] = 1;

  TransformSpec norm;
  norm.kind = TransformKind::Normalize;
  norm.mean = {0.1307};
  norm.std = {0.3081};
  const SampleRecord out = transform(rec, norm);
  CHECK(out.features[0] == doctest::Approx(0.0));
  CHECK(out.labels.at("label") == 1); // labels never modified

  TransformSpec identity;
  CHECK(transform(rec, identity).features == rec.features);

  TransformSpec scale;
  scale.kind = TransformKind::Scale;
  scale.factor = 2.0;
  SampleRecord pair;
  pair.features = {1.0, -1.0};
  pair.labels["label"] = 0;
  CHECK(transform(pair, scale).features == std::vector<double>{2.0, -2.0});

  TransformSpec bad;
  bad.kind = TransformKind::Normalize;
  bad.mean = {0.0, 0.0, 0.0};
  bad.std = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(transform(pair, bad), Error); // dimension mismatch
}

TEST_CASE("transform_from_args reads the normalization pair") {
  config::ConfigNode args = config::make_map(
      {{"normalization",
        config::make_list({0.1307, 0.3081, 0.5})}, // third value inert
       {"i_shape", config::make_list({28, 28})}});
  const TransformSpec spec = transform_from_args(args);
  CHECK(spec.kind == TransformKind::Normalize);
  CHECK(spec.mean == std::vector<double>{0.1307});
  CHECK(spec.std == std::vector<double>{0.3081});

  const TransformSpec none =
      transform_from_args(config::ConfigNode::map());
  CHECK(none.kind == TransformKind::Identity);
}

TEST_CASE("batch_iter sizes, order, and determinism") {
  std::vector<SampleRecord> records;
  for (int i = 0; i < 10; ++i) {
    SampleRecord r;
    r.features = {double(i)};
    r.labels["label"] = i % 2;
    records.push_back(r);
  }
  const SampleSet set = build_sample_set(records);

  // No shuffle: original order, sizes [4, 4, 2].
  const auto batches = batch_iter(set, {}, "label", 4, false, 0, 0);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  CHECK(batches[0].features.at(0, 0) == doctest::Approx(0.0));
  CHECK(batches[2].features.at(1, 0) == doctest::Approx(9.0));

  // Same (seed, epoch) twice: identical order.
  const auto s1 = batch_iter(set, {}, "label", 4, true, 11, 3);
  const auto s2 = batch_iter(set, {}, "label", 4, true, 11, 3);
  const auto s3 = batch_iter(set, {}, "label", 4, true, 11, 4);
  CHECK(s1[0].features == s2[0].features);
  bool differs = false;
  for (std::size_t b = 0; b < s1.size() && !differs; ++b) {
    if (!(s1[b].features == s3[b].features)) differs = true;
  }
  CHECK(differs); // different epoch draws a different permutation

  CHECK_THROWS_AS(batch_iter(set, {}, "label", 0, false, 0, 0), Error);
  CHECK_THROWS_AS(batch_iter(set, {}, "missing", 4, false, 0, 0), Error);
}

TEST_CASE("batch_iter preserves the sample multiset under shuffle") {
  std::vector<SampleRecord> records;
  for (int i = 0; i < 23; ++i) {
    SampleRecord r;
    r.features = {double(i), double(i) * 0.5};
    r.labels["label"] = i % 3;
    records.push_back(r);
  }
  const SampleSet set = build_sample_set(records);

  const auto batches = batch_iter(set, {}, "label", 5, true, 77, 1);
  std::multiset<double> seen;
  std::size_t total = 0;
  for (const Batch& b : batches) {
    total += b.size();
    for (std::size_t r = 0; r < b.size(); ++r) {
      seen.insert(b.features.at(r, 0));
    }
  }
  CHECK(total == 23);
  std::multiset<double> expected;
  for (const SampleRecord& r : records) expected.insert(r.features[0]);
  CHECK(seen == expected);
}

TEST_CASE("batch_iter splits datalabels from the primary label") {
  std::vector<SampleRecord> records;
  for (int i = 0; i < 4; ++i) {
    SampleRecord r;
    r.features = {double(i)};
    r.labels["digits"] = i % 2;
    r.labels["parity"] = (i + 1) % 2;
    records.push_back(r);
  }
  const SampleSet set = build_sample_set(records);
  const auto batches = batch_iter(set, {}, "digits", 4, false, 0, 0);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].labels == std::vector<std::int64_t>{0, 1, 0, 1});
  CHECK(batches[0].datalabels.at("parity") ==
        std::vector<std::int64_t>{1, 0, 1, 0});
}

TEST_CASE("poll_stream delivers each file exactly once, in name order") {
  TempDir dir("stream");
  StreamSource src;
  src.directory = dir.path.string();

  CHECK(poll_stream(src).empty()); // empty directory

  auto write_records = [&](const std::string& name, int start, int n) {
    std::ofstream f(dir.path / name);
    for (int i = 0; i < n; ++i) {
      SampleRecord r;
      r.features = {double(start + i)};
      r.labels["label"] = (start + i) % 2;
      f << (start + i) << "\t"
        << config::canonical_flow_text(record_to_node(r)) << "\n";
    }
  };
  write_records("b_second.rec", 5, 2);
  write_records("a_first.rec", 0, 5);

  const auto records = poll_stream(src);
  REQUIRE(records.size() == 7);
  CHECK(records[0].features[0] == doctest::Approx(0.0)); // a_first first
  CHECK(records[5].features[0] == doctest::Approx(5.0));

  CHECK(poll_stream(src).empty()); // second poll: nothing new

  write_records("c_third.rec", 9, 1);
  const auto more = poll_stream(src);
  REQUIRE(more.size() == 1);
  CHECK(more[0].features[0] == doctest::Approx(9.0));
}

TEST_CASE("sample record round-trips through its flow-map form") {
  SampleRecord r;
  r.features = {1.5, -0.25, 3.0};
  r.labels["digits"] = 4;
  r.labels["source"] = 1;
  const SampleRecord back =
      record_from_node(config::parse_flow_text(
          config::canonical_flow_text(record_to_node(r))));
  CHECK(back.features == r.features);
  CHECK(back.labels == r.labels);
}

TEST_CASE("build_sample_set enforces invariants") {
  std::vector<SampleRecord> ragged(2);
  ragged[0].features = {1.0};
  ragged[0].labels["label"] = 0;
  ragged[1].features = {1.0, 2.0};
  ragged[1].labels["label"] = 1;
  CHECK_THROWS_AS(build_sample_set(ragged), Error);

  std::vector<SampleRecord> single_class(2);
  single_class[0].features = {1.0};
  single_class[0].labels["label"] = 0;
  single_class[1].features = {2.0};
  single_class[1].labels["label"] = 0;
  CHECK_THROWS_AS(build_sample_set(single_class), Error);
}
