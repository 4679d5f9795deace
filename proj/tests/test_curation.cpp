#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <set>

#include "spbs/curation.hpp"
#include "spbs/fixture.hpp"

using namespace spbs;
namespace fs = std::filesystem;

namespace {

ImageEmbeddingSet make_set(const std::string& synset_id, const Eigen::MatrixXd& points) {
  ImageEmbeddingSet set;
  set.synset_id = synset_id;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    set.ids.push_back(synset_id + "_img" + std::to_string(i));
    set.embeddings.push_back(points.row(i).transpose());
    set.provenance.push_back(ImageProvenance::Corpus);
  }
  return set;
}

ImageEmbeddingSet planted_set(std::uint64_t seed, FixtureOutput* fixture_out = nullptr,
                              std::set<std::string>* planted = nullptr) {
  FixtureParams params;
  params.seed = seed;
  params.synsets = 1;
  params.sememes = 4;
  params.images_per_synset = 44;
  params.outlier_fraction = 4.0 / 44.0;
  params.external_fraction = 0.0;
  FixtureOutput fixture = generate_fixture(params);
  const Synset& synset = fixture.corpus.synsets[0];
  StoreEmbeddingProvider provider(&fixture.images);
  ImageEmbeddingSet set = embed_images(synset.id, synset.images, provider).set;
  if (planted != nullptr)
    planted->insert(fixture.planted_outliers[0].second.begin(),
                    fixture.planted_outliers[0].second.end());
  if (fixture_out != nullptr) *fixture_out = std::move(fixture);
  return set;
}

}  // namespace

TEST_CASE("sets below the minimum size pass through unchanged") {
  Rng rng(1);
  Eigen::MatrixXd points(3, 4);
  for (Eigen::Index i = 0; i < points.size(); ++i) points(i / 4, i % 4) = rng.normal();
  ImageEmbeddingSet set = make_set("s", points);
  CurationConfig config;
  config.min_set_size = 5;
  FilterOutcome out = filter_outliers(set, config);
  CHECK(out.set.ids == set.ids);
  CHECK(out.removed.empty());
}

TEST_CASE("all-identical embeddings are left alone with a warning") {
  Eigen::MatrixXd points = Eigen::MatrixXd::Ones(8, 4);
  ImageEmbeddingSet set = make_set("s", points);
  FilterOutcome out = filter_outliers(set, CurationConfig{});
  CHECK(out.set.ids == set.ids);
  CHECK(!out.warning.empty());
}

TEST_CASE("planted far outliers are detected") {
  std::set<std::string> planted;
  ImageEmbeddingSet set = planted_set(7, nullptr, &planted);
  FilterOutcome out = filter_outliers(set, CurationConfig{});
  int hits = 0;
  for (const auto& id : out.removed)
    if (planted.count(id) > 0) ++hits;
  CHECK(hits >= 3);
  // nu bounds the removable fraction
  CHECK(out.removed.size() <= static_cast<std::size_t>(0.1 * 44) + 1);
}

TEST_CASE("filtering respects the nu bound and never invents images") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    int m = 6 + static_cast<int>(rng.below(40));
    Eigen::MatrixXd points(m, 6);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < 6; ++c) points(r, c) = rng.normal(0.0, 1.0 + (r % 3));
    ImageEmbeddingSet set = make_set("s" + std::to_string(trial), points);
    CurationConfig config;
    config.nu = 0.2;
    FilterOutcome out = filter_outliers(set, config);
    CHECK(out.set.size() + out.removed.size() == set.size());
    CHECK(out.set.size() >= 1);
    // Outlier fraction stays at or below nu (plus solver slack of one).
    CHECK(out.removed.size() <= static_cast<std::size_t>(config.nu * m) + 1);
    std::set<std::string> input_ids(set.ids.begin(), set.ids.end());
    for (const auto& id : out.set.ids) CHECK(input_ids.count(id) == 1);
  }
}

TEST_CASE("a second filtering pass stays within the nu drift bound") {
  // Refit on the filtered set can flag a few boundary points again; that
  // drift is inherent to per-call fitting and bounded by nu.
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    ImageEmbeddingSet set = planted_set(seed);
    CurationConfig config;
    FilterOutcome first = filter_outliers(set, config);
    FilterOutcome second = filter_outliers(first.set, config);
    CHECK(second.removed.size() <=
          static_cast<std::size_t>(config.nu * static_cast<double>(first.set.size())) + 1);
  }
}

TEST_CASE("below-minimum and degenerate filtering is idempotent exactly") {
  Eigen::MatrixXd points = Eigen::MatrixXd::Ones(8, 4);
  ImageEmbeddingSet set = make_set("s", points);
  CurationConfig config;
  FilterOutcome once = filter_outliers(set, config);
  FilterOutcome twice = filter_outliers(once.set, config);
  CHECK(once.set.ids == twice.set.ids);
}

TEST_CASE("at least one image survives even when everything looks anomalous") {
  // Two isolated points: decision values tie at the boundary; the guard and
  // the tie rule keep the set nonempty.
  Eigen::MatrixXd points(5, 3);
  points << 0, 0, 0, 10, 0, 0, 0, 10, 0, 0, 0, 10, 5, 5, 5;
  ImageEmbeddingSet set = make_set("s", points);
  CurationConfig config;
  config.nu = 0.9;
  FilterOutcome out = filter_outliers(set, config);
  CHECK(out.set.size() >= 1);
}

TEST_CASE("merging external images respects keys, order and provenance") {
  EmbeddingStore external(3);
  for (int i = 0; i < 3; ++i)
    external.put("key1#" + std::to_string(i), Eigen::VectorXd::Constant(3, i));
  external.put("key2#0", Eigen::VectorXd::Zero(3));

  Eigen::MatrixXd points = Eigen::MatrixXd::Random(5, 3);
  ImageEmbeddingSet set = make_set("syn", points);

  Synset without;
  without.id = "syn";
  CHECK(merge_external_images(set, without, external).ids == set.ids);

  Synset with = without;
  with.external_key = "key1";
  ImageEmbeddingSet merged = merge_external_images(set, with, external);
  CHECK(merged.size() == 8);
  for (std::size_t i = 0; i < 5; ++i) CHECK(merged.provenance[i] == ImageProvenance::Corpus);
  for (std::size_t i = 5; i < 8; ++i) CHECK(merged.provenance[i] == ImageProvenance::External);
  CHECK(merged.ids[5] == "key1#0");

  // Merging twice adds nothing new.
  CHECK(merge_external_images(merged, with, external).size() == 8);
}

TEST_CASE("curation pipeline filters corpus images then adds external ones") {
  FixtureParams params;
  params.seed = 13;
  params.synsets = 12;
  params.sememes = 4;
  params.images_per_synset = 24;
  params.outlier_fraction = 0.125;
  params.external_fraction = 0.5;
  FixtureOutput fixture = generate_fixture(params);

  CurationConfig config;
  CurationResult result = curate_corpus(fixture.corpus, fixture.images, &fixture.external_images,
                                        config);
  REQUIRE(result.curated.size() == fixture.corpus.synsets.size());
  for (std::size_t i = 0; i < result.curated.size(); ++i) {
    const auto& [synset_id, image_ids] = result.curated[i];
    const Synset& synset = fixture.corpus.at(synset_id);
    const CurationRecord& record = result.report[i];
    CHECK(record.kept + record.removed == static_cast<int>(synset.images.size()));
    if (synset.external_key) {
      CHECK(record.added == 3);
      // External ids come after corpus ids and bypass the filter.
      for (int j = 0; j < record.added; ++j) {
        const std::string& id = image_ids[image_ids.size() - 1 - static_cast<std::size_t>(j)];
        CHECK(id.rfind(*synset.external_key + "#", 0) == 0);
      }
    } else {
      CHECK(record.added == 0);
    }
  }

  std::string dir = (fs::temp_directory_path() / "spbs_curation_io").string();
  fs::remove_all(dir);
  fs::create_directories(dir);
  save_curated_sets(result, dir + "/curated.jsonl");
  save_curation_report(result, dir + "/report.tsv");
  auto loaded = load_curated_sets(dir + "/curated.jsonl");
  REQUIRE(loaded.size() == result.curated.size());
  CHECK(loaded[0].second == result.curated[0].second);
  auto report_lines = read_lines(dir + "/report.tsv");
  CHECK(report_lines[0] == "synset\tkept\tremoved\tadded");
  CHECK(report_lines.size() == result.report.size() + 1);
}

TEST_CASE("curation config validation") {
  CurationConfig config;
  config.nu = 0.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.nu = 1.0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.nu = 0.1;
  config.min_set_size = 0;
  CHECK_THROWS_AS(config.validate(), ConfigError);
}
