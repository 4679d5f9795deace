#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "json.hpp"
#include "oracles.hpp"
#include "spbs/ablation.hpp"
#include "spbs/fixture.hpp"

using namespace spbs;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const std::string& name) {
  std::string path = (fs::temp_directory_path() / ("spbs_train_" + name)).string();
  fs::remove_all(path);
  return path;
}

TrainConfig fast_config() {
  TrainConfig config;
  config.seed = 11;
  config.epochs = 5;
  config.batch_size = 16;
  config.encoder_lr = 1e-3;
  config.head_lr = 5e-3;
  config.mcsp = false;
  config.encoder.d_t = 32;
  config.encoder.layers = 1;
  config.encoder.heads = 2;
  config.encoder.d_ff = 64;
  return config;
}

FixtureOutput small_fixture(std::uint64_t seed = 4, int synsets = 150, int sememes = 12,
                            int images = 4) {
  FixtureParams params;
  params.seed = seed;
  params.synsets = synsets;
  params.sememes = sememes;
  params.images_per_synset = images;
  return generate_fixture(params);
}

double valid_map_of(MsgiModel* model, const Corpus& corpus, const InstanceBuilder* builder) {
  Scorer scorer = make_scorer(model, builder);
  EvalConfig config;
  return evaluate(scorer, corpus.split_synsets(corpus.split.valid), config).map;
}

std::uint64_t store_hash(const EmbeddingStore& store) {
  std::string path = temp_path("hash.embs");
  store.save(path);
  return fnv1a64(read_file(path));
}

}  // namespace

TEST_CASE("train config round-trips through the key-value form") {
  TrainConfig config = fast_config();
  config.no_gloss = true;
  config.language_order = {"en", "zh"};
  config.delta = 0.37;
  KeyValueConfig kv = config.to_kv();
  TrainConfig back = TrainConfig::from_kv(kv);
  CHECK(back.encoder_lr == config.encoder_lr);
  CHECK(back.no_gloss == config.no_gloss);
  CHECK(back.language_order == config.language_order);
  CHECK(back.delta == config.delta);
  CHECK(back.hash() == config.hash());

  KeyValueConfig unknown = KeyValueConfig::from_string("nonsense_key = 1\n");
  CHECK_THROWS_AS(TrainConfig::from_kv(unknown), ConfigError);

  KeyValueConfig parsed = KeyValueConfig::from_string("epochs = 3\n# comment\ndelta = 0.5\n");
  CHECK(parsed.get_int("epochs", 0) == 3);
  CHECK(TrainConfig::from_kv(parsed).epochs == 3);

  TrainConfig bad = fast_config();
  bad.encoder_lr = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fast_config();
  bad.epochs = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = fast_config();
  bad.mcsp = true;
  bad.mcsp_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("adam drives a logit toward its target") {
  ad::Tensor z("z", Eigen::MatrixXd::Zero(1, 2));
  Eigen::MatrixXd target(1, 2);
  target << 1.0, 0.0;
  Adam optimizer({{{&z}, 0.1}});
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 100; ++step) {
    optimizer.zero_grad();
    ad::Graph graph;
    auto loss = graph.multilabel_bce(graph.param(&z), target, 2.0);
    graph.backward(loss);
    if (step == 0) first = graph.value(loss)(0, 0);
    last = graph.value(loss)(0, 0);
    optimizer.step();
  }
  CHECK(last < 0.1 * first);
  CHECK(z.value(0, 0) > 2.0);
  CHECK(z.value(0, 1) < -2.0);
}

TEST_CASE("mcsp pretraining loss strictly decreases on the fixture") {
  FixtureOutput fixture = small_fixture(4, 200, 12, 0);
  TrainConfig config = fast_config();
  config.mcsp = true;
  config.mcsp_epochs = 5;
  config.mcsp_rate = 0.3;
  config.encoder.d_t = 64;
  config.encoder.heads = 4;
  config.encoder.layers = 2;
  config.encoder.d_ff = 128;

  auto encoder = make_encoder(fixture.corpus, &fixture.lexicon, config);
  PretrainResult result = pretrain_mcsp(fixture.corpus, fixture.lexicon, encoder.get(), config);
  REQUIRE(result.epoch_losses.size() == 5);
  for (std::size_t i = 1; i < result.epoch_losses.size(); ++i)
    CHECK(result.epoch_losses[i] < result.epoch_losses[i - 1]);
  CHECK(result.instances_used > 0);
}

TEST_CASE("mcsp preconditions") {
  FixtureOutput fixture = small_fixture(5, 40, 6, 0);
  TrainConfig config = fast_config();
  config.mcsp = true;

  auto encoder = make_encoder(fixture.corpus, &fixture.lexicon, config);
  WordSememeLexicon empty;
  CHECK_THROWS_AS(pretrain_mcsp(fixture.corpus, empty, encoder.get(), config), ConfigError);

  // A nonempty lexicon whose words never occur in any gloss is unmaskable.
  WordSememeLexicon unmatched;
  unmatched.add("zzzzyyy", "en", {0});
  CHECK_THROWS_AS(pretrain_mcsp(fixture.corpus, unmatched, encoder.get(), config), ConfigError);

  TrainConfig off = config;
  off.mcsp = false;
  CHECK_THROWS_AS(pretrain_mcsp(fixture.corpus, fixture.lexicon, encoder.get(), off), ConfigError);
}

TEST_CASE("the -MCSP flag skips pre-training entirely") {
  FixtureOutput fixture = small_fixture(6, 60, 8, 0);
  TrainConfig config = fast_config();
  config.epochs = 1;
  config.mcsp = false;
  PipelineResult pipeline = run_training_pipeline(fixture.corpus, &fixture.lexicon, nullptr,
                                                  nullptr, nullptr, config);
  CHECK(!pipeline.pretrain.has_value());
}

TEST_CASE("training beats the frequency-prior baseline on the fixture") {
  FixtureOutput fixture = small_fixture(1, 150, 10, 4);
  TrainConfig config = fast_config();
  config.epochs = 8;

  Eigen::VectorXd prior = frequency_prior_scores(fixture.corpus.inventory);
  Scorer prior_scorer = [&prior](const Synset&) { return prior; };
  EvalConfig eval_config;
  double baseline =
      evaluate(prior_scorer, fixture.corpus.split_synsets(fixture.corpus.split.valid), eval_config)
          .map;

  TrainResult result =
      train_spbs(fixture.corpus, &fixture.images, &fixture.external_images, nullptr, config);
  CHECK(result.manifest.best_valid_map > baseline + 0.1);
  CHECK(result.manifest.epochs.size() == 8);

  // The reported best-epoch metric is reproducible from the saved model.
  InstanceBuilder builder(config, &fixture.images, &fixture.external_images, nullptr);
  double recomputed = valid_map_of(&result.model, fixture.corpus, &builder);
  CHECK(recomputed == doctest::Approx(result.manifest.best_valid_map).epsilon(1e-9));
}

TEST_CASE("image embeddings are frozen through training") {
  FixtureOutput fixture = small_fixture(7, 80, 8, 6);
  std::uint64_t before = store_hash(fixture.images);
  TrainConfig config = fast_config();
  config.epochs = 2;
  train_spbs(fixture.corpus, &fixture.images, &fixture.external_images, nullptr, config);
  CHECK(store_hash(fixture.images) == before);
}

TEST_CASE("freeze_encoder keeps every encoder parameter bit-identical") {
  FixtureOutput fixture = small_fixture(8, 60, 8, 0);
  TrainConfig config = fast_config();
  config.epochs = 2;
  config.freeze_encoder = true;
  auto encoder = make_encoder(fixture.corpus, nullptr, config);
  std::uint64_t before = encoder->parameter_hash();
  TrainResult result =
      train_spbs(fixture.corpus, nullptr, nullptr, nullptr, config, std::move(encoder));
  CHECK(result.model.encoder->parameter_hash() == before);

  // Unfrozen training must move the encoder.
  TrainConfig unfrozen = fast_config();
  unfrozen.epochs = 2;
  auto encoder2 = make_encoder(fixture.corpus, nullptr, unfrozen);
  std::uint64_t before2 = encoder2->parameter_hash();
  TrainResult result2 =
      train_spbs(fixture.corpus, nullptr, nullptr, nullptr, unfrozen, std::move(encoder2));
  CHECK(result2.model.encoder->parameter_hash() != before2);
}

TEST_CASE("identical seeds reproduce identical epoch metrics") {
  FixtureOutput fixture = small_fixture(9, 80, 8, 4);
  TrainConfig config = fast_config();
  config.epochs = 3;
  TrainResult a = train_spbs(fixture.corpus, &fixture.images, nullptr, nullptr, config);
  TrainResult b = train_spbs(fixture.corpus, &fixture.images, nullptr, nullptr, config);
  REQUIRE(a.manifest.epochs.size() == b.manifest.epochs.size());
  for (std::size_t i = 0; i < a.manifest.epochs.size(); ++i) {
    CHECK(a.manifest.epochs[i].train_loss ==
          doctest::Approx(b.manifest.epochs[i].train_loss).epsilon(1e-12));
    CHECK(a.manifest.epochs[i].valid_map ==
          doctest::Approx(b.manifest.epochs[i].valid_map).epsilon(1e-12));
  }

  TrainConfig other = config;
  other.seed = 999;
  TrainResult c = train_spbs(fixture.corpus, &fixture.images, nullptr, nullptr, other);
  bool any_different = false;
  for (std::size_t i = 0; i < a.manifest.epochs.size(); ++i)
    if (a.manifest.epochs[i].train_loss != c.manifest.epochs[i].train_loss) any_different = true;
  CHECK(any_different);
}

TEST_CASE("model checkpoints round-trip and refuse mismatches") {
  FixtureOutput fixture = small_fixture(10, 100, 8, 4);
  TrainConfig config = fast_config();
  config.epochs = 2;
  TrainResult result =
      train_spbs(fixture.corpus, &fixture.images, &fixture.external_images, nullptr, config);

  std::string path = temp_path("model.ckpt");
  save_model(result.model, path);
  MsgiModel loaded = load_model(path);
  check_inventory(loaded, fixture.corpus.inventory);

  InstanceBuilder builder(config, &fixture.images, &fixture.external_images, nullptr);
  int compared = 0;
  for (const auto& synset : fixture.corpus.synsets) {
    Eigen::VectorXd original = result.model.score(builder.sequence(synset),
                                                  builder.image_matrix(synset));
    Eigen::VectorXd restored = loaded.score(builder.sequence(synset),
                                            builder.image_matrix(synset));
    CHECK((original - restored).norm() == 0.0);
    if (++compared == 100) break;
  }

  SUBCASE("truncated checkpoint") {
    std::string blob = read_file(path);
    write_file(path, blob.substr(0, blob.size() - 64));
    CHECK_THROWS_AS(load_model(path), ValidationError);
  }
  SUBCASE("permuted inventory is refused") {
    std::vector<std::string> labels;
    for (const auto& s : fixture.corpus.inventory.sememes()) labels.push_back(s.label);
    std::swap(labels.front(), labels.back());
    SememeInventory permuted = SememeInventory::from_labels(labels);
    CHECK_THROWS_AS(check_inventory(loaded, permuted), ValidationError);
  }
  SUBCASE("manifest serializes as json") {
    std::string json = result.manifest.to_json();
    auto doc = nlohmann::json::parse(json);
    CHECK(doc["epochs"].size() == 2);
    CHECK(doc["best_epoch"].get<int>() >= 1);
  }
}

TEST_CASE("instance builder honors curated sets, ablations and missing ids") {
  FixtureOutput fixture = small_fixture(12, 30, 6, 5);
  TrainConfig config = fast_config();
  const Synset& synset = fixture.corpus.synsets[0];

  InstanceBuilder plain(config, &fixture.images, &fixture.external_images, nullptr);
  CHECK(plain.image_matrix(synset).rows() == 5);

  CuratedMap curated;
  curated[synset.id] = {synset.images[0], synset.images[2], "not-a-real-id"};
  InstanceBuilder with_curated(config, &fixture.images, &fixture.external_images, &curated);
  CHECK(with_curated.image_matrix(synset).rows() == 2);

  TrainConfig no_image = config;
  no_image.no_image = true;
  InstanceBuilder ablated(no_image, &fixture.images, &fixture.external_images, nullptr);
  CHECK(ablated.image_matrix(synset).rows() == 0);

  TrainConfig en_only = config;
  en_only.language_order = {"en"};
  InstanceBuilder en_builder(en_only, nullptr, nullptr, nullptr);
  CHECK(en_builder.sequence(synset).included_languages() == std::vector<std::string>{"en"});
}

TEST_CASE("mcsp pretraining feeds the supervised stage") {
  FixtureOutput fixture = small_fixture(13, 100, 8, 0);
  TrainConfig config = fast_config();
  config.epochs = 3;
  config.mcsp = true;
  config.mcsp_epochs = 2;
  config.mcsp_rate = 0.3;
  PipelineResult pipeline = run_training_pipeline(fixture.corpus, &fixture.lexicon, nullptr,
                                                  nullptr, nullptr, config);
  REQUIRE(pipeline.pretrain.has_value());
  CHECK(pipeline.pretrain->epoch_losses.size() == 2);
  CHECK(pipeline.train.manifest.best_valid_map > 0.0);
}

TEST_CASE("encoder checkpoint handoff refuses a different inventory") {
  FixtureOutput fixture = small_fixture(14, 60, 8, 0);
  TrainConfig config = fast_config();
  config.epochs = 1;
  auto encoder = make_encoder(fixture.corpus, &fixture.lexicon, config);
  std::string path = temp_path("enc_handoff.ckpt");
  encoder->save(path, fixture.corpus.inventory.fingerprint());

  TrainConfig with_checkpoint = config;
  with_checkpoint.encoder_checkpoint = path;
  // Same corpus: loads fine.
  TrainResult ok = train_spbs(fixture.corpus, nullptr, nullptr, nullptr, with_checkpoint);
  CHECK(ok.manifest.epochs.size() == 1);

  FixtureOutput other = small_fixture(14, 60, 9, 0);  // different inventory
  CHECK_THROWS_AS(train_spbs(other.corpus, nullptr, nullptr, nullptr, with_checkpoint),
                  ValidationError);
}

TEST_CASE("parts ablation emits one row per variant with shared protocol") {
  FixtureOutput fixture = small_fixture(15, 80, 8, 4);
  TrainConfig base = fast_config();
  base.epochs = 2;
  EvalConfig eval_config;
  eval_config.grid_step = 0.05;
  auto rows = run_parts_ablation(fixture.corpus, &fixture.lexicon, &fixture.images,
                                 &fixture.external_images, nullptr, base, eval_config);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0].variant == "full");
  CHECK(rows[1].variant == "-Synonym");
  CHECK(rows[2].variant == "-Gloss");
  CHECK(rows[3].variant == "-Image");
  CHECK(rows[4].variant == "-MCSP");
  for (const auto& row : rows) {
    CHECK(row.map >= 0.0);
    CHECK(row.map <= 1.0);
    CHECK(row.test_synsets > 0);
  }
  std::string table = ablation_table_tsv(rows);
  CHECK(table.find("variant\tmap\tf1") == 0);
  CHECK(table.find("-Gloss") != std::string::npos);
}

TEST_CASE("language ablation covers every combination on the covered subset") {
  FixtureOutput fixture = small_fixture(16, 60, 6, 0);
  TrainConfig base = fast_config();
  base.epochs = 1;
  base.language_order = {"en", "fr"};
  EvalConfig eval_config;
  eval_config.grid_step = 0.1;
  auto rows = run_language_ablation(fixture.corpus, &fixture.lexicon, nullptr, nullptr, nullptr,
                                    base, eval_config);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].variant == "en");
  CHECK(rows[1].variant == "fr");
  CHECK(rows[2].variant == "en+fr");
}

TEST_CASE("image ablation runs its four variants on image-bearing synsets") {
  FixtureOutput fixture = small_fixture(17, 60, 6, 6);
  TrainConfig base = fast_config();
  base.epochs = 1;
  EvalConfig eval_config;
  eval_config.grid_step = 0.1;
  CurationConfig curation_config;
  auto rows = run_image_ablation(fixture.corpus, &fixture.lexicon, &fixture.images,
                                 &fixture.external_images, base, eval_config, curation_config);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].variant == "no-images");
  CHECK(rows[1].variant == "all-images");
  CHECK(rows[2].variant == "filtered-images");
  CHECK(rows[3].variant == "filtered+external");
}
