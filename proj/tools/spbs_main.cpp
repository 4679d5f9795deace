#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "spbs/ablation.hpp"
#include "spbs/curation.hpp"
#include "spbs/fixture.hpp"
#include "spbs/plots.hpp"
#include "spbs/training.hpp"

namespace fs = std::filesystem;

namespace {

using namespace spbs;

struct ConfigArgs {
  std::string config_path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs* args) {
  cmd->add_option("--config", args->config_path, "flat key = value config file");
  for (const auto& key : known_config_keys()) {
    cmd->add_option_function<std::string>(
        "--" + key,
        [args, key](const std::string& value) { args->overrides.emplace_back(key, value); },
        "override config key '" + key + "'");
  }
}

KeyValueConfig resolve_config(const ConfigArgs& args) {
  KeyValueConfig kv;
  if (!args.config_path.empty()) kv = KeyValueConfig::from_file(args.config_path);
  for (const auto& [key, value] : args.overrides) kv.set(key, value);
  return kv;
}

struct Assets {
  Corpus corpus;
  std::optional<WordSememeLexicon> lexicon;
  std::optional<EmbeddingStore> images;
  std::optional<EmbeddingStore> external;
};

Assets load_assets(const std::string& dir) {
  Assets assets;
  assets.corpus = load_corpus(dir);
  if (fs::exists(dir + "/lexicon.tsv"))
    assets.lexicon = load_lexicon(dir + "/lexicon.tsv", assets.corpus.inventory);
  if (fs::exists(dir + "/images.embs")) assets.images = EmbeddingStore::load(dir + "/images.embs");
  if (fs::exists(dir + "/external.embs"))
    assets.external = EmbeddingStore::load(dir + "/external.embs");
  return assets;
}

std::optional<CuratedMap> load_curated(const std::string& path) {
  if (path.empty()) return std::nullopt;
  CuratedMap map;
  for (const auto& [id, ids] : load_curated_sets(path)) map[id] = ids;
  return map;
}

TrainConfig scoring_config(const MsgiModel& model) {
  TrainConfig config;
  config.language_order = model.language_order;
  config.no_synonym = model.no_synonym;
  config.no_gloss = model.no_gloss;
  config.no_image = !model.use_images;
  return config;
}

void write_run_config(const std::string& run_dir, const KeyValueConfig& kv) {
  fs::create_directories(run_dir);
  write_file(run_dir + "/config.cfg", kv.serialize());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multilingual synonym/gloss/image sememe prediction pipeline"};
  app.require_subcommand(1);

  // ---- fixture ----
  auto* fixture_cmd = app.add_subcommand("fixture", "generate a deterministic synthetic corpus");
  FixtureParams fixture_params;
  std::string fixture_out = "runs/fixture";
  std::string fixture_langs = "en,fr,zh";
  fixture_cmd->add_option("--out", fixture_out, "output directory");
  fixture_cmd->add_option("--seed", fixture_params.seed, "generator seed");
  fixture_cmd->add_option("--synsets", fixture_params.synsets, "number of synsets");
  fixture_cmd->add_option("--sememes", fixture_params.sememes, "inventory size");
  fixture_cmd->add_option("--languages", fixture_langs, "comma-joined language codes");
  fixture_cmd->add_option("--images-per-synset", fixture_params.images_per_synset, "images per synset");
  fixture_cmd->add_option("--outlier-fraction", fixture_params.outlier_fraction, "planted outlier fraction");
  fixture_cmd->add_option("--max-gold", fixture_params.max_gold, "max gold sememes per synset");
  fixture_cmd->add_option("--distractors", fixture_params.distractors, "filler tokens per gloss");
  fixture_cmd->add_option("--gloss-signal", fixture_params.gloss_signal, "plant label signal in glosses");
  fixture_cmd->add_option("--image-signal", fixture_params.image_signal, "cluster images by sememe");
  fixture_cmd->add_option("--image-dim", fixture_params.image_dim, "image embedding dimension");
  fixture_cmd->add_option("--cluster-noise", fixture_params.cluster_noise, "image cluster noise");
  fixture_cmd->add_option("--outlier-distance-scale", fixture_params.outlier_distance_scale,
                          "outlier distance in noise*sqrt(dim) units");
  fixture_cmd->add_option("--external-fraction", fixture_params.external_fraction,
                          "fraction of synsets with an external key");
  fixture_cmd->add_option("--external-images", fixture_params.external_images, "external images per key");
  fixture_cmd->add_option("--train-fraction", fixture_params.train_fraction, "train split fraction");
  fixture_cmd->add_option("--valid-fraction", fixture_params.valid_fraction, "valid split fraction");
  fixture_cmd->callback([&] {
    fixture_params.languages.clear();
    for (const auto& lang : split(fixture_langs, ','))
      if (!trim(lang).empty()) fixture_params.languages.push_back(trim(lang));
    FixtureOutput fixture = generate_fixture(fixture_params);
    write_fixture(fixture, fixture_params, fixture_out);
    std::cout << "fixture: " << fixture.corpus.synsets.size() << " synsets, "
              << fixture.corpus.inventory.size() << " sememes -> " << fixture_out << "\n";
  });

  // ---- curate ----
  auto* curate_cmd = app.add_subcommand("curate", "filter outliers and merge external images");
  ConfigArgs curate_args;
  std::string curate_corpus_dir, curate_run_dir = "runs/curate";
  curate_cmd->add_option("--corpus", curate_corpus_dir, "corpus directory")->required();
  curate_cmd->add_option("--run-dir", curate_run_dir, "output directory");
  add_config_options(curate_cmd, &curate_args);
  curate_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(curate_args);
    CurationConfig config = curation_config_from_kv(kv);
    Assets assets = load_assets(curate_corpus_dir);
    if (!assets.images) throw ValidationError(curate_corpus_dir + ": images.embs not found");
    CurationResult result =
        curate_corpus(assets.corpus, *assets.images,
                      assets.external ? &*assets.external : nullptr, config);
    fs::create_directories(curate_run_dir);
    save_curated_sets(result, curate_run_dir + "/curated.jsonl");
    save_curation_report(result, curate_run_dir + "/curation_report.tsv");
    write_run_config(curate_run_dir, kv);
    long removed = 0, added = 0;
    for (const auto& r : result.report) {
      removed += r.removed;
      added += r.added;
    }
    std::cout << "curate: removed " << removed << ", added " << added << " across "
              << result.report.size() << " synsets -> " << curate_run_dir << "\n";
  });

  // ---- pretrain ----
  auto* pretrain_cmd = app.add_subcommand("pretrain", "masked contextual sememe pre-training");
  ConfigArgs pretrain_args;
  std::string pretrain_corpus_dir, pretrain_run_dir = "runs/pretrain";
  pretrain_cmd->add_option("--corpus", pretrain_corpus_dir, "corpus directory")->required();
  pretrain_cmd->add_option("--run-dir", pretrain_run_dir, "output directory");
  add_config_options(pretrain_cmd, &pretrain_args);
  pretrain_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(pretrain_args);
    TrainConfig config = TrainConfig::from_kv(kv);
    config.mcsp = true;
    Assets assets = load_assets(pretrain_corpus_dir);
    if (!assets.lexicon) throw ValidationError(pretrain_corpus_dir + ": lexicon.tsv not found");
    auto encoder = make_encoder(assets.corpus, &*assets.lexicon, config);
    PretrainResult result = pretrain_mcsp(assets.corpus, *assets.lexicon, encoder.get(), config);
    fs::create_directories(pretrain_run_dir);
    std::string checkpoint = pretrain_run_dir + "/encoder.ckpt";
    encoder->save(checkpoint, assets.corpus.inventory.fingerprint());
    nlohmann::ordered_json manifest;
    manifest["seed"] = config.seed;
    manifest["instances_used"] = result.instances_used;
    manifest["epoch_losses"] = result.epoch_losses;
    manifest["checkpoint"] = checkpoint;
    write_file(pretrain_run_dir + "/pretrain_manifest.json", manifest.dump(2) + "\n");
    write_run_config(pretrain_run_dir, config.to_kv());
    std::cout << "pretrain: " << result.instances_used << " maskable instances, epoch losses";
    for (double loss : result.epoch_losses) std::cout << ' ' << format_fixed(loss, 4);
    std::cout << " -> " << checkpoint << "\n";
  });

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "train the fusion model");
  ConfigArgs train_args;
  std::string train_corpus_dir, train_run_dir = "runs/train", train_curated;
  train_cmd->add_option("--corpus", train_corpus_dir, "corpus directory")->required();
  train_cmd->add_option("--run-dir", train_run_dir, "output directory");
  train_cmd->add_option("--curated", train_curated, "curated image sets (JSON lines)");
  add_config_options(train_cmd, &train_args);
  train_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(train_args);
    TrainConfig config = TrainConfig::from_kv(kv);
    Assets assets = load_assets(train_corpus_dir);
    auto curated = load_curated(train_curated);
    PipelineResult pipeline = run_training_pipeline(
        assets.corpus, assets.lexicon ? &*assets.lexicon : nullptr,
        assets.images ? &*assets.images : nullptr, assets.external ? &*assets.external : nullptr,
        curated ? &*curated : nullptr, config);
    fs::create_directories(train_run_dir);
    std::string checkpoint = train_run_dir + "/model.ckpt";
    pipeline.train.manifest.checkpoint = checkpoint;
    save_model(pipeline.train.model, checkpoint);
    write_file(train_run_dir + "/manifest.json", pipeline.train.manifest.to_json());
    write_run_config(train_run_dir, config.to_kv());
    std::cout << "train: best valid MAP " << format_fixed(pipeline.train.manifest.best_valid_map, 4)
              << " at epoch " << pipeline.train.manifest.best_epoch << " -> " << checkpoint << "\n";
  });

  // ---- tune-threshold ----
  auto* tune_cmd = app.add_subcommand("tune-threshold", "pick the F1-optimal score threshold");
  ConfigArgs tune_args;
  std::string tune_corpus_dir, tune_checkpoint, tune_run_dir = "runs/tune", tune_curated;
  tune_cmd->add_option("--corpus", tune_corpus_dir, "corpus directory")->required();
  tune_cmd->add_option("--checkpoint", tune_checkpoint, "model checkpoint")->required();
  tune_cmd->add_option("--run-dir", tune_run_dir, "output directory");
  tune_cmd->add_option("--curated", tune_curated, "curated image sets (JSON lines)");
  add_config_options(tune_cmd, &tune_args);
  tune_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(tune_args);
    EvalConfig eval_config = eval_config_from_kv(kv);
    Assets assets = load_assets(tune_corpus_dir);
    MsgiModel model = load_model(tune_checkpoint);
    check_inventory(model, assets.corpus.inventory);
    TrainConfig config = scoring_config(model);
    auto curated = load_curated(tune_curated);
    InstanceBuilder builder(config, assets.images ? &*assets.images : nullptr,
                            assets.external ? &*assets.external : nullptr,
                            curated ? &*curated : nullptr);
    Scorer scorer = make_scorer(&model, &builder);
    EvalReport report =
        evaluate(scorer, assets.corpus.split_synsets(assets.corpus.split.valid), eval_config);
    double delta = tune_threshold(report.records, eval_config.threshold_grid(), eval_config.f1_mode);
    fs::create_directories(tune_run_dir);
    KeyValueConfig out_kv;
    if (fs::exists(tune_run_dir + "/config.cfg"))
      out_kv = KeyValueConfig::from_file(tune_run_dir + "/config.cfg");
    out_kv.set("delta", format_fixed(delta, 4));
    write_file(tune_run_dir + "/config.cfg", out_kv.serialize());
    std::cout << "tune-threshold: delta = " << format_fixed(delta, 4) << " (valid mean F1 maximizer) -> "
              << tune_run_dir << "/config.cfg\n";
  });

  // ---- evaluate ----
  auto* eval_cmd = app.add_subcommand("evaluate", "score a split and report MAP/F1");
  ConfigArgs eval_args;
  std::string eval_corpus_dir, eval_checkpoint, eval_split = "test",
              eval_run_dir = "runs/evaluate", eval_curated;
  eval_cmd->add_option("--corpus", eval_corpus_dir, "corpus directory")->required();
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--split", eval_split, "train|valid|test");
  eval_cmd->add_option("--run-dir", eval_run_dir, "output directory");
  eval_cmd->add_option("--curated", eval_curated, "curated image sets (JSON lines)");
  add_config_options(eval_cmd, &eval_args);
  eval_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(eval_args);
    EvalConfig eval_config = eval_config_from_kv(kv);
    Assets assets = load_assets(eval_corpus_dir);
    MsgiModel model = load_model(eval_checkpoint);
    check_inventory(model, assets.corpus.inventory);
    TrainConfig config = scoring_config(model);
    auto curated = load_curated(eval_curated);
    InstanceBuilder builder(config, assets.images ? &*assets.images : nullptr,
                            assets.external ? &*assets.external : nullptr,
                            curated ? &*curated : nullptr);
    Scorer scorer = make_scorer(&model, &builder);
    const std::vector<std::string>* ids = &assets.corpus.split.test;
    if (eval_split == "train") ids = &assets.corpus.split.train;
    else if (eval_split == "valid") ids = &assets.corpus.split.valid;
    else if (eval_split != "test") throw ConfigError("unknown split '" + eval_split + "'");
    EvalReport report = evaluate(scorer, assets.corpus.split_synsets(*ids), eval_config);
    fs::create_directories(eval_run_dir);
    write_file(eval_run_dir + "/report.json",
               report_to_json(report, assets.corpus.inventory, eval_config));
    write_file(eval_run_dir + "/report.tsv", report_to_tsv(report));
    std::cout << "evaluate[" << eval_split << "]: MAP " << format_fixed(report.map, 4) << ", F1 "
              << format_fixed(report.f1, 4) << " over " << report.scored << " synsets -> "
              << eval_run_dir << "\n";
  });

  // ---- predict ----
  auto* predict_cmd = app.add_subcommand("predict", "predict sememe labels for synset records");
  std::string predict_file, predict_checkpoint, predict_images, predict_external,
      predict_curated, predict_out;
  double predict_threshold = 0.42;
  predict_cmd->add_option("--synset-file", predict_file, "synset records (JSON lines)")->required();
  predict_cmd->add_option("--checkpoint", predict_checkpoint, "model checkpoint")->required();
  predict_cmd->add_option("--threshold", predict_threshold, "score threshold");
  predict_cmd->add_option("--images", predict_images, "image embedding store");
  predict_cmd->add_option("--external", predict_external, "external image embedding store");
  predict_cmd->add_option("--curated", predict_curated, "curated image sets (JSON lines)");
  predict_cmd->add_option("--out", predict_out, "output file (default: stdout)");
  predict_cmd->callback([&] {
    MsgiModel model = load_model(predict_checkpoint);
    SememeInventory inventory = SememeInventory::from_labels(model.sememe_labels);
    auto synsets = load_synsets_jsonl(predict_file, inventory, /*ignore_unknown=*/true);
    std::optional<EmbeddingStore> images, external;
    if (!predict_images.empty()) images = EmbeddingStore::load(predict_images);
    if (!predict_external.empty()) external = EmbeddingStore::load(predict_external);
    auto curated = load_curated(predict_curated);
    TrainConfig config = scoring_config(model);
    InstanceBuilder builder(config, images ? &*images : nullptr, external ? &*external : nullptr,
                            curated ? &*curated : nullptr);
    std::ostringstream out;
    for (const auto& synset : synsets) {
      nlohmann::ordered_json rec;
      rec["id"] = synset.id;
      try {
        Eigen::VectorXd scores = model.score(builder.sequence(synset), builder.image_matrix(synset));
        std::vector<std::string> labels;
        for (int s : select_sememes(scores, predict_threshold))
          labels.push_back(model.sememe_labels[static_cast<std::size_t>(s)]);
        rec["sememes"] = labels;
      } catch (const ValidationError& e) {
        rec["sememes"] = std::vector<std::string>{};
        rec["warning"] = e.what();
      }
      out << rec.dump() << "\n";
    }
    if (predict_out.empty()) {
      std::cout << out.str();
    } else {
      fs::create_directories(fs::path(predict_out).parent_path().string().empty()
                                 ? "."
                                 : fs::path(predict_out).parent_path().string());
      write_file(predict_out, out.str());
      std::cout << "predict: " << synsets.size() << " synsets -> " << predict_out << "\n";
    }
  });

  // ---- ablate ----
  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare configuration variants");
  ConfigArgs ablate_args;
  std::string ablate_corpus_dir, ablate_mode = "parts", ablate_run_dir = "runs/ablate",
              ablate_curated;
  ablate_cmd->add_option("--corpus", ablate_corpus_dir, "corpus directory")->required();
  ablate_cmd->add_option("--mode", ablate_mode, "parts|images|languages");
  ablate_cmd->add_option("--run-dir", ablate_run_dir, "output directory");
  ablate_cmd->add_option("--curated", ablate_curated, "curated image sets (JSON lines)");
  add_config_options(ablate_cmd, &ablate_args);
  ablate_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(ablate_args);
    TrainConfig base = TrainConfig::from_kv(kv);
    EvalConfig eval_config = eval_config_from_kv(kv);
    CurationConfig curation_config = curation_config_from_kv(kv);
    Assets assets = load_assets(ablate_corpus_dir);
    auto curated = load_curated(ablate_curated);
    const WordSememeLexicon* lexicon = assets.lexicon ? &*assets.lexicon : nullptr;
    const EmbeddingStore* images = assets.images ? &*assets.images : nullptr;
    const EmbeddingStore* external = assets.external ? &*assets.external : nullptr;
    std::vector<AblationRow> rows;
    if (ablate_mode == "parts")
      rows = run_parts_ablation(assets.corpus, lexicon, images, external,
                                curated ? &*curated : nullptr, base, eval_config);
    else if (ablate_mode == "images")
      rows = run_image_ablation(assets.corpus, lexicon, images, external, base, eval_config,
                                curation_config);
    else if (ablate_mode == "languages")
      rows = run_language_ablation(assets.corpus, lexicon, images, external,
                                   curated ? &*curated : nullptr, base, eval_config);
    else
      throw ConfigError("unknown ablation mode '" + ablate_mode + "'");
    fs::create_directories(ablate_run_dir);
    std::string table = ablation_table_tsv(rows);
    write_file(ablate_run_dir + "/ablation.tsv", table);
    write_run_config(ablate_run_dir, base.to_kv());
    std::cout << table;
  });

  // ---- analyze ----
  auto* analyze_cmd = app.add_subcommand("analyze", "breakdown tables, error types and plots");
  ConfigArgs analyze_args;
  std::string analyze_corpus_dir, analyze_checkpoint, analyze_split = "valid",
              analyze_run_dir = "runs/analyze", analyze_curated;
  analyze_cmd->add_option("--corpus", analyze_corpus_dir, "corpus directory")->required();
  analyze_cmd->add_option("--checkpoint", analyze_checkpoint, "model checkpoint")->required();
  analyze_cmd->add_option("--split", analyze_split, "train|valid|test");
  analyze_cmd->add_option("--run-dir", analyze_run_dir, "output directory");
  analyze_cmd->add_option("--curated", analyze_curated, "curated image sets (JSON lines)");
  add_config_options(analyze_cmd, &analyze_args);
  analyze_cmd->callback([&] {
    KeyValueConfig kv = resolve_config(analyze_args);
    EvalConfig eval_config = eval_config_from_kv(kv);
    Assets assets = load_assets(analyze_corpus_dir);
    MsgiModel model = load_model(analyze_checkpoint);
    check_inventory(model, assets.corpus.inventory);
    TrainConfig config = scoring_config(model);
    auto curated = load_curated(analyze_curated);
    InstanceBuilder builder(config, assets.images ? &*assets.images : nullptr,
                            assets.external ? &*assets.external : nullptr,
                            curated ? &*curated : nullptr);
    Scorer scorer = make_scorer(&model, &builder);
    const std::vector<std::string>* ids = &assets.corpus.split.valid;
    if (analyze_split == "train") ids = &assets.corpus.split.train;
    else if (analyze_split == "test") ids = &assets.corpus.split.test;
    else if (analyze_split != "valid") throw ConfigError("unknown split '" + analyze_split + "'");
    EvalReport report = evaluate(scorer, assets.corpus.split_synsets(*ids), eval_config);
    auto by_count = breakdown_by_sememe_count(report, eval_config.sememe_count_edges);
    auto by_freq =
        breakdown_by_sememe_frequency(report, assets.corpus.inventory, eval_config.frequency_edges);
    fs::create_directories(analyze_run_dir);
    write_file(analyze_run_dir + "/report.json",
               report_to_json(report, assets.corpus.inventory, eval_config));
    write_file(analyze_run_dir + "/breakdown_sememe_count.tsv",
               breakdown_to_tsv(by_count, "sememe_count"));
    write_file(analyze_run_dir + "/breakdown_sememe_frequency.tsv",
               breakdown_to_tsv(by_freq, "sememe_frequency"));
    write_breakdown_chart(by_count, "Scores by sememe count",
                          analyze_run_dir + "/breakdown_sememe_count.svg");
    write_breakdown_chart(by_freq, "Scores by sememe training frequency",
                          analyze_run_dir + "/breakdown_sememe_frequency.svg");
    std::ostringstream categories;
    categories << "category\tcount\n";
    for (const auto& [name, count] : error_category_counts(report, eval_config))
      categories << name << '\t' << count << "\n";
    write_file(analyze_run_dir + "/error_categories.tsv", categories.str());
    std::cout << "analyze[" << analyze_split << "]: MAP " << format_fixed(report.map, 4) << ", F1 "
              << format_fixed(report.f1, 4) << " -> " << analyze_run_dir << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const spbs::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const spbs::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const spbs::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
