#include "spbs/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "json.hpp"

namespace spbs {

namespace {

std::string format_g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, const std::string& tag, std::uint64_t extra = 0) {
  std::string blob = std::to_string(seed) + "/" + tag + "/" + std::to_string(extra);
  return fnv1a64(blob);
}

std::vector<int> parse_int_list(const KeyValueConfig& kv, const std::string& key,
                                const std::vector<int>& fallback) {
  if (!kv.has(key)) return fallback;
  std::vector<int> out;
  for (const auto& item : kv.get_list(key, {})) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': bad integer '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (encoder_lr <= 0.0 || head_lr <= 0.0) throw ConfigError("learning rates must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (mcsp && !(mcsp_rate > 0.0 && mcsp_rate <= 1.0))
    throw ConfigError("mcsp_rate must lie in (0, 1]");
  if (mcsp && mcsp_epochs < 1) throw ConfigError("mcsp_epochs must be at least 1");
  if (language_order.empty()) throw ConfigError("language_order must be nonempty");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  encoder.validate();
}

SegmentOptions TrainConfig::segment_options() const {
  SegmentOptions options;
  options.drop_synonyms = no_synonym;
  options.drop_gloss = no_gloss;
  return options;
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  kv.require_known(known_config_keys());
  TrainConfig c;
  c.encoder_lr = kv.get_double("encoder_lr", c.encoder_lr);
  c.head_lr = kv.get_double("head_lr", c.head_lr);
  c.batch_size = kv.get_int("batch_size", c.batch_size);
  c.epochs = kv.get_int("epochs", c.epochs);
  c.seed = kv.get_u64("seed", c.seed);
  c.freeze_encoder = kv.get_bool("freeze_encoder", c.freeze_encoder);
  c.mcsp = kv.get_bool("mcsp", c.mcsp);
  c.mcsp_epochs = kv.get_int("mcsp_epochs", c.mcsp_epochs);
  c.mcsp_rate = kv.get_double("mcsp_rate", c.mcsp_rate);
  c.no_synonym = kv.get_bool("no_synonym", c.no_synonym);
  c.no_gloss = kv.get_bool("no_gloss", c.no_gloss);
  c.no_image = kv.get_bool("no_image", c.no_image);
  c.language_order = kv.get_list("languages", c.language_order);
  std::string kind = kv.get_string("encoder_kind", "tiny-trainable");
  if (kind == "tiny-trainable")
    c.encoder.kind = EncoderKind::TinyTrainable;
  else if (kind == "pretrained-adapter")
    c.encoder.kind = EncoderKind::PretrainedAdapter;
  else
    throw ConfigError("unknown encoder_kind '" + kind + "'");
  c.encoder.d_t = kv.get_int("d_t", c.encoder.d_t);
  c.encoder.layers = kv.get_int("layers", c.encoder.layers);
  c.encoder.heads = kv.get_int("heads", c.encoder.heads);
  c.encoder.d_ff = kv.get_int("d_ff", c.encoder.d_ff);
  c.encoder.max_positions = kv.get_int("max_positions", c.encoder.max_positions);
  c.encoder.max_tokens = kv.get_int("max_tokens", c.encoder.max_tokens);
  c.encoder.mask_symbol = kv.get_string("mask_symbol", c.encoder.mask_symbol);
  c.encoder.checkpoint = kv.get_string("adapter_checkpoint", c.encoder.checkpoint);
  c.encoder_checkpoint = kv.get_string("encoder_checkpoint", c.encoder_checkpoint);
  c.delta = kv.get_double("delta", c.delta);
  return c;
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("encoder_lr", format_g(encoder_lr));
  kv.set("head_lr", format_g(head_lr));
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("epochs", std::to_string(epochs));
  kv.set("seed", std::to_string(seed));
  kv.set("freeze_encoder", freeze_encoder ? "true" : "false");
  kv.set("mcsp", mcsp ? "true" : "false");
  kv.set("mcsp_epochs", std::to_string(mcsp_epochs));
  kv.set("mcsp_rate", format_g(mcsp_rate));
  kv.set("no_synonym", no_synonym ? "true" : "false");
  kv.set("no_gloss", no_gloss ? "true" : "false");
  kv.set("no_image", no_image ? "true" : "false");
  kv.set("languages", join(language_order, ","));
  kv.set("encoder_kind",
         encoder.kind == EncoderKind::TinyTrainable ? "tiny-trainable" : "pretrained-adapter");
  kv.set("d_t", std::to_string(encoder.d_t));
  kv.set("layers", std::to_string(encoder.layers));
  kv.set("heads", std::to_string(encoder.heads));
  kv.set("d_ff", std::to_string(encoder.d_ff));
  kv.set("max_positions", std::to_string(encoder.max_positions));
  kv.set("max_tokens", std::to_string(encoder.max_tokens));
  kv.set("mask_symbol", encoder.mask_symbol);
  if (!encoder.checkpoint.empty()) kv.set("adapter_checkpoint", encoder.checkpoint);
  if (!encoder_checkpoint.empty()) kv.set("encoder_checkpoint", encoder_checkpoint);
  kv.set("delta", format_g(delta));
  return kv;
}

std::uint64_t TrainConfig::hash() const { return fnv1a64(to_kv().serialize()); }

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "encoder_lr",   "head_lr",      "batch_size",     "epochs",
      "seed",         "freeze_encoder", "mcsp",         "mcsp_epochs",
      "mcsp_rate",    "no_synonym",   "no_gloss",       "no_image",
      "languages",    "encoder_kind", "adapter_checkpoint", "encoder_checkpoint",
      "d_t",          "layers",       "heads",          "d_ff",
      "max_positions", "max_tokens",  "mask_symbol",    "delta",
      "grid_step",    "f1_mode",      "count_bins",     "freq_bins",
      "good_threshold", "nu",         "min_set_size",   "gamma_scale",
      "gamma",        "merge_external"};
  return keys;
}

EvalConfig eval_config_from_kv(const KeyValueConfig& kv) {
  kv.require_known(known_config_keys());
  EvalConfig c;
  c.delta = kv.get_double("delta", c.delta);
  c.grid_step = kv.get_double("grid_step", c.grid_step);
  std::string mode = kv.get_string("f1_mode", "instance");
  if (mode == "instance")
    c.f1_mode = F1Mode::InstanceAveraged;
  else if (mode == "micro")
    c.f1_mode = F1Mode::Micro;
  else
    throw ConfigError("unknown f1_mode '" + mode + "'");
  c.sememe_count_edges = parse_int_list(kv, "count_bins", c.sememe_count_edges);
  c.frequency_edges = parse_int_list(kv, "freq_bins", c.frequency_edges);
  c.good_threshold = kv.get_double("good_threshold", c.good_threshold);
  return c;
}

CurationConfig curation_config_from_kv(const KeyValueConfig& kv) {
  kv.require_known(known_config_keys());
  CurationConfig c;
  c.nu = kv.get_double("nu", c.nu);
  c.min_set_size = kv.get_int("min_set_size", c.min_set_size);
  c.gamma_scale = kv.get_double("gamma_scale", c.gamma_scale);
  if (kv.has("gamma")) c.gamma = kv.get_double("gamma", 0.0);
  c.merge_external = kv.get_bool("merge_external", c.merge_external);
  c.validate();
  return c;
}

Adam::Adam(std::vector<Group> groups, double beta1, double beta2, double eps)
    : groups_(std::move(groups)), beta1_(beta1), beta2_(beta2), eps_(eps) {
  state_.resize(groups_.size());
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    for (ad::Tensor* t : groups_[gi].params)
      state_[gi].emplace_back(Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()),
                              Eigen::MatrixXd::Zero(t->value.rows(), t->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    for (std::size_t pi = 0; pi < groups_[gi].params.size(); ++pi) {
      ad::Tensor* t = groups_[gi].params[pi];
      auto& [m, v] = state_[gi][pi];
      m = beta1_ * m + (1.0 - beta1_) * t->grad;
      v = beta2_ * v + (1.0 - beta2_) * t->grad.cwiseProduct(t->grad);
      Eigen::ArrayXXd m_hat = m.array() / bc1;
      Eigen::ArrayXXd v_hat = v.array() / bc2;
      t->value -= (groups_[gi].lr * m_hat / (v_hat.sqrt() + eps_)).matrix();
    }
  }
}

void Adam::zero_grad() {
  for (auto& group : groups_)
    for (ad::Tensor* t : group.params) t->zero_grad();
}

InstanceBuilder::InstanceBuilder(const TrainConfig& config, const EmbeddingStore* images,
                                 const EmbeddingStore* external, const CuratedMap* curated)
    : config_(config), images_(images), external_(external), curated_(curated) {
  image_dim_ = images_ != nullptr ? images_->dim() : 1;
}

MultilingualSequence InstanceBuilder::sequence(const Synset& synset) const {
  return build_multilingual_sequence(synset, config_.language_order, config_.segment_options());
}

Eigen::MatrixXd InstanceBuilder::image_matrix(const Synset& synset) const {
  if (config_.no_image || images_ == nullptr) return Eigen::MatrixXd(0, image_dim_);
  const std::vector<std::string>* ids = &synset.images;
  if (curated_ != nullptr) {
    auto it = curated_->find(synset.id);
    if (it != curated_->end()) ids = &it->second;
  }
  std::vector<Eigen::VectorXd> rows;
  for (const auto& id : *ids) {
    if (images_->has(id))
      rows.push_back(images_->get(id));
    else if (external_ != nullptr && external_->has(id))
      rows.push_back(external_->get(id));
  }
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), image_dim_);
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = rows[i];
  return out;
}

std::string RunManifest::to_json() const {
  nlohmann::ordered_json doc;
  doc["seed"] = seed;
  nlohmann::ordered_json config_obj = nlohmann::ordered_json::object();
  for (const auto& line : split(config_snapshot, '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    config_obj[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  doc["config"] = config_obj;
  nlohmann::ordered_json epoch_list = nlohmann::ordered_json::array();
  for (const auto& m : epochs)
    epoch_list.push_back(
        {{"epoch", m.epoch}, {"train_loss", m.train_loss}, {"valid_map", m.valid_map}});
  doc["epochs"] = epoch_list;
  doc["best_epoch"] = best_epoch;
  doc["best_valid_map"] = best_valid_map;
  doc["checkpoint"] = checkpoint;
  doc["wall_seconds"] = wall_seconds;
  return doc.dump(2) + "\n";
}

namespace {

struct SequenceInstance {
  const Synset* synset = nullptr;
  MultilingualSequence sequence;
  std::vector<int> token_ids;
  Eigen::MatrixXd images;
};

// Length-grouped deterministic batches, batch order shuffled per epoch.
std::vector<std::vector<int>> make_batches(const std::vector<int>& lengths, int batch_size,
                                           Rng* rng) {
  std::vector<int> order(lengths.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return lengths[static_cast<std::size_t>(a)] < lengths[static_cast<std::size_t>(b)]; });
  std::vector<std::vector<int>> batches;
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  rng->shuffle(batches);
  return batches;
}

std::vector<SequenceInstance> build_instances(const std::vector<const Synset*>& synsets,
                                              const InstanceBuilder& builder, TextEncoder* encoder,
                                              bool with_images, int* skipped) {
  std::vector<SequenceInstance> out;
  for (const Synset* synset : synsets) {
    SequenceInstance inst;
    inst.synset = synset;
    try {
      inst.sequence = builder.sequence(*synset);
    } catch (const ValidationError&) {
      if (skipped != nullptr) ++*skipped;
      continue;
    }
    auto [cut, truncated] = truncate_to_budget(
        inst.sequence, encoder->vocab(),
        std::min(encoder->config().max_tokens, encoder->config().max_positions),
        encoder->config().mask_symbol);
    inst.sequence = std::move(cut);
    auto tokens = tokenize(inst.sequence.text, encoder->vocab(), encoder->config().mask_symbol);
    inst.token_ids.reserve(tokens.size());
    for (const auto& t : tokens) inst.token_ids.push_back(t.id);
    if (inst.token_ids.empty()) {
      if (skipped != nullptr) ++*skipped;
      continue;
    }
    if (with_images) inst.images = builder.image_matrix(*synset);
    out.push_back(std::move(inst));
  }
  return out;
}

double validation_map(const std::vector<SequenceInstance>& instances, TextEncoder* encoder,
                      ProjectionParams& projection, ClassifierParams& classifier,
                      bool use_images) {
  double sum = 0.0;
  int counted = 0;
  for (const auto& inst : instances) {
    if (inst.synset->gold_sememes.empty()) continue;
    ad::Graph graph;
    auto hidden = encoder->forward(graph, inst.token_ids);
    Eigen::VectorXd text_repr = graph.value(hidden).row(0).transpose();
    Eigen::VectorXd image_repr;
    if (use_images && inst.images.rows() > 0) {
      Eigen::MatrixXd projected = project_images(inst.images, projection);
      image_repr = attend_images(text_repr, projected).image_representation;
    } else {
      image_repr = Eigen::VectorXd::Zero(text_repr.size());
    }
    Eigen::VectorXd scores = predict_scores(text_repr, image_repr, classifier);
    sum += average_precision(scores, inst.synset->gold_sememes);
    ++counted;
  }
  return counted > 0 ? sum / counted : 0.0;
}

}  // namespace

std::unique_ptr<TextEncoder> make_encoder(const Corpus& corpus, const WordSememeLexicon* lexicon,
                                          const TrainConfig& config) {
  if (!config.encoder_checkpoint.empty()) {
    auto encoder = TextEncoder::load(config.encoder_checkpoint);
    if (encoder->saved_inventory_fingerprint() != 0 &&
        encoder->saved_inventory_fingerprint() != corpus.inventory.fingerprint())
      throw ValidationError("encoder checkpoint was pre-trained against a different inventory");
    return encoder;
  }
  if (config.encoder.kind == EncoderKind::PretrainedAdapter)
    return TextEncoder::load(config.encoder.checkpoint);

  std::vector<std::string> texts;
  for (const Synset* synset : corpus.split_synsets(corpus.split.train)) {
    try {
      texts.push_back(
          build_multilingual_sequence(*synset, config.language_order, config.segment_options())
              .text);
    } catch (const ValidationError&) {
      continue;  // synsets without an encodable segment contribute no vocabulary
    }
  }
  std::vector<std::string> extra;
  if (lexicon != nullptr)
    for (const auto& [key, _] : lexicon->entries()) extra.push_back(key.first);
  Vocabulary vocab = Vocabulary::build(texts, extra);
  return std::make_unique<TextEncoder>(config.encoder, std::move(vocab),
                                       derive_seed(config.seed, "encoder-init"));
}

PretrainResult pretrain_mcsp(const Corpus& corpus, const WordSememeLexicon& lexicon,
                             TextEncoder* encoder, const TrainConfig& config) {
  config.validate();
  if (!config.mcsp) throw ConfigError("pretrain_mcsp called with mcsp disabled");
  if (lexicon.empty()) throw ConfigError("MCSP requires a nonempty word-sememe lexicon");
  if (corpus.inventory.size() == 0) throw ConfigError("MCSP requires a nonempty inventory");

  InstanceBuilder builder(config, nullptr, nullptr, nullptr);
  int skipped = 0;
  auto instances = build_instances(corpus.split_synsets(corpus.split.train), builder, encoder,
                                   /*with_images=*/false, &skipped);

  // Masks are drawn once per run; every epoch optimizes and measures the
  // same masked instances, so the epoch-mean loss trajectory is consistent.
  struct Prepared {
    std::vector<int> ids;
    std::vector<int> mask_rows;
    std::vector<std::set<int>> targets;
  };
  std::vector<Prepared> prepared;
  for (const auto& inst : instances) {
    std::uint64_t mask_seed = derive_seed(config.seed, "mask/" + inst.synset->id);
    MaskedSequence masked = apply_mcsp_mask(inst.sequence, lexicon, config.mcsp_rate, mask_seed);
    if (masked.targets.empty()) continue;
    auto tokens = tokenize(masked.text, encoder->vocab(), encoder->config().mask_symbol);
    Prepared p;
    for (const auto& t : tokens) p.ids.push_back(t.id);
    p.mask_rows = mask_token_indices(tokens, masked);
    for (const auto& target : masked.targets) p.targets.push_back(target.sememes);
    prepared.push_back(std::move(p));
  }
  if (prepared.empty())
    throw ConfigError("no maskable instances: no en/zh gloss words appear in the lexicon");

  Rng head_rng(derive_seed(config.seed, "mcsp-head"));
  McspHeadParams head(encoder->config().d_t, corpus.inventory.size(), &head_rng);

  std::vector<Adam::Group> groups;
  groups.push_back({encoder->parameters(), config.encoder_lr});
  groups.push_back({head.tensors(), config.head_lr});
  Adam optimizer(std::move(groups));

  PretrainResult result;
  result.instances_used = static_cast<int>(prepared.size());
  std::vector<int> lengths;
  for (const auto& p : prepared) lengths.push_back(static_cast<int>(p.ids.size()));

  for (int epoch = 0; epoch < config.mcsp_epochs; ++epoch) {
    Rng order_rng(derive_seed(config.seed, "mcsp-order", static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    int loss_count = 0;
    for (const auto& batch : make_batches(lengths, config.batch_size, &order_rng)) {
      optimizer.zero_grad();
      for (int index : batch) {
        const Prepared& p = prepared[static_cast<std::size_t>(index)];
        ad::Graph graph;
        auto hidden = encoder->forward(graph, p.ids);
        auto loss = build_mcsp_loss(graph, hidden, p.mask_rows, p.targets, head,
                                    corpus.inventory.size());
        graph.backward(loss, 1.0 / static_cast<double>(batch.size()));
        loss_sum += graph.value(loss)(0, 0);
        ++loss_count;
      }
      optimizer.step();
    }
    result.epoch_losses.push_back(loss_count > 0 ? loss_sum / loss_count : 0.0);
  }
  return result;
}

TrainResult train_spbs(const Corpus& corpus, const EmbeddingStore* images,
                       const EmbeddingStore* external, const CuratedMap* curated,
                       const TrainConfig& config, std::unique_ptr<TextEncoder> encoder) {
  config.validate();
  if (corpus.inventory.size() == 0) throw ConfigError("cannot train with an empty inventory");
  auto started = std::chrono::steady_clock::now();

  if (encoder == nullptr) encoder = make_encoder(corpus, nullptr, config);
  const int d_t = encoder->config().d_t;
  const bool use_images = !config.no_image && images != nullptr;

  InstanceBuilder builder(config, images, external, curated);
  int skipped = 0;
  auto train_instances = build_instances(corpus.split_synsets(corpus.split.train), builder,
                                         encoder.get(), use_images, &skipped);
  auto valid_instances = build_instances(corpus.split_synsets(corpus.split.valid), builder,
                                         encoder.get(), use_images, &skipped);
  if (train_instances.empty()) throw ConfigError("no encodable training synsets");

  Rng head_rng(derive_seed(config.seed, "spbs-heads"));
  ProjectionParams projection(builder.image_dim(), d_t, &head_rng);
  ClassifierParams classifier(d_t, corpus.inventory.size(), &head_rng);

  std::vector<Adam::Group> groups;
  if (!config.freeze_encoder) groups.push_back({encoder->parameters(), config.encoder_lr});
  std::vector<ad::Tensor*> head_params;
  for (ad::Tensor* t : projection.tensors()) head_params.push_back(t);
  for (ad::Tensor* t : classifier.tensors()) head_params.push_back(t);
  groups.push_back({head_params, config.head_lr});
  Adam optimizer(std::move(groups));

  std::vector<int> lengths;
  for (const auto& inst : train_instances)
    lengths.push_back(static_cast<int>(inst.token_ids.size()));

  std::vector<ad::Tensor*> all_params = encoder->parameters();
  for (ad::Tensor* t : head_params) all_params.push_back(t);
  std::vector<Eigen::MatrixXd> best_values;
  double best_map = -1.0;
  int best_epoch = 0;

  RunManifest manifest;
  manifest.seed = config.seed;
  manifest.config_snapshot = config.to_kv().serialize();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng order_rng(derive_seed(config.seed, "spbs-order", static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    int loss_count = 0;
    for (const auto& batch : make_batches(lengths, config.batch_size, &order_rng)) {
      optimizer.zero_grad();
      for (int index : batch) {
        const auto& inst = train_instances[static_cast<std::size_t>(index)];
        ad::Graph graph;
        auto hidden = encoder->forward(graph, inst.token_ids);
        auto loss = build_spbs_loss(graph, hidden, inst.images, inst.synset->gold_sememes,
                                    projection, classifier, corpus.inventory.size(), use_images);
        graph.backward(loss, 1.0 / static_cast<double>(batch.size()));
        loss_sum += graph.value(loss)(0, 0);
        ++loss_count;
      }
      optimizer.step();
    }
    double epoch_loss = loss_count > 0 ? loss_sum / loss_count : 0.0;
    double valid_map =
        validation_map(valid_instances, encoder.get(), projection, classifier, use_images);
    manifest.epochs.push_back({epoch, epoch_loss, valid_map});
    if (valid_map > best_map) {
      best_map = valid_map;
      best_epoch = epoch;
      best_values.clear();
      for (ad::Tensor* t : all_params) best_values.push_back(t->value);
    }
  }
  if (!best_values.empty())
    for (std::size_t i = 0; i < all_params.size(); ++i) all_params[i]->value = best_values[i];

  manifest.best_epoch = best_epoch;
  manifest.best_valid_map = best_map;
  manifest.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  TrainResult result;
  result.model.encoder = std::move(encoder);
  result.model.projection = std::move(projection);
  result.model.classifier = std::move(classifier);
  result.model.d_img = builder.image_dim();
  result.model.use_images = use_images;
  result.model.language_order = config.language_order;
  result.model.no_synonym = config.no_synonym;
  result.model.no_gloss = config.no_gloss;
  for (const auto& sememe : corpus.inventory.sememes())
    result.model.sememe_labels.push_back(sememe.label);
  result.model.inventory_fingerprint = corpus.inventory.fingerprint();
  result.model.config_hash = config.hash();
  result.manifest = std::move(manifest);
  return result;
}

Eigen::VectorXd frequency_prior_scores(const SememeInventory& inventory) {
  int max_freq = 0;
  for (int f : inventory.frequency()) max_freq = std::max(max_freq, f);
  Eigen::VectorXd scores(inventory.size());
  for (int i = 0; i < inventory.size(); ++i)
    scores(i) = (static_cast<double>(inventory.frequency()[static_cast<std::size_t>(i)]) + 0.5) /
                (static_cast<double>(max_freq) + 1.0);
  return scores;
}

Scorer make_scorer(MsgiModel* model, const InstanceBuilder* builder) {
  return [model, builder](const Synset& synset) {
    MultilingualSequence seq = builder->sequence(synset);
    Eigen::MatrixXd images = builder->image_matrix(synset);
    return model->score(seq, images);
  };
}

}  // namespace spbs
