#include "spbs/model.hpp"

#include <algorithm>
#include <cmath>

#include "spbs/checkpoint.hpp"

namespace spbs {

namespace {

ad::Tensor random_tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng* rng,
                         double stddev = 0.02) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng->normal(0.0, stddev);
  return ad::Tensor(name, std::move(m));
}

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw ContractError(std::string(what) + " contains non-finite values");
}

}  // namespace

ProjectionParams::ProjectionParams(int d_img, int d_t, Rng* rng)
    : weight(random_tensor("projection.weight", d_img, d_t, rng)),
      bias(ad::Tensor("projection.bias", Eigen::MatrixXd::Zero(1, d_t))) {}

ClassifierParams::ClassifierParams(int d_t, int inventory_size, Rng* rng)
    : weight(random_tensor("classifier.weight", 2 * d_t, inventory_size, rng)),
      bias(ad::Tensor("classifier.bias", Eigen::MatrixXd::Zero(1, inventory_size))) {}

McspHeadParams::McspHeadParams(int d_t, int inventory_size, Rng* rng)
    : weight(random_tensor("mcsp.weight", d_t, inventory_size, rng)),
      bias(ad::Tensor("mcsp.bias", Eigen::MatrixXd::Zero(1, inventory_size))) {}

AttentionResult attend_images(const Eigen::VectorXd& text_repr, const Eigen::MatrixXd& projected) {
  require_finite(text_repr, "text representation");
  AttentionResult out;
  if (projected.rows() == 0) {
    out.image_representation = Eigen::VectorXd::Zero(text_repr.size());
    out.weights = Eigen::VectorXd(0);
    return out;
  }
  if (projected.cols() != text_repr.size())
    throw ContractError("attend_images: projected dimension differs from text dimension");
  require_finite(projected, "projected image embeddings");
  Eigen::VectorXd logits = projected * text_repr;
  double mx = logits.maxCoeff();
  Eigen::ArrayXd e = (logits.array() - mx).exp();
  out.weights = (e / e.sum()).matrix();
  out.image_representation = projected.transpose() * out.weights;
  return out;
}

Eigen::MatrixXd project_images(const Eigen::MatrixXd& raw, const ProjectionParams& params) {
  if (raw.rows() == 0) return Eigen::MatrixXd(0, params.weight.value.cols());
  if (raw.cols() != params.weight.value.rows())
    throw ContractError("project_images: raw dimension differs from projection input");
  Eigen::MatrixXd out = raw * params.weight.value;
  out.rowwise() += params.bias.value.row(0);
  return out;
}

Eigen::VectorXd predict_scores(const Eigen::VectorXd& text_repr,
                               const Eigen::VectorXd& image_repr, const ClassifierParams& params) {
  if (text_repr.size() != image_repr.size())
    throw ContractError("predict_scores: text/image dimensions differ");
  if (2 * text_repr.size() != params.weight.value.rows())
    throw ContractError("predict_scores: classifier expects 2*d_t inputs");
  require_finite(text_repr, "text representation");
  require_finite(image_repr, "image representation");
  Eigen::VectorXd cat(2 * text_repr.size());
  cat << text_repr, image_repr;
  Eigen::VectorXd z = params.weight.value.transpose() * cat + params.bias.value.row(0).transpose();
  return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

double spbs_loss(const Eigen::VectorXd& scores, const std::set<int>& gold, int inventory_size,
                 double eps) {
  if (scores.size() != inventory_size) throw ContractError("spbs_loss: score vector size mismatch");
  for (int s : gold)
    if (s < 0 || s >= inventory_size) throw ContractError("spbs_loss: gold id out of range");
  double total = 0.0;
  for (int i = 0; i < inventory_size; ++i) {
    double p = std::min(std::max(scores(i), eps), 1.0 - eps);
    total += gold.count(i) > 0 ? std::log(p) : std::log(1.0 - p);
  }
  return -total / static_cast<double>(inventory_size);
}

double mcsp_loss(const Eigen::MatrixXd& mask_states, const std::vector<std::set<int>>& targets,
                 const McspHeadParams& head, int inventory_size, double eps) {
  if (mask_states.rows() == 0 || targets.empty())
    throw ContractError("mcsp_loss: no mask states");
  if (static_cast<std::size_t>(mask_states.rows()) != targets.size())
    throw ContractError("mcsp_loss: states and targets misaligned");
  for (const auto& t : targets)
    if (t.empty()) throw ContractError("mcsp_loss: empty target set");
  double total = 0.0;
  for (Eigen::Index r = 0; r < mask_states.rows(); ++r) {
    Eigen::VectorXd z = head.weight.value.transpose() * mask_states.row(r).transpose() +
                        head.bias.value.row(0).transpose();
    Eigen::VectorXd p = z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    total += spbs_loss(p, targets[static_cast<std::size_t>(r)], inventory_size, eps);
  }
  return total / static_cast<double>(mask_states.rows());
}

std::set<int> select_sememes(const Eigen::VectorXd& scores, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ContractError("threshold must lie in (0, 1)");
  std::set<int> out;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (scores(i) > delta) out.insert(static_cast<int>(i));
  return out;
}

Eigen::MatrixXd gold_row(const std::set<int>& gold, int inventory_size) {
  Eigen::MatrixXd row = Eigen::MatrixXd::Zero(1, inventory_size);
  for (int s : gold) {
    if (s < 0 || s >= inventory_size) throw ContractError("gold id out of range");
    row(0, s) = 1.0;
  }
  return row;
}

ad::Graph::Var build_fusion_scores(ad::Graph& graph, ad::Graph::Var hidden,
                                   const Eigen::MatrixXd& raw_images, ProjectionParams& projection,
                                   ClassifierParams& classifier, bool use_images) {
  const Eigen::Index d_t = graph.value(hidden).cols();
  auto text_repr = graph.gather_rows(hidden, {0});
  ad::Graph::Var image_repr;
  if (use_images && raw_images.rows() > 0) {
    auto raw = graph.input(raw_images);
    auto projected = graph.add_rowwise(graph.matmul(raw, graph.param(&projection.weight)),
                                       graph.param(&projection.bias));
    auto logits = graph.transpose(graph.matmul(projected, graph.transpose(text_repr)));
    auto weights = graph.softmax_rows(logits);
    image_repr = graph.matmul(weights, projected);
  } else {
    image_repr = graph.input(Eigen::MatrixXd::Zero(1, d_t));
  }
  auto cat = graph.concat_cols({text_repr, image_repr});
  return graph.add_rowwise(graph.matmul(cat, graph.param(&classifier.weight)),
                           graph.param(&classifier.bias));
}

ad::Graph::Var build_spbs_loss(ad::Graph& graph, ad::Graph::Var hidden,
                               const Eigen::MatrixXd& raw_images, const std::set<int>& gold,
                               ProjectionParams& projection, ClassifierParams& classifier,
                               int inventory_size, bool use_images) {
  auto logits =
      build_fusion_scores(graph, hidden, raw_images, projection, classifier, use_images);
  return graph.multilabel_bce(logits, gold_row(gold, inventory_size),
                              static_cast<double>(inventory_size));
}

ad::Graph::Var build_mcsp_loss(ad::Graph& graph, ad::Graph::Var hidden,
                               const std::vector<int>& mask_rows,
                               const std::vector<std::set<int>>& targets, McspHeadParams& head,
                               int inventory_size) {
  if (mask_rows.empty() || mask_rows.size() != targets.size())
    throw ContractError("build_mcsp_loss: mask rows and targets misaligned");
  auto states = graph.gather_rows(hidden, mask_rows);
  auto logits = graph.add_rowwise(graph.matmul(states, graph.param(&head.weight)),
                                  graph.param(&head.bias));
  Eigen::MatrixXd target_rows(static_cast<Eigen::Index>(targets.size()), inventory_size);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (targets[i].empty()) throw ContractError("build_mcsp_loss: empty target set");
    target_rows.row(static_cast<Eigen::Index>(i)) = gold_row(targets[i], inventory_size).row(0);
  }
  return graph.multilabel_bce(logits, std::move(target_rows), static_cast<double>(inventory_size));
}

Eigen::VectorXd MsgiModel::score(const MultilingualSequence& seq,
                                 const Eigen::MatrixXd& raw_images) {
  EncodeResult enc = encoder->encode(seq);
  Eigen::VectorXd image_repr;
  if (use_images && raw_images.rows() > 0) {
    Eigen::MatrixXd projected = project_images(raw_images, projection);
    image_repr = attend_images(enc.text_representation, projected).image_representation;
  } else {
    image_repr = Eigen::VectorXd::Zero(enc.text_representation.size());
  }
  return predict_scores(enc.text_representation, image_repr, classifier);
}

std::vector<ad::Tensor*> MsgiModel::head_parameters() {
  std::vector<ad::Tensor*> out;
  for (ad::Tensor* t : projection.tensors()) out.push_back(t);
  for (ad::Tensor* t : classifier.tensors()) out.push_back(t);
  return out;
}

void save_model(const MsgiModel& model, const std::string& path) {
  CheckpointWriter writer;
  writer.header["format"] = "msgi-model";
  writer.header["d_img"] = model.d_img;
  writer.header["use_images"] = model.use_images;
  writer.header["languages"] = model.language_order;
  writer.header["no_synonym"] = model.no_synonym;
  writer.header["no_gloss"] = model.no_gloss;
  writer.header["sememe_labels"] = model.sememe_labels;
  writer.header["inventory_fingerprint"] = model.inventory_fingerprint;
  writer.header["config_hash"] = model.config_hash;
  writer.header["encoder"] = {
      {"kind", model.encoder->config().kind == EncoderKind::TinyTrainable ? "tiny-trainable"
                                                                          : "pretrained-adapter"},
      {"d_t", model.encoder->config().d_t},
      {"layers", model.encoder->config().layers},
      {"heads", model.encoder->config().heads},
      {"d_ff", model.encoder->config().d_ff},
      {"max_positions", model.encoder->config().max_positions},
      {"max_tokens", model.encoder->config().max_tokens},
      {"mask_symbol", model.encoder->config().mask_symbol},
      {"vocab", model.encoder->vocab().tokens()}};
  auto* encoder = const_cast<TextEncoder*>(model.encoder.get());
  for (ad::Tensor* t : encoder->parameters()) writer.add_tensor("encoder." + t->name, t->value);
  writer.add_tensor(model.projection.weight.name, model.projection.weight.value);
  writer.add_tensor(model.projection.bias.name, model.projection.bias.value);
  writer.add_tensor(model.classifier.weight.name, model.classifier.weight.value);
  writer.add_tensor(model.classifier.bias.name, model.classifier.bias.value);
  writer.save(path);
}

MsgiModel load_model(const std::string& path) {
  CheckpointReader reader = CheckpointReader::load(path);
  const auto& header = reader.header();
  if (!header.contains("format") || header["format"] != "msgi-model")
    throw ValidationError(path + ": not a model checkpoint");
  MsgiModel model;
  model.d_img = header.at("d_img").get<int>();
  model.use_images = header.at("use_images").get<bool>();
  model.language_order = header.at("languages").get<std::vector<std::string>>();
  model.no_synonym = header.at("no_synonym").get<bool>();
  model.no_gloss = header.at("no_gloss").get<bool>();
  model.sememe_labels = header.at("sememe_labels").get<std::vector<std::string>>();
  model.inventory_fingerprint = header.at("inventory_fingerprint").get<std::uint64_t>();
  model.config_hash = header.at("config_hash").get<std::uint64_t>();

  const auto& enc = header.at("encoder");
  EncoderConfig config;
  config.kind = enc.at("kind").get<std::string>() == "pretrained-adapter"
                    ? EncoderKind::PretrainedAdapter
                    : EncoderKind::TinyTrainable;
  config.checkpoint = config.kind == EncoderKind::PretrainedAdapter ? path : "";
  config.d_t = enc.at("d_t").get<int>();
  config.layers = enc.at("layers").get<int>();
  config.heads = enc.at("heads").get<int>();
  config.d_ff = enc.at("d_ff").get<int>();
  config.max_positions = enc.at("max_positions").get<int>();
  config.max_tokens = enc.at("max_tokens").get<int>();
  config.mask_symbol = enc.at("mask_symbol").get<std::string>();
  Vocabulary vocab = Vocabulary::from_tokens(enc.at("vocab").get<std::vector<std::string>>());
  model.encoder = std::make_unique<TextEncoder>(config, std::move(vocab), 0);
  for (ad::Tensor* t : model.encoder->parameters()) {
    const Eigen::MatrixXd& stored = reader.tensor("encoder." + t->name);
    if (stored.rows() != t->value.rows() || stored.cols() != t->value.cols())
      throw ValidationError(path + ": encoder tensor '" + t->name + "' has unexpected shape");
    t->value = stored;
  }
  int d_t = config.d_t;
  int inventory_size = static_cast<int>(model.sememe_labels.size());
  model.projection.weight = ad::Tensor("projection.weight", reader.tensor("projection.weight"));
  model.projection.bias = ad::Tensor("projection.bias", reader.tensor("projection.bias"));
  model.classifier.weight = ad::Tensor("classifier.weight", reader.tensor("classifier.weight"));
  model.classifier.bias = ad::Tensor("classifier.bias", reader.tensor("classifier.bias"));
  if (model.projection.weight.value.rows() != model.d_img ||
      model.projection.weight.value.cols() != d_t)
    throw ValidationError(path + ": projection shape mismatch");
  if (model.classifier.weight.value.rows() != 2 * d_t ||
      model.classifier.weight.value.cols() != inventory_size)
    throw ValidationError(path + ": classifier shape mismatch");
  return model;
}

void check_inventory(const MsgiModel& model, const SememeInventory& inventory) {
  if (model.inventory_fingerprint != inventory.fingerprint())
    throw ValidationError(
        "checkpoint was trained against a different sememe inventory; refusing to load");
}

}  // namespace spbs
