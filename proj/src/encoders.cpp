#include "spbs/encoders.hpp"

#include <algorithm>
#include <cmath>

#include "spbs/checkpoint.hpp"

namespace spbs {

void EncoderConfig::validate() const {
  if (d_t <= 0) throw ConfigError("encoder d_t must be positive");
  if (layers <= 0) throw ConfigError("encoder layers must be positive");
  if (heads <= 0 || d_t % heads != 0) throw ConfigError("heads must divide d_t");
  if (d_ff <= 0) throw ConfigError("encoder d_ff must be positive");
  if (max_positions <= 0 || max_tokens <= 0) throw ConfigError("length budget must be positive");
  if (kind == EncoderKind::PretrainedAdapter && checkpoint.empty())
    throw ConfigError("pretrained-adapter encoder requires a checkpoint path");
}

Vocabulary::Vocabulary() {
  insert(kUnknown);
  insert(kMaskToken);
}

void Vocabulary::insert(const std::string& token) {
  if (index_.count(token) > 0) return;
  index_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  max_token_bytes_ = std::max(max_token_bytes_, token.size());
}

Vocabulary Vocabulary::build(const std::vector<std::string>& texts,
                             const std::vector<std::string>& extra_tokens) {
  Vocabulary vocab;
  for (const auto& token : extra_tokens)
    if (!token.empty()) vocab.insert(token);
  for (const auto& text : texts) {
    for (const auto& chunk : split_ws(text)) {
      bool ascii = std::all_of(chunk.begin(), chunk.end(),
                               [](char c) { return (static_cast<unsigned char>(c) & 0x80) == 0; });
      if (ascii) {
        vocab.insert(chunk);
      } else {
        // Chinese glosses carry no word boundaries; index code points so any
        // segmentation can fall back to characters.
        std::size_t i = 0;
        while (i < chunk.size()) {
          std::size_t next = utf8_advance(chunk, i);
          vocab.insert(chunk.substr(i, next - i));
          i = next;
        }
      }
    }
  }
  return vocab;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  Vocabulary vocab;
  for (const auto& token : tokens) vocab.insert(token);
  return vocab;
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size()) throw ContractError("token id out of range");
  return tokens_[static_cast<std::size_t>(id)];
}

namespace {

// Greedy longest-match segmentation of one whitespace chunk. The canonical
// mask literal transcodes to the encoder's own mask symbol.
void segment_chunk(const std::string& text, std::size_t begin, std::size_t end,
                   const Vocabulary& vocab, const std::string& mask_symbol,
                   std::vector<TokenSpan>* out) {
  const std::string mask_literal = kMaskToken;
  int mask_id = vocab.id(mask_symbol);
  std::size_t pos = begin;
  std::size_t unk_start = std::string::npos;
  auto flush_unk = [&](std::size_t upto) {
    if (unk_start != std::string::npos) {
      out->push_back({vocab.unknown_id(), unk_start, upto});
      unk_start = std::string::npos;
    }
  };
  while (pos < end) {
    if (mask_id >= 0 && text.compare(pos, mask_literal.size(), mask_literal) == 0 &&
        pos + mask_literal.size() <= end) {
      flush_unk(pos);
      out->push_back({mask_id, pos, pos + mask_literal.size()});
      pos += mask_literal.size();
      continue;
    }
    std::size_t limit = std::min(vocab.max_token_bytes(), end - pos);
    int match_id = -1;
    std::size_t match_len = 0;
    for (std::size_t len = limit; len >= 1; --len) {
      int id = vocab.id(text.substr(pos, len));
      if (id >= 0) {
        match_id = id;
        match_len = len;
        break;
      }
    }
    if (match_id >= 0) {
      flush_unk(pos);
      out->push_back({match_id, pos, pos + match_len});
      pos += match_len;
    } else {
      if (unk_start == std::string::npos) unk_start = pos;
      pos = utf8_advance(text, pos);
    }
  }
  flush_unk(pos);
}

}  // namespace

std::vector<TokenSpan> tokenize(const std::string& text, const Vocabulary& vocab,
                                const std::string& mask_symbol) {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) {
      std::string chunk = text.substr(start, i - start);
      int whole = chunk == kMaskToken ? vocab.id(mask_symbol) : vocab.id(chunk);
      if (whole >= 0)
        out.push_back({whole, start, i});
      else
        segment_chunk(text, start, i, vocab, mask_symbol, &out);
    }
  }
  return out;
}

namespace {

ad::Tensor make_tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols, Rng* rng,
                       double stddev) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng->normal(0.0, stddev);
  return ad::Tensor(name, std::move(m));
}

ad::Tensor zeros_tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return ad::Tensor(name, Eigen::MatrixXd::Zero(rows, cols));
}

ad::Tensor ones_tensor(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
  return ad::Tensor(name, Eigen::MatrixXd::Ones(rows, cols));
}

}  // namespace

TextEncoder::TextEncoder(const EncoderConfig& config, Vocabulary vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  config_.validate();
  Rng rng(seed);
  const int d = config_.d_t;
  const double std0 = 0.02;
  token_embedding_ = make_tensor("tok_emb", vocab_.size(), d, &rng, std0);
  position_embedding_ = make_tensor("pos_emb", config_.max_positions, d, &rng, std0);
  layers_.resize(static_cast<std::size_t>(config_.layers));
  for (int l = 0; l < config_.layers; ++l) {
    std::string p = "layer" + std::to_string(l) + ".";
    Layer& layer = layers_[static_cast<std::size_t>(l)];
    layer.wq = make_tensor(p + "wq", d, d, &rng, std0);
    layer.bq = zeros_tensor(p + "bq", 1, d);
    layer.wk = make_tensor(p + "wk", d, d, &rng, std0);
    layer.bk = zeros_tensor(p + "bk", 1, d);
    layer.wv = make_tensor(p + "wv", d, d, &rng, std0);
    layer.bv = zeros_tensor(p + "bv", 1, d);
    layer.wo = make_tensor(p + "wo", d, d, &rng, std0);
    layer.bo = zeros_tensor(p + "bo", 1, d);
    layer.ln1_gain = ones_tensor(p + "ln1_gain", 1, d);
    layer.ln1_bias = zeros_tensor(p + "ln1_bias", 1, d);
    layer.ln2_gain = ones_tensor(p + "ln2_gain", 1, d);
    layer.ln2_bias = zeros_tensor(p + "ln2_bias", 1, d);
    layer.ffn_w1 = make_tensor(p + "ffn_w1", d, config_.d_ff, &rng, std0);
    layer.ffn_b1 = zeros_tensor(p + "ffn_b1", 1, config_.d_ff);
    layer.ffn_w2 = make_tensor(p + "ffn_w2", config_.d_ff, d, &rng, std0);
    layer.ffn_b2 = zeros_tensor(p + "ffn_b2", 1, d);
  }
  final_gain_ = ones_tensor("final_gain", 1, d);
  final_bias_ = zeros_tensor("final_bias", 1, d);
}

ad::Graph::Var TextEncoder::forward(ad::Graph& graph, const std::vector<int>& token_ids) {
  if (token_ids.empty()) throw ContractError("encoder forward: empty token sequence");
  if (static_cast<int>(token_ids.size()) > config_.max_positions)
    throw ContractError("encoder forward: sequence exceeds position table");
  const int d = config_.d_t;
  const int head_dim = d / config_.heads;
  const double attn_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<int> positions(token_ids.size());
  for (std::size_t i = 0; i < token_ids.size(); ++i) positions[i] = static_cast<int>(i);

  auto x = graph.add(graph.gather_rows(graph.param(&token_embedding_), token_ids),
                     graph.gather_rows(graph.param(&position_embedding_), positions));
  for (auto& layer : layers_) {
    auto h = graph.layer_norm(x, graph.param(&layer.ln1_gain), graph.param(&layer.ln1_bias));
    auto q = graph.add_rowwise(graph.matmul(h, graph.param(&layer.wq)), graph.param(&layer.bq));
    auto k = graph.add_rowwise(graph.matmul(h, graph.param(&layer.wk)), graph.param(&layer.bk));
    auto v = graph.add_rowwise(graph.matmul(h, graph.param(&layer.wv)), graph.param(&layer.bv));
    std::vector<ad::Graph::Var> head_outputs;
    for (int hd = 0; hd < config_.heads; ++hd) {
      auto qi = graph.slice_cols(q, hd * head_dim, head_dim);
      auto ki = graph.slice_cols(k, hd * head_dim, head_dim);
      auto vi = graph.slice_cols(v, hd * head_dim, head_dim);
      auto scores = graph.scale(graph.matmul(qi, graph.transpose(ki)), attn_scale);
      auto weights = graph.softmax_rows(scores);
      head_outputs.push_back(graph.matmul(weights, vi));
    }
    auto attn = graph.add_rowwise(
        graph.matmul(graph.concat_cols(head_outputs), graph.param(&layer.wo)),
        graph.param(&layer.bo));
    x = graph.add(x, attn);
    auto h2 = graph.layer_norm(x, graph.param(&layer.ln2_gain), graph.param(&layer.ln2_bias));
    auto f1 = graph.gelu(
        graph.add_rowwise(graph.matmul(h2, graph.param(&layer.ffn_w1)), graph.param(&layer.ffn_b1)));
    auto f2 = graph.add_rowwise(graph.matmul(f1, graph.param(&layer.ffn_w2)),
                                graph.param(&layer.ffn_b2));
    x = graph.add(x, f2);
  }
  return graph.layer_norm(x, graph.param(&final_gain_), graph.param(&final_bias_));
}

EncodeResult TextEncoder::encode_tokens(std::vector<TokenSpan> tokens, bool truncated) {
  if (tokens.empty()) throw ValidationError("cannot encode an empty sequence");
  int budget = std::min(config_.max_tokens, config_.max_positions);
  if (static_cast<int>(tokens.size()) > budget) {
    tokens.resize(static_cast<std::size_t>(budget));
    truncated = true;
  }
  std::vector<int> ids(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) ids[i] = tokens[i].id;
  ad::Graph graph;
  auto hidden = forward(graph, ids);
  EncodeResult result;
  result.hidden_states = graph.value(hidden);
  result.text_representation = result.hidden_states.row(0).transpose();
  result.tokens = std::move(tokens);
  result.truncated = truncated;
  return result;
}

EncodeResult TextEncoder::encode(const std::string& text) {
  return encode_tokens(tokenize(text, vocab_, config_.mask_symbol), false);
}

EncodeResult TextEncoder::encode(const MultilingualSequence& seq) {
  auto [cut, truncated] = truncate_to_budget(seq, vocab_, std::min(config_.max_tokens, config_.max_positions),
                                             config_.mask_symbol);
  return encode_tokens(tokenize(cut.text, vocab_, config_.mask_symbol), truncated);
}

EncodeResult TextEncoder::encode(const MaskedSequence& seq) {
  return encode_tokens(tokenize(seq.text, vocab_, config_.mask_symbol), false);
}

std::vector<ad::Tensor*> TextEncoder::parameters() {
  std::vector<ad::Tensor*> out{&token_embedding_, &position_embedding_};
  for (auto& layer : layers_) {
    for (ad::Tensor* t : {&layer.wq, &layer.bq, &layer.wk, &layer.bk, &layer.wv, &layer.bv,
                          &layer.wo, &layer.bo, &layer.ln1_gain, &layer.ln1_bias, &layer.ln2_gain,
                          &layer.ln2_bias, &layer.ffn_w1, &layer.ffn_b1, &layer.ffn_w2,
                          &layer.ffn_b2})
      out.push_back(t);
  }
  out.push_back(&final_gain_);
  out.push_back(&final_bias_);
  return out;
}

std::uint64_t TextEncoder::parameter_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double d = m(r, c);
        h ^= fnv1a64(&d, sizeof(d));
        h *= 0x100000001b3ULL;
      }
  };
  mix(token_embedding_.value);
  mix(position_embedding_.value);
  for (const auto& layer : layers_) {
    for (const ad::Tensor* t : {&layer.wq, &layer.bq, &layer.wk, &layer.bk, &layer.wv, &layer.bv,
                                &layer.wo, &layer.bo, &layer.ln1_gain, &layer.ln1_bias,
                                &layer.ln2_gain, &layer.ln2_bias, &layer.ffn_w1, &layer.ffn_b1,
                                &layer.ffn_w2, &layer.ffn_b2})
      mix(t->value);
  }
  mix(final_gain_.value);
  mix(final_bias_.value);
  return h;
}

void TextEncoder::save(const std::string& path, std::uint64_t inventory_fingerprint) const {
  CheckpointWriter writer;
  writer.header["format"] = "text-encoder";
  writer.header["kind"] =
      config_.kind == EncoderKind::TinyTrainable ? "tiny-trainable" : "pretrained-adapter";
  writer.header["d_t"] = config_.d_t;
  writer.header["layers"] = config_.layers;
  writer.header["heads"] = config_.heads;
  writer.header["d_ff"] = config_.d_ff;
  writer.header["max_positions"] = config_.max_positions;
  writer.header["max_tokens"] = config_.max_tokens;
  writer.header["mask_symbol"] = config_.mask_symbol;
  writer.header["vocab"] = vocab_.tokens();
  writer.header["inventory_fingerprint"] = inventory_fingerprint;
  auto* self = const_cast<TextEncoder*>(this);
  for (ad::Tensor* t : self->parameters()) writer.add_tensor(t->name, t->value);
  writer.save(path);
}

std::unique_ptr<TextEncoder> TextEncoder::load(const std::string& path) {
  CheckpointReader reader = CheckpointReader::load(path);
  const auto& header = reader.header();
  if (!header.contains("format") || header["format"] != "text-encoder")
    throw ValidationError(path + ": not a text-encoder checkpoint");
  EncoderConfig config;
  config.kind = header.at("kind").get<std::string>() == "pretrained-adapter"
                    ? EncoderKind::PretrainedAdapter
                    : EncoderKind::TinyTrainable;
  config.checkpoint = path;
  config.d_t = header.at("d_t").get<int>();
  config.layers = header.at("layers").get<int>();
  config.heads = header.at("heads").get<int>();
  config.d_ff = header.at("d_ff").get<int>();
  config.max_positions = header.at("max_positions").get<int>();
  config.max_tokens = header.at("max_tokens").get<int>();
  config.mask_symbol = header.at("mask_symbol").get<std::string>();
  Vocabulary vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  auto encoder = std::make_unique<TextEncoder>(config, std::move(vocab), 0);
  encoder->inventory_fingerprint_ = header.value("inventory_fingerprint", std::uint64_t{0});
  for (ad::Tensor* t : encoder->parameters()) {
    const Eigen::MatrixXd& stored = reader.tensor(t->name);
    if (stored.rows() != t->value.rows() || stored.cols() != t->value.cols())
      throw ValidationError(path + ": tensor '" + t->name + "' has unexpected shape");
    t->value = stored;
    t->grad = Eigen::MatrixXd::Zero(stored.rows(), stored.cols());
  }
  return encoder;
}

std::pair<MultilingualSequence, bool> truncate_to_budget(const MultilingualSequence& seq,
                                                         const Vocabulary& vocab, int max_tokens,
                                                         const std::string& mask_symbol) {
  auto count = [&](const std::string& text) {
    return static_cast<int>(tokenize(text, vocab, mask_symbol).size());
  };
  if (count(seq.text) <= max_tokens) return {seq, false};

  MultilingualSequence cut = seq;
  bool truncated = true;
  // Whole trailing language segments go first.
  while (cut.language_spans.size() > 1 && count(cut.text) > max_tokens) {
    cut.language_spans.pop_back();
    std::size_t end = cut.language_spans.back().segment.end;
    cut.text = cut.text.substr(0, end);
  }
  // Then shorten the last gloss, never splitting a separator token.
  while (count(cut.text) > max_tokens) {
    LanguageSpans& last = cut.language_spans.back();
    if (!last.gloss_region || last.gloss_region->empty()) break;
    auto tokens = tokenize(cut.text, vocab, mask_symbol);
    std::vector<TokenSpan> gloss_tokens;
    for (const auto& t : tokens)
      if (t.begin >= last.gloss_region->begin && t.end <= last.gloss_region->end)
        gloss_tokens.push_back(t);
    if (gloss_tokens.size() <= 1) break;
    int excess = static_cast<int>(tokens.size()) - max_tokens;
    int keep = std::max(1, static_cast<int>(gloss_tokens.size()) - excess);
    std::size_t new_end = gloss_tokens[static_cast<std::size_t>(keep - 1)].end;
    std::size_t removed = last.gloss_region->end - new_end;
    cut.text = cut.text.substr(0, new_end) + cut.text.substr(last.gloss_region->end);
    last.gloss_region->end = new_end;
    last.segment.end -= removed;
    if (keep == 1 && count(cut.text) > max_tokens) break;
  }
  return {cut, truncated};
}

std::vector<int> mask_token_indices(const std::vector<TokenSpan>& tokens,
                                    const MaskedSequence& masked) {
  std::vector<int> out;
  out.reserve(masked.targets.size());
  for (const auto& target : masked.targets) {
    int found = -1;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (tokens[i].begin == target.position) {
        found = static_cast<int>(i);
        break;
      }
    }
    if (found < 0) throw ContractError("mask target position has no aligned token");
    out.push_back(found);
  }
  return out;
}

Eigen::MatrixXd ImageEmbeddingSet::matrix() const {
  if (embeddings.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(embeddings.size()), embeddings[0].size());
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = embeddings[i].transpose();
  return m;
}

bool StoreEmbeddingProvider::resolve(const std::string& id, Eigen::VectorXd* out) const {
  if (!store_->has(id)) return false;
  *out = store_->get(id);
  return true;
}

EmbedImagesResult embed_images(const std::string& synset_id,
                               const std::vector<std::string>& image_ids,
                               const ImageEmbeddingProvider& provider, bool strict) {
  EmbedImagesResult result;
  result.set.synset_id = synset_id;
  for (const auto& id : image_ids) {
    Eigen::VectorXd v;
    if (provider.resolve(id, &v)) {
      result.set.ids.push_back(id);
      result.set.embeddings.push_back(std::move(v));
      result.set.provenance.push_back(ImageProvenance::Corpus);
    } else if (strict) {
      throw ValidationError("unresolvable image id '" + id + "' for synset '" + synset_id + "'");
    } else {
      result.skipped.push_back(id);
    }
  }
  return result;
}

}  // namespace spbs
