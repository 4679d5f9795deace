#pragma once

#include <Eigen/Core>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spbs/autodiff.hpp"
#include "spbs/dataset.hpp"
#include "spbs/sequencing.hpp"

namespace spbs {

enum class EncoderKind { TinyTrainable, PretrainedAdapter };

struct EncoderConfig {
  EncoderKind kind = EncoderKind::TinyTrainable;
  int d_t = 64;
  int layers = 2;
  int heads = 4;
  int d_ff = 256;
  int max_positions = 256;
  // Token budget for one sequence; over-length sequences are truncated by
  // whole trailing language segments first, then by the last gloss.
  int max_tokens = 256;
  // Adapters may use a different mask literal than the canonical "[MASK]".
  std::string mask_symbol = "[MASK]";
  std::string checkpoint;  // weights source for PretrainedAdapter

  void validate() const;
};

// Word-level vocabulary. Chunks that are not whole vocabulary entries are
// segmented by greedy longest match (Chinese glosses carry no spaces), and
// unmatched runs map to [UNK].
class Vocabulary {
 public:
  static constexpr const char* kUnknown = "[UNK]";

  Vocabulary();
  static Vocabulary build(const std::vector<std::string>& texts,
                          const std::vector<std::string>& extra_tokens = {});
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int id(const std::string& token) const;
  int unknown_id() const { return id(kUnknown); }
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  std::size_t max_token_bytes() const { return max_token_bytes_; }

 private:
  void insert(const std::string& token);
  std::vector<std::string> tokens_;
  std::map<std::string, int> index_;
  std::size_t max_token_bytes_ = 0;
};

struct TokenSpan {
  int id = 0;
  std::size_t begin = 0;  // byte offsets into the canonical string
  std::size_t end = 0;
};

// Tokenizes a canonical sequence string; `mask_symbol` is the encoder's own
// mask literal that canonical "[MASK]" tokens transcode to.
std::vector<TokenSpan> tokenize(const std::string& text, const Vocabulary& vocab,
                                const std::string& mask_symbol = kMaskToken);

struct EncodeResult {
  Eigen::VectorXd text_representation;  // first hidden state
  Eigen::MatrixXd hidden_states;        // tokens x d_t
  std::vector<TokenSpan> tokens;        // offset map into the canonical string
  bool truncated = false;
};

// Trainable transformer encoder behind the text-encoder contract. The
// tiny-trainable kind is initialized fresh from a seed; the pretrained-adapter
// kind loads weights, vocabulary and config from a checkpoint file.
class TextEncoder {
 public:
  TextEncoder(const EncoderConfig& config, Vocabulary vocab, std::uint64_t seed);

  static std::unique_ptr<TextEncoder> load(const std::string& path);
  void save(const std::string& path, std::uint64_t inventory_fingerprint) const;

  const EncoderConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  std::uint64_t saved_inventory_fingerprint() const { return inventory_fingerprint_; }

  // Graph-building forward; rows of the result are per-token hidden states.
  ad::Graph::Var forward(ad::Graph& graph, const std::vector<int>& token_ids);

  EncodeResult encode(const std::string& text);
  EncodeResult encode(const MultilingualSequence& seq);
  EncodeResult encode(const MaskedSequence& seq);

  std::vector<ad::Tensor*> parameters();
  std::uint64_t parameter_hash() const;

 private:
  struct Layer {
    ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    ad::Tensor ln1_gain, ln1_bias, ln2_gain, ln2_bias;
    ad::Tensor ffn_w1, ffn_b1, ffn_w2, ffn_b2;
  };

  EncodeResult encode_tokens(std::vector<TokenSpan> tokens, bool truncated);

  EncoderConfig config_;
  Vocabulary vocab_;
  ad::Tensor token_embedding_;     // vocab x d_t
  ad::Tensor position_embedding_;  // max_positions x d_t
  std::vector<Layer> layers_;
  ad::Tensor final_gain_, final_bias_;
  std::uint64_t inventory_fingerprint_ = 0;
};

// Applies the over-length policy: drop whole trailing language segments, then
// shorten the last gloss. Returns the (possibly shorter) sequence and whether
// anything was cut.
std::pair<MultilingualSequence, bool> truncate_to_budget(const MultilingualSequence& seq,
                                                         const Vocabulary& vocab, int max_tokens,
                                                         const std::string& mask_symbol = kMaskToken);

// Token indices of the mask positions of a masked sequence, in target order.
std::vector<int> mask_token_indices(const std::vector<TokenSpan>& tokens,
                                    const MaskedSequence& masked);

enum class ImageProvenance { Corpus, External };

struct ImageEmbeddingSet {
  std::string synset_id;
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> embeddings;
  std::vector<ImageProvenance> provenance;

  std::size_t size() const { return ids.size(); }
  Eigen::MatrixXd matrix() const;  // size x dim
};

// Source of frozen per-image embedding vectors.
class ImageEmbeddingProvider {
 public:
  virtual ~ImageEmbeddingProvider() = default;
  virtual int dim() const = 0;
  virtual bool resolve(const std::string& id, Eigen::VectorXd* out) const = 0;
};

class StoreEmbeddingProvider : public ImageEmbeddingProvider {
 public:
  explicit StoreEmbeddingProvider(const EmbeddingStore* store) : store_(store) {}
  int dim() const override { return store_->dim(); }
  bool resolve(const std::string& id, Eigen::VectorXd* out) const override;

 private:
  const EmbeddingStore* store_;
};

struct EmbedImagesResult {
  ImageEmbeddingSet set;
  std::vector<std::string> skipped;  // unresolvable ids (non-strict mode)
};

EmbedImagesResult embed_images(const std::string& synset_id, const std::vector<std::string>& image_ids,
                               const ImageEmbeddingProvider& provider, bool strict = false);

}  // namespace spbs
