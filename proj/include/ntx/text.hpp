#pragma once

#include <ntx/types.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace ntx {

// --- tokenization ---------------------------------------------------------

// Lowercases ASCII letters, splits on Unicode whitespace, strips leading and
// trailing punctuation from each token. Tokens that become empty are dropped.
std::vector<std::string> tokenize(const std::string& text);

// Splits raw text into sentence substrings on '.', '!', '?'. Terminators are
// consumed; empty sentences are dropped.
std::vector<std::string> split_sentences(const std::string& text);

// split_sentences followed by tokenize; sentences with no surviving tokens
// are dropped.
std::vector<std::vector<std::string>> sentence_tokenize(const std::string& text);

// --- vocabulary ------------------------------------------------------------

// Indices: 0 is reserved for padding and maps to no token. Real tokens occupy
// 1..K ranked by descending frequency (ties lexicographic). When requested,
// <bos> and <eos> follow at K+1 and K+2. <unk> is always the last index V, so
// out-of-vocabulary tokens keep their own trainable embedding row.
struct Vocabulary {
  std::unordered_map<std::string, int> token_to_index;
  std::vector<std::string> index_to_token;  // size V+1; [0] unused by tokens

  int size() const { return static_cast<int>(index_to_token.size()) - 1; }
  int unk_index() const { return size(); }
  bool has_specials() const { return token_to_index.count("<bos>") > 0; }
  int bos_index() const;
  int eos_index() const;

  // UNK index for tokens not in the map.
  int index_of(const std::string& token) const;
  // Token at a nonzero index; throws ContractError out of range or for 0.
  const std::string& token_at(int index) const;
};

inline constexpr const char* kUnkToken = "<unk>";
inline constexpr const char* kBosToken = "<bos>";
inline constexpr const char* kEosToken = "<eos>";

// max_size == 0 means unlimited; it bounds real tokens only (specials and
// <unk> are always appended). Throws ContractError on an empty corpus.
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                            std::size_t max_size = 0,
                            bool add_bos_eos = false);

void save_vocabulary(const Vocabulary& vocab, const std::string& path);
Vocabulary load_vocabulary(const std::string& path);

// FNV-1a over the canonical "token\tindex\n" serialization, indices 1..V.
std::uint64_t vocab_hash(const Vocabulary& vocab);

// --- encoding --------------------------------------------------------------

struct EncodedDoc {
  std::vector<int> indices;        // fixed length s, right-padded with 0
  int label = -1;                  // -1 when absent
  std::size_t original_length = 0; // pre-truncation token count
};

// Keeps the first min(len, s) tokens, zero-pads the rest.
EncodedDoc encode(const std::vector<std::string>& tokens,
                  const Vocabulary& vocab, std::size_t s);

// Unpadded index sequence (for variable-length sequence models).
std::vector<int> encode_unpadded(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab);

// Drops padding, maps indices back to tokens (<unk> included literally).
std::vector<std::string> decode(const EncodedDoc& doc, const Vocabulary& vocab);
std::vector<std::string> decode(const std::vector<int>& indices,
                                const Vocabulary& vocab);

// --- embeddings ------------------------------------------------------------

struct EmbeddingTable {
  Matrix matrix;          // (V+1) x d; row 0 all-zeros (padding)
  bool trainable = true;  // non-static vs static
  Index dim() const { return matrix.cols(); }
  Index vocab_size() const { return matrix.rows() - 1; }
};

// Random init for every row but the zeroed padding row.
EmbeddingTable make_embedding(const Vocabulary& vocab, Index d, Rng& rng,
                              bool trainable = true);

// Row t of the result is the table row for doc.indices[t]; padding rows are
// zero. Throws ContractError on out-of-range indices.
Matrix lookup(const EncodedDoc& doc, const EmbeddingTable& table);
Matrix lookup(const std::vector<int>& indices, const EmbeddingTable& table);

// word2vec text format: header "count dim", then "token v1 ... vd" lines.
// Tokens present in the file get the file vector; the rest are random-
// initialized; row 0 is forced to zeros. Throws ParseError (with the line
// number) on malformed lines or a dim mismatch.
EmbeddingTable load_pretrained(const std::string& path,
                               const Vocabulary& vocab, Index d, Rng& rng,
                               bool trainable = true);

// --- corpus files ----------------------------------------------------------

struct LabeledDoc {
  int label = -1;
  std::vector<std::string> tokens;
  std::string raw_text;  // original text half of the line (for sentence split)
};

struct ParallelPair {
  std::vector<std::string> source;
  std::vector<std::string> target;
};

// "<label>\t<text>", one document per line.
std::vector<LabeledDoc> read_labeled_corpus(const std::string& path);
// "<source>\t<target>", one pair per line.
std::vector<ParallelPair> read_parallel_corpus(const std::string& path);
// One document per line, no label column.
std::vector<std::vector<std::string>> read_plain_corpus(const std::string& path);

}  // namespace ntx
