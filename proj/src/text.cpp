#include <ntx/text.hpp>

#include <ntx/core.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace ntx {

namespace {

// Unicode code points with the White_Space property.
bool is_unicode_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D:
    case 0x20: case 0x85: case 0xA0: case 0x1680:
    case 0x2000: case 0x2001: case 0x2002: case 0x2003: case 0x2004:
    case 0x2005: case 0x2006: case 0x2007: case 0x2008: case 0x2009:
    case 0x200A: case 0x2028: case 0x2029: case 0x202F: case 0x205F:
    case 0x3000:
      return true;
    default:
      return false;
  }
}

// Decodes one UTF-8 code point starting at text[i]; advances i past it.
// Malformed bytes are passed through as single-byte code points so that
// arbitrary input never throws.
char32_t next_code_point(const std::string& text, std::size_t& i) {
  const auto byte = [&](std::size_t k) {
    return static_cast<unsigned char>(text[k]);
  };
  unsigned char b0 = byte(i);
  std::size_t len = 1;
  char32_t cp = b0;
  if ((b0 & 0x80u) == 0x00u) {
    len = 1;
    cp = b0;
  } else if ((b0 & 0xE0u) == 0xC0u) {
    len = 2;
    cp = b0 & 0x1Fu;
  } else if ((b0 & 0xF0u) == 0xE0u) {
    len = 3;
    cp = b0 & 0x0Fu;
  } else if ((b0 & 0xF8u) == 0xF0u) {
    len = 4;
    cp = b0 & 0x07u;
  } else {
    ++i;
    return b0;
  }
  if (i + len > text.size()) {
    ++i;
    return b0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    unsigned char bk = byte(i + k);
    if ((bk & 0xC0u) != 0x80u) {
      ++i;
      return b0;
    }
    cp = (cp << 6) | (bk & 0x3Fu);
  }
  i += len;
  return cp;
}

bool is_ascii_punct(char32_t c) {
  return c < 128 && std::ispunct(static_cast<int>(c));
}

std::string strip_edge_punct(const std::string& token) {
  // Work at the byte level but only strip single-byte (ASCII) punctuation,
  // so multi-byte characters are never split.
  std::size_t lo = 0, hi = token.size();
  while (lo < hi && is_ascii_punct(static_cast<unsigned char>(token[lo]))) ++lo;
  while (hi > lo && is_ascii_punct(static_cast<unsigned char>(token[hi - 1])))
    --hi;
  return token.substr(lo, hi - lo);
}

bool reserved_token(const std::string& t) {
  return t == kUnkToken || t == kBosToken || t == kEosToken;
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  std::size_t i = 0;
  auto flush = [&] {
    if (cur.empty()) return;
    std::string t = strip_edge_punct(cur);
    cur.clear();
    if (!t.empty()) out.push_back(std::move(t));
  };
  while (i < text.size()) {
    std::size_t start = i;
    char32_t cp = next_code_point(text, i);
    if (is_unicode_space(cp)) {
      flush();
    } else if (cp < 128) {
      cur.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[start]))));
    } else {
      cur.append(text, start, i - start);
    }
  }
  flush();
  return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '.' || c == '!' || c == '?') {
      if (cur.find_first_not_of(" \t\r\n") != std::string::npos)
        out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (cur.find_first_not_of(" \t\r\n") != std::string::npos) out.push_back(cur);
  return out;
}

std::vector<std::vector<std::string>> sentence_tokenize(
    const std::string& text) {
  std::vector<std::vector<std::string>> out;
  for (const std::string& sent : split_sentences(text)) {
    std::vector<std::string> toks = tokenize(sent);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

int Vocabulary::bos_index() const {
  auto it = token_to_index.find(kBosToken);
  require(it != token_to_index.end(), "vocabulary was built without <bos>");
  return it->second;
}

int Vocabulary::eos_index() const {
  auto it = token_to_index.find(kEosToken);
  require(it != token_to_index.end(), "vocabulary was built without <eos>");
  return it->second;
}

int Vocabulary::index_of(const std::string& token) const {
  auto it = token_to_index.find(token);
  return it == token_to_index.end() ? unk_index() : it->second;
}

const std::string& Vocabulary::token_at(int index) const {
  require(index >= 1 && index <= size(),
          "token_at: index " + std::to_string(index) +
              " outside [1, " + std::to_string(size()) + "]");
  return index_to_token[static_cast<std::size_t>(index)];
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                            std::size_t max_size, bool add_bos_eos) {
  require(!docs.empty(), "build_vocabulary: empty corpus");
  // std::map keys are already in lexicographic order, which makes the
  // frequency sort's tie-break a stable no-op.
  std::map<std::string, std::size_t> counts;
  for (const auto& doc : docs)
    for (const auto& tok : doc)
      if (!tok.empty() && !reserved_token(tok)) ++counts[tok];
  require(!counts.empty(), "build_vocabulary: corpus has no tokens");

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) {
                     return a.second > b.second;
                   });
  if (max_size > 0 && ranked.size() > max_size) ranked.resize(max_size);

  Vocabulary vocab;
  vocab.index_to_token.push_back("");  // padding slot, no token
  for (const auto& [tok, cnt] : ranked) {
    (void)cnt;
    vocab.token_to_index[tok] =
        static_cast<int>(vocab.index_to_token.size());
    vocab.index_to_token.push_back(tok);
  }
  auto push_special = [&](const char* tok) {
    vocab.token_to_index[tok] =
        static_cast<int>(vocab.index_to_token.size());
    vocab.index_to_token.push_back(tok);
  };
  if (add_bos_eos) {
    push_special(kBosToken);
    push_special(kEosToken);
  }
  push_special(kUnkToken);
  return vocab;
}

void save_vocabulary(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path);
  require(out.good(), "cannot open for writing: " + path);
  for (int i = 1; i <= vocab.size(); ++i)
    out << vocab.index_to_token[static_cast<std::size_t>(i)] << '\t' << i
        << '\n';
  require(out.good(), "write failed: " + path);
}

Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open vocabulary file: " + path);
  std::vector<std::pair<int, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected \"token<TAB>index\"");
    std::string tok = line.substr(0, tab);
    int idx = 0;
    try {
      idx = std::stoi(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": bad index field");
    }
    if (idx < 1)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": index must be >= 1");
    entries.emplace_back(idx, std::move(tok));
  }
  if (entries.empty()) throw ParseError(path + ": empty vocabulary file");
  std::sort(entries.begin(), entries.end());
  Vocabulary vocab;
  vocab.index_to_token.push_back("");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].first != static_cast<int>(i) + 1)
      throw ParseError(path + ": indices are not contiguous from 1 (saw " +
                       std::to_string(entries[i].first) + " at rank " +
                       std::to_string(i + 1) + ")");
    vocab.token_to_index[entries[i].second] = entries[i].first;
    vocab.index_to_token.push_back(entries[i].second);
  }
  require(vocab.token_to_index.size() == entries.size(),
          path + ": duplicate tokens in vocabulary file");
  return vocab;
}

std::uint64_t vocab_hash(const Vocabulary& vocab) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64-bit offset basis
  auto mix = [&](const char* data, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(data[i]);
      h *= 1099511628211ull;
    }
  };
  for (int i = 1; i <= vocab.size(); ++i) {
    const std::string& tok = vocab.index_to_token[static_cast<std::size_t>(i)];
    std::string line = tok + "\t" + std::to_string(i) + "\n";
    mix(line.data(), line.size());
  }
  return h;
}

EncodedDoc encode(const std::vector<std::string>& tokens,
                  const Vocabulary& vocab, std::size_t s) {
  require(s >= 1, "encode: s must be >= 1");
  EncodedDoc doc;
  doc.original_length = tokens.size();
  doc.indices.assign(s, 0);
  std::size_t n = std::min(tokens.size(), s);
  for (std::size_t t = 0; t < n; ++t)
    doc.indices[t] = vocab.index_of(tokens[t]);
  return doc;
}

std::vector<int> encode_unpadded(const std::vector<std::string>& tokens,
                                 const Vocabulary& vocab) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& tok : tokens) out.push_back(vocab.index_of(tok));
  return out;
}

std::vector<std::string> decode(const std::vector<int>& indices,
                                const Vocabulary& vocab) {
  std::vector<std::string> out;
  for (int idx : indices) {
    if (idx == 0) continue;  // padding
    out.push_back(vocab.token_at(idx));
  }
  return out;
}

std::vector<std::string> decode(const EncodedDoc& doc,
                                const Vocabulary& vocab) {
  return decode(doc.indices, vocab);
}

EmbeddingTable make_embedding(const Vocabulary& vocab, Index d, Rng& rng,
                              bool trainable) {
  require(d >= 1, "make_embedding: d must be >= 1");
  EmbeddingTable table;
  table.trainable = trainable;
  table.matrix.resize(vocab.size() + 1, d);
  glorot_fill(table.matrix, rng);
  table.matrix.row(0).setZero();
  return table;
}

Matrix lookup(const std::vector<int>& indices, const EmbeddingTable& table) {
  Matrix out(static_cast<Index>(indices.size()), table.dim());
  const Index v = table.vocab_size();
  for (std::size_t t = 0; t < indices.size(); ++t) {
    int idx = indices[t];
    require(idx >= 0 && idx <= v,
            "lookup: index " + std::to_string(idx) + " outside [0, " +
                std::to_string(v) + "]");
    out.row(static_cast<Index>(t)) = table.matrix.row(idx);
  }
  return out;
}

Matrix lookup(const EncodedDoc& doc, const EmbeddingTable& table) {
  return lookup(doc.indices, table);
}

EmbeddingTable load_pretrained(const std::string& path,
                               const Vocabulary& vocab, Index d, Rng& rng,
                               bool trainable) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open embedding file: " + path);

  EmbeddingTable table = make_embedding(vocab, d, rng, trainable);

  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line))
    throw ParseError(path + ":1: missing word2vec header");
  ++lineno;
  std::istringstream header(line);
  std::size_t count = 0;
  Index file_dim = 0;
  if (!(header >> count >> file_dim))
    throw ParseError(path + ":1: header must be \"count dim\"");
  if (file_dim != d)
    throw ParseError(path + ":1: embedding dim " + std::to_string(file_dim) +
                     " does not match requested " + std::to_string(d));

  std::size_t seen = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok))
      throw ParseError(path + ":" + std::to_string(lineno) + ": empty line");
    Vector vec(d);
    for (Index j = 0; j < d; ++j) {
      if (!(ls >> vec(j)))
        throw ParseError(path + ":" + std::to_string(lineno) +
                         ": expected " + std::to_string(d) +
                         " floats after token");
    }
    double extra;
    if (ls >> extra)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": more than " + std::to_string(d) + " floats");
    ++seen;
    auto it = vocab.token_to_index.find(tok);
    if (it != vocab.token_to_index.end())
      table.matrix.row(it->second) = vec.transpose();
  }
  if (seen != count)
    throw ParseError(path + ": header count " + std::to_string(count) +
                     " does not match " + std::to_string(seen) + " rows");
  table.matrix.row(0).setZero();
  return table;
}

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw ParseError("cannot open corpus file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

std::vector<LabeledDoc> read_labeled_corpus(const std::string& path) {
  std::vector<LabeledDoc> docs;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected \"<label>\\t<text>\"");
    LabeledDoc doc;
    try {
      doc.label = std::stoi(line.substr(0, tab));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": label is not an integer");
    }
    doc.raw_text = line.substr(tab + 1);
    doc.tokens = tokenize(doc.raw_text);
    docs.push_back(std::move(doc));
  }
  if (docs.empty()) throw ParseError(path + ": empty corpus");
  return docs;
}

std::vector<ParallelPair> read_parallel_corpus(const std::string& path) {
  std::vector<ParallelPair> pairs;
  std::size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    if (line.empty()) continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected \"<source>\\t<target>\"");
    ParallelPair pair;
    pair.source = tokenize(line.substr(0, tab));
    pair.target = tokenize(line.substr(tab + 1));
    pairs.push_back(std::move(pair));
  }
  if (pairs.empty()) throw ParseError(path + ": empty corpus");
  return pairs;
}

std::vector<std::vector<std::string>> read_plain_corpus(
    const std::string& path) {
  std::vector<std::vector<std::string>> docs;
  for (const std::string& line : read_lines(path)) {
    if (line.empty()) continue;
    docs.push_back(tokenize(line));
  }
  if (docs.empty()) throw ParseError(path + ": empty corpus");
  return docs;
}

}  // namespace ntx
