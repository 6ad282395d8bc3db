#include "mt/tokenizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "mt/error.hpp"
#include "mt/utf8.hpp"

namespace mt {

namespace {

constexpr const char* kSentinel = "\xe2\x96\x81";  // U+2581, word boundary
constexpr size_t kSentinelBytes = 3;
constexpr const char* kSpecialSurfaces[SubwordVocab::kNumSpecials] = {
    "<pad>", "<unk>", "<s>", "</s>"};
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Prepends the boundary sentinel and replaces every space with it.
std::string mark_boundaries(const std::string& s) {
  std::string out = kSentinel;
  for (char c : s) {
    if (c == ' ') {
      out += kSentinel;
    } else {
      out += c;
    }
  }
  return out;
}

// Splits the marked string before each sentinel, so every pretoken starts
// with one. Pieces never span pretoken boundaries, which keeps per-pretoken
// Viterbi globally optimal.
std::vector<std::string> pretokenize(const std::string& sentence) {
  const std::string marked = mark_boundaries(sentence);
  std::vector<std::string> words;
  size_t start = 0;
  size_t search = kSentinelBytes;
  while (true) {
    const size_t next = marked.find(kSentinel, search);
    if (next == std::string::npos) {
      words.push_back(marked.substr(start));
      break;
    }
    words.push_back(marked.substr(start, next - start));
    start = next;
    search = next + kSentinelBytes;
  }
  return words;
}

void require_utf8(const std::string& text) {
  size_t bad = 0;
  if (!utf8_decompose(text, nullptr, &bad)) {
    std::ostringstream os;
    os << "invalid UTF-8 at byte offset " << bad;
    throw data_error(os.str());
  }
}

std::string escape_surface(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_surface(const std::string& s, const std::string& where) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) throw data_error("dangling escape in " + where);
    ++i;
    switch (s[i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      default: throw data_error("unknown escape in " + where);
    }
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, const std::string& where) {
  double value = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw data_error("bad number '" + s + "' in " + where);
  }
  return value;
}

}  // namespace

void SubwordVocab::finalize() {
  index_.clear();
  std::set<std::string> seen;
  for (int i = 0; i < kNumSpecials; ++i) seen.insert(kSpecialSurfaces[i]);
  for (const auto& tag : lang_tags) {
    if (!seen.insert(tag).second) {
      throw config_error("duplicate vocab surface: " + tag);
    }
  }
  min_piece_log_prob_ = 0.0;
  max_piece_codepoints_ = 0;
  for (size_t i = 0; i < pieces.size(); ++i) {
    const auto& p = pieces[i];
    if (p.surface.empty()) throw config_error("empty piece surface");
    if (!std::isfinite(p.log_prob) || p.log_prob > 0.0) {
      throw config_error("piece '" + p.surface +
                         "' has invalid log_prob (must be finite and <= 0)");
    }
    if (!seen.insert(p.surface).second) {
      throw config_error("duplicate vocab surface: " + p.surface);
    }
    index_[p.surface] = piece_offset() + static_cast<int>(i);
    min_piece_log_prob_ = std::min(min_piece_log_prob_, p.log_prob);
    max_piece_codepoints_ =
        std::max(max_piece_codepoints_, utf8_length(p.surface));
  }
}

int SubwordVocab::tag_id(const std::string& lang) const {
  const std::string bracketed = "<" + lang + ">";
  for (size_t i = 0; i < lang_tags.size(); ++i) {
    if (lang_tags[i] == bracketed || lang_tags[i] == lang) {
      return kNumSpecials + static_cast<int>(i);
    }
  }
  throw config_error("no language tag for '" + lang + "' in vocab");
}

const std::string& SubwordVocab::surface(int id) const {
  static const std::string specials[kNumSpecials] = {"<pad>", "<unk>", "<s>",
                                                     "</s>"};
  if (id < 0 || static_cast<size_t>(id) >= size()) {
    throw data_error("vocab id " + std::to_string(id) + " out of range");
  }
  if (id < kNumSpecials) return specials[id];
  if (id < piece_offset()) return lang_tags[id - kNumSpecials];
  return pieces[id - piece_offset()].surface;
}

int SubwordVocab::find_piece(std::string_view surface) const {
  auto it = index_.find(surface);
  return it == index_.end() ? -1 : it->second;
}

namespace {

struct TrainWord {
  std::string text;
  std::vector<size_t> off;  // codepoint byte offsets (n+1 entries)
  double freq = 0.0;
};

struct Edge {
  uint32_t start = 0;
  uint32_t len = 0;  // codepoints
  int32_t piece = 0;
};

struct SvHash {
  using is_transparent = void;
  size_t operator()(std::string_view s) const {
    return std::hash<std::string_view>{}(s);
  }
};
struct SvEq {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const {
    return a == b;
  }
};

}  // namespace

SubwordVocab train_unigram(const std::vector<std::string>& lines,
                           const UnigramTrainOptions& opts,
                           const EmObserver& observer) {
  if (lines.empty()) {
    throw config_error("tokenizer training requires a non-empty corpus");
  }

  std::vector<std::string> tags;
  for (const auto& lang : opts.langs) tags.push_back("<" + lang + ">");

  std::set<std::string> reserved;
  for (int i = 0; i < SubwordVocab::kNumSpecials; ++i) {
    reserved.insert(kSpecialSurfaces[i]);
  }
  reserved.insert(tags.begin(), tags.end());

  // Word inventory. std::map keeps iteration order deterministic.
  std::map<std::string, uint64_t> word_freq;
  for (const auto& line : lines) {
    require_utf8(line);
    for (auto& w : pretokenize(line)) ++word_freq[w];
  }

  std::vector<TrainWord> words;
  words.reserve(word_freq.size());
  for (const auto& [text, freq] : word_freq) {
    TrainWord w;
    w.text = text;
    w.freq = static_cast<double>(freq);
    utf8_decompose(w.text, &w.off, nullptr);
    words.push_back(std::move(w));
  }

  // Substring candidates. Single codepoints are mandatory (character
  // coverage); longer substrings need frequency >= 2.
  std::map<std::string, uint64_t> single_freq;
  std::map<std::string, uint64_t> multi_freq;
  for (const auto& w : words) {
    const size_t n = w.off.size() - 1;
    for (size_t i = 0; i < n; ++i) {
      const size_t max_len = std::min(opts.max_piece_len, n - i);
      for (size_t len = 1; len <= max_len; ++len) {
        std::string sub = w.text.substr(w.off[i], w.off[i + len] - w.off[i]);
        if (reserved.count(sub)) continue;
        if (len == 1) {
          single_freq[sub] += static_cast<uint64_t>(w.freq);
        } else {
          multi_freq[sub] += static_cast<uint64_t>(w.freq);
        }
      }
    }
  }

  const size_t floor = single_freq.size() + SubwordVocab::kNumSpecials +
                       tags.size();
  if (opts.vocab_size <= floor) {
    std::ostringstream os;
    os << "vocab_size " << opts.vocab_size
       << " too small: character coverage requires more than " << floor
       << " ids (" << single_freq.size() << " distinct characters + "
       << SubwordVocab::kNumSpecials << " specials + " << tags.size()
       << " language tags)";
    throw config_error(os.str());
  }
  const size_t piece_budget =
      opts.vocab_size - SubwordVocab::kNumSpecials - tags.size();
  const size_t budget_removable = piece_budget - single_freq.size();

  // Working piece set: singles first, then capped multi-char candidates by
  // descending frequency (surface ascending on ties).
  std::vector<std::string> surf;
  std::vector<double> lp;
  std::vector<char> required;
  uint64_t freq_total = 0;
  for (const auto& [s, f] : single_freq) {
    surf.push_back(s);
    lp.push_back(static_cast<double>(f));
    required.push_back(1);
    freq_total += f;
  }
  {
    std::vector<std::pair<std::string, uint64_t>> multi;
    for (const auto& [s, f] : multi_freq) {
      if (f >= 2) multi.push_back({s, f});
    }
    std::sort(multi.begin(), multi.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    const size_t cap = opts.max_candidates_factor * opts.vocab_size;
    const size_t keep = cap > surf.size() ? cap - surf.size() : 0;
    if (multi.size() > keep) multi.resize(keep);
    for (const auto& [s, f] : multi) {
      surf.push_back(s);
      lp.push_back(static_cast<double>(f));
      required.push_back(0);
      freq_total += f;
    }
  }
  for (double& v : lp) v = std::log(v) - std::log(static_cast<double>(freq_total));

  size_t global_iter = 0;
  size_t round = 0;
  std::vector<double> counts;
  std::vector<double> la, lb;
  std::vector<std::vector<Edge>> word_edges(words.size());

  while (true) {
    // Edges are stable within a round (the piece set only changes at prune).
    {
      std::unordered_map<std::string, int, SvHash, SvEq> index;
      index.reserve(surf.size() * 2);
      for (size_t i = 0; i < surf.size(); ++i) {
        index[surf[i]] = static_cast<int>(i);
      }
      for (size_t wi = 0; wi < words.size(); ++wi) {
        const TrainWord& w = words[wi];
        auto& edges = word_edges[wi];
        edges.clear();
        const size_t n = w.off.size() - 1;
        for (size_t i = 0; i < n; ++i) {
          const size_t max_len = std::min(opts.max_piece_len, n - i);
          for (size_t len = 1; len <= max_len; ++len) {
            std::string_view sub(w.text.data() + w.off[i],
                                 w.off[i + len] - w.off[i]);
            auto it = index.find(sub);
            if (it != index.end()) {
              edges.push_back({static_cast<uint32_t>(i),
                               static_cast<uint32_t>(len), it->second});
            }
          }
        }
      }
    }

    for (size_t it = 0; it < opts.em_iterations_per_round; ++it) {
      counts.assign(surf.size(), 0.0);
      double ll = 0.0;
      for (size_t wi = 0; wi < words.size(); ++wi) {
        const TrainWord& w = words[wi];
        const auto& edges = word_edges[wi];
        const size_t n = w.off.size() - 1;
        la.assign(n + 1, kNegInf);
        la[0] = 0.0;
        for (const Edge& e : edges) {
          if (la[e.start] == kNegInf) continue;
          la[e.start + e.len] =
              log_sum_exp(la[e.start + e.len], la[e.start] + lp[e.piece]);
        }
        lb.assign(n + 1, kNegInf);
        lb[n] = 0.0;
        for (auto eit = edges.rbegin(); eit != edges.rend(); ++eit) {
          const Edge& e = *eit;
          if (lb[e.start + e.len] == kNegInf) continue;
          lb[e.start] =
              log_sum_exp(lb[e.start], lp[e.piece] + lb[e.start + e.len]);
        }
        const double z = la[n];
        ll += w.freq * z;
        for (const Edge& e : edges) {
          if (la[e.start] == kNegInf || lb[e.start + e.len] == kNegInf) {
            continue;
          }
          counts[e.piece] +=
              w.freq *
              std::exp(la[e.start] + lp[e.piece] + lb[e.start + e.len] - z);
        }
      }

      if (observer) {
        EmSnapshot snap;
        snap.round = round;
        snap.iteration = global_iter;
        snap.log_likelihood = ll;
        snap.pieces.reserve(surf.size());
        for (size_t i = 0; i < surf.size(); ++i) {
          snap.pieces.push_back({surf[i], lp[i]});
        }
        observer(snap);
      }

      // Plain maximum-likelihood M-step; keeps the EM objective monotone.
      double total = 0.0;
      for (double& c : counts) {
        c = std::max(c, 1e-300);
        total += c;
      }
      for (size_t i = 0; i < surf.size(); ++i) {
        lp[i] = std::log(counts[i]) - std::log(total);
      }
      ++global_iter;
    }

    size_t removable = 0;
    for (char r : required) {
      if (!r) ++removable;
    }
    if (removable <= budget_removable) break;

    // Prune lowest-probability removable pieces; required single characters
    // always survive.
    const size_t keep_removable = std::max(
        budget_removable,
        static_cast<size_t>(static_cast<double>(removable) *
                            opts.prune_keep_fraction));
    std::vector<size_t> removable_idx;
    for (size_t i = 0; i < surf.size(); ++i) {
      if (!required[i]) removable_idx.push_back(i);
    }
    std::sort(removable_idx.begin(), removable_idx.end(),
              [&](size_t a, size_t b) {
                if (lp[a] != lp[b]) return lp[a] > lp[b];
                return surf[a] < surf[b];
              });
    removable_idx.resize(keep_removable);
    std::vector<char> keep(surf.size(), 0);
    for (size_t i = 0; i < surf.size(); ++i) {
      if (required[i]) keep[i] = 1;
    }
    for (size_t i : removable_idx) keep[i] = 1;

    std::vector<std::string> new_surf;
    std::vector<double> new_lp;
    std::vector<char> new_required;
    for (size_t i = 0; i < surf.size(); ++i) {
      if (!keep[i]) continue;
      new_surf.push_back(std::move(surf[i]));
      new_lp.push_back(lp[i]);
      new_required.push_back(required[i]);
    }
    surf = std::move(new_surf);
    lp = std::move(new_lp);
    required = std::move(new_required);
    ++round;
  }

  SubwordVocab vocab;
  vocab.lang_tags = tags;
  std::vector<size_t> order(surf.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (lp[a] != lp[b]) return lp[a] > lp[b];
    return surf[a] < surf[b];
  });
  for (size_t i : order) vocab.pieces.push_back({surf[i], lp[i]});
  vocab.finalize();
  return vocab;
}

namespace {

// Viterbi over one pretoken. Appends piece ids to `out`; unknown codepoints
// become unk edges scored min_piece_log_prob - 10. When `surfaces` is
// non-null the covered text of every segment (including unk) is appended.
void viterbi_word(const SubwordVocab& vocab, const std::string& word,
                  TokenSequence* out, std::vector<std::string>* surfaces) {
  std::vector<size_t> off;
  utf8_decompose(word, &off, nullptr);
  const size_t n = off.size() - 1;
  if (n == 0) return;
  const double unk_score = vocab.min_piece_log_prob() - 10.0;
  const size_t max_len = std::max<size_t>(1, vocab.max_piece_codepoints());

  std::vector<double> best(n + 1, kNegInf);
  std::vector<uint32_t> bp_len(n + 1, 0);
  std::vector<int32_t> bp_id(n + 1, 0);
  best[0] = 0.0;
  for (size_t i = 0; i < n; ++i) {
    if (best[i] == kNegInf) continue;
    const double unk_total = best[i] + unk_score;
    if (unk_total > best[i + 1]) {
      best[i + 1] = unk_total;
      bp_len[i + 1] = 1;
      bp_id[i + 1] = SubwordVocab::kUnkId;
    }
    const size_t limit = std::min(max_len, n - i);
    for (size_t len = 1; len <= limit; ++len) {
      std::string_view sub(word.data() + off[i], off[i + len] - off[i]);
      const int id = vocab.find_piece(sub);
      if (id < 0) continue;
      const double score =
          best[i] + vocab.pieces[id - vocab.piece_offset()].log_prob;
      if (score > best[i + len]) {
        best[i + len] = score;
        bp_len[i + len] = static_cast<uint32_t>(len);
        bp_id[i + len] = id;
      }
    }
  }

  std::vector<std::pair<int32_t, size_t>> rev;  // (id, start position)
  size_t pos = n;
  while (pos > 0) {
    const size_t start = pos - bp_len[pos];
    rev.push_back({bp_id[pos], start});
    pos = start;
  }
  std::vector<size_t> starts;
  for (auto it = rev.rbegin(); it != rev.rend(); ++it) {
    starts.push_back(it->second);
  }
  starts.push_back(n);
  size_t k = 0;
  for (auto it = rev.rbegin(); it != rev.rend(); ++it, ++k) {
    if (out) out->push_back(it->first);
    if (surfaces) {
      surfaces->push_back(
          word.substr(off[starts[k]], off[starts[k + 1]] - off[starts[k]]));
    }
  }
}

}  // namespace

TokenSequence encode(const SubwordVocab& vocab, const std::string& sentence,
                     const std::string& lang) {
  const int tag = vocab.tag_id(lang);
  TokenSequence ids;
  if (!sentence.empty()) {
    require_utf8(sentence);
    for (const auto& word : pretokenize(sentence)) {
      viterbi_word(vocab, word, &ids, nullptr);
    }
  }
  ids.push_back(SubwordVocab::kEosId);
  ids.push_back(tag);
  return ids;
}

std::vector<std::string> encode_pieces(const SubwordVocab& vocab,
                                       const std::string& sentence) {
  std::vector<std::string> surfaces;
  if (sentence.empty()) return surfaces;
  require_utf8(sentence);
  for (const auto& word : pretokenize(sentence)) {
    viterbi_word(vocab, word, nullptr, &surfaces);
  }
  return surfaces;
}

std::string decode(const SubwordVocab& vocab, const TokenSequence& ids) {
  std::string cat;
  for (int id : ids) {
    if (id < 0 || static_cast<size_t>(id) >= vocab.size()) {
      throw data_error("vocab id " + std::to_string(id) + " out of range");
    }
    if (id < vocab.piece_offset()) continue;
    cat += vocab.pieces[id - vocab.piece_offset()].surface;
  }
  std::string out;
  out.reserve(cat.size());
  size_t i = 0;
  while (i < cat.size()) {
    if (cat.compare(i, kSentinelBytes, kSentinel) == 0) {
      out += ' ';
      i += kSentinelBytes;
    } else {
      out += cat[i++];
    }
  }
  if (!out.empty() && out.front() == ' ') out.erase(0, 1);
  return out;
}

void save_vocab(const SubwordVocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write file: " + path);
  out << "mtlab-vocab-v1\n";
  out << "specials\t" << SubwordVocab::kNumSpecials << '\n';
  for (int i = 0; i < SubwordVocab::kNumSpecials; ++i) {
    out << kSpecialSurfaces[i] << '\n';
  }
  out << "lang_tags\t" << vocab.lang_tags.size() << '\n';
  for (const auto& tag : vocab.lang_tags) {
    out << escape_surface(tag) << '\n';
  }
  out << "pieces\t" << vocab.pieces.size() << '\n';
  for (const auto& p : vocab.pieces) {
    out << escape_surface(p.surface) << '\t' << format_double(p.log_prob)
        << '\n';
  }
  if (!out) throw data_error("write failed: " + path);
}

SubwordVocab load_vocab(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  size_t start = 0;
  while (start < content.size()) {
    size_t nl = content.find('\n', start);
    if (nl == std::string::npos) {
      lines.push_back(content.substr(start));
      break;
    }
    lines.push_back(content.substr(start, nl - start));
    start = nl + 1;
  }

  size_t cursor = 0;
  auto next_line = [&]() -> const std::string& {
    if (cursor >= lines.size()) {
      throw data_error("truncated vocab file: " + path);
    }
    return lines[cursor++];
  };
  auto expect_section = [&](const std::string& name) -> size_t {
    const std::string& line = next_line();
    const size_t tab = line.find('\t');
    if (tab == std::string::npos || line.substr(0, tab) != name) {
      throw data_error("expected '" + name + "' section in " + path);
    }
    size_t count = 0;
    const std::string num = line.substr(tab + 1);
    auto res = std::from_chars(num.data(), num.data() + num.size(), count);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) {
      throw data_error("bad count in '" + name + "' section of " + path);
    }
    return count;
  };

  if (next_line() != "mtlab-vocab-v1") {
    throw data_error("unrecognized vocab format in " + path);
  }
  const size_t num_specials = expect_section("specials");
  if (num_specials != SubwordVocab::kNumSpecials) {
    throw data_error("unexpected special-token count in " + path);
  }
  for (int i = 0; i < SubwordVocab::kNumSpecials; ++i) {
    if (next_line() != kSpecialSurfaces[i]) {
      throw data_error("unexpected special token order in " + path);
    }
  }
  SubwordVocab vocab;
  const size_t num_tags = expect_section("lang_tags");
  for (size_t i = 0; i < num_tags; ++i) {
    vocab.lang_tags.push_back(unescape_surface(next_line(), path));
  }
  const size_t num_pieces = expect_section("pieces");
  for (size_t i = 0; i < num_pieces; ++i) {
    const std::string& line = next_line();
    const size_t tab = line.rfind('\t');
    if (tab == std::string::npos) {
      throw data_error("malformed piece record in " + path);
    }
    VocabPiece piece;
    piece.surface = unescape_surface(line.substr(0, tab), path);
    piece.log_prob = parse_double(line.substr(tab + 1), path);
    vocab.pieces.push_back(std::move(piece));
  }
  try {
    vocab.finalize();
  } catch (const config_error& e) {
    throw data_error("invalid vocab in " + path + ": " + e.what());
  }
  return vocab;
}

}  // namespace mt
