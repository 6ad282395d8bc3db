#include "mt/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mt/error.hpp"
#include "mt/rng.hpp"
#include "mt/utf8.hpp"

namespace mt {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool is_blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) {
    return std::isspace(c) != 0;
  });
}

struct RawLine {
  std::string text;
  size_t byte_offset;  // offset of the line start within the file
};

// Splits file content on LF. A trailing LF does not produce a final empty
// line; an empty line between two LFs does. Trailing CR is stripped so CRLF
// files load the same as LF files.
std::vector<RawLine> split_lines(const std::string& content) {
  std::vector<RawLine> lines;
  size_t start = 0;
  while (start <= content.size()) {
    size_t nl = content.find('\n', start);
    size_t end = (nl == std::string::npos) ? content.size() : nl;
    if (nl == std::string::npos && start == content.size()) break;
    std::string line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back({std::move(line), start});
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  return lines;
}

std::vector<RawLine> load_lines_validated(const std::string& path) {
  const std::string content = read_file(path);
  auto lines = split_lines(content);
  for (const auto& line : lines) {
    size_t bad = 0;
    if (!utf8_decompose(line.text, nullptr, &bad)) {
      std::ostringstream os;
      os << path << ": invalid UTF-8 at byte offset "
         << (line.byte_offset + bad);
      throw data_error(os.str());
    }
  }
  return lines;
}

}  // namespace

ParallelCorpus load_parallel(const std::string& src_path,
                             const std::string& tgt_path,
                             const std::string& src_lang,
                             const std::string& tgt_lang) {
  if (src_lang == tgt_lang) {
    throw config_error("source and target language must differ, both are '" +
                       src_lang + "'");
  }
  auto src_lines = load_lines_validated(src_path);
  auto tgt_lines = load_lines_validated(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    std::ostringstream os;
    os << "line count mismatch: " << src_path << " has " << src_lines.size()
       << " lines, " << tgt_path << " has " << tgt_lines.size();
    throw data_error(os.str());
  }
  ParallelCorpus corpus;
  corpus.src_lang = src_lang;
  corpus.tgt_lang = tgt_lang;
  corpus.pairs.reserve(src_lines.size());
  for (size_t i = 0; i < src_lines.size(); ++i) {
    if (is_blank(src_lines[i].text) || is_blank(tgt_lines[i].text)) {
      std::ostringstream os;
      os << "empty sentence at line " << (i + 1) << " of "
         << (is_blank(src_lines[i].text) ? src_path : tgt_path);
      throw data_error(os.str());
    }
    corpus.pairs.push_back({std::move(src_lines[i].text),
                            std::move(tgt_lines[i].text), Provenance::real});
  }
  return corpus;
}

MonolingualCorpus load_monolingual(const std::string& path,
                                   const std::string& lang,
                                   size_t* dropped_empty) {
  auto lines = load_lines_validated(path);
  MonolingualCorpus corpus;
  corpus.lang = lang;
  size_t dropped = 0;
  for (auto& line : lines) {
    if (is_blank(line.text)) {
      ++dropped;
    } else {
      corpus.lines.push_back(std::move(line.text));
    }
  }
  if (dropped_empty) *dropped_empty = dropped;
  return corpus;
}

namespace {

void write_lines(const std::string& path,
                 const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write file: " + path);
  for (const auto& line : lines) out << line << '\n';
  if (!out) throw data_error("write failed: " + path);
}

}  // namespace

void save_parallel(const ParallelCorpus& corpus, const std::string& src_path,
                   const std::string& tgt_path) {
  std::vector<std::string> src, tgt;
  src.reserve(corpus.pairs.size());
  tgt.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) {
    src.push_back(p.source);
    tgt.push_back(p.target);
  }
  write_lines(src_path, src);
  write_lines(tgt_path, tgt);
}

void save_monolingual(const MonolingualCorpus& corpus,
                      const std::string& path) {
  write_lines(path, corpus.lines);
}

size_t count_whitespace_tokens(const std::string& line) {
  size_t count = 0;
  bool in_token = false;
  for (unsigned char c : line) {
    if (std::isspace(c)) {
      in_token = false;
    } else if (!in_token) {
      in_token = true;
      ++count;
    }
  }
  return count;
}

FilterResult filter_min_tokens(const ParallelCorpus& corpus,
                               size_t min_src_tokens) {
  if (min_src_tokens < 1) {
    throw config_error("min_src_tokens must be >= 1");
  }
  FilterResult result;
  result.corpus.src_lang = corpus.src_lang;
  result.corpus.tgt_lang = corpus.tgt_lang;
  for (const auto& pair : corpus.pairs) {
    if (count_whitespace_tokens(pair.source) >= min_src_tokens) {
      result.corpus.pairs.push_back(pair);
      ++result.retained;
    } else {
      ++result.dropped;
    }
  }
  return result;
}

ParallelCorpus concat(const ParallelCorpus& a, const ParallelCorpus& b) {
  if (a.src_lang != b.src_lang || a.tgt_lang != b.tgt_lang) {
    throw config_error("language pair mismatch in concat: " + a.src_lang +
                       "-" + a.tgt_lang + " vs " + b.src_lang + "-" +
                       b.tgt_lang);
  }
  ParallelCorpus out = a;
  out.pairs.insert(out.pairs.end(), b.pairs.begin(), b.pairs.end());
  return out;
}

ParallelCorpus reverse(const ParallelCorpus& corpus) {
  ParallelCorpus out;
  out.src_lang = corpus.tgt_lang;
  out.tgt_lang = corpus.src_lang;
  out.pairs.reserve(corpus.pairs.size());
  for (const auto& p : corpus.pairs) {
    out.pairs.push_back({p.target, p.source, p.provenance});
  }
  return out;
}

ParallelCorpus shuffle(const ParallelCorpus& corpus, uint64_t seed) {
  ParallelCorpus out = corpus;
  Rng rng(seed);
  for (size_t i = out.pairs.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_below(i));
    std::swap(out.pairs[i - 1], out.pairs[j]);
  }
  return out;
}

size_t count_file_lines(const std::string& path) {
  const std::string content = read_file(path);
  return split_lines(content).size();
}

void save_manifest(const CorpusManifest& manifest, const std::string& path) {
  nlohmann::json j;
  j["format"] = "mtlab-manifest-v1";
  j["splits"] = nlohmann::json::array();
  for (const auto& e : manifest.entries) {
    j["splits"].push_back({{"split", e.split},
                           {"src_path", e.src_path},
                           {"tgt_path", e.tgt_path},
                           {"line_count", e.line_count}});
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

CorpusManifest load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw data_error("invalid manifest " + path + ": " + e.what());
  }
  if (j.value("format", "") != "mtlab-manifest-v1") {
    throw data_error("unrecognized manifest format in " + path);
  }
  CorpusManifest manifest;
  for (const auto& s : j.at("splits")) {
    ManifestEntry e;
    e.split = s.at("split").get<std::string>();
    e.src_path = s.at("src_path").get<std::string>();
    e.tgt_path = s.at("tgt_path").get<std::string>();
    e.line_count = s.at("line_count").get<size_t>();
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

void verify_manifest(const CorpusManifest& manifest) {
  for (const auto& e : manifest.entries) {
    for (const std::string& path : {e.src_path, e.tgt_path}) {
      if (path.empty()) continue;
      const size_t actual = count_file_lines(path);
      if (actual != e.line_count) {
        std::ostringstream os;
        os << "manifest mismatch for split '" << e.split << "': " << path
           << " has " << actual << " lines, manifest says " << e.line_count;
        throw data_error(os.str());
      }
    }
  }
}

}  // namespace mt
