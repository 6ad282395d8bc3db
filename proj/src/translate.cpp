#include "mt/translate.hpp"

#include <algorithm>

#include "mt/error.hpp"

namespace mt {

ScoredTranslation translate_line_scored(const Seq2SeqModel<float>& model,
                                        const SubwordVocab& vocab,
                                        const std::string& line,
                                        const std::string& src_lang,
                                        const std::string& tgt_lang,
                                        const DecodeConfig& decode_cfg) {
  std::vector<int> src = encode(vocab, line, src_lang);
  const auto cap = static_cast<size_t>(model.config.max_positions);
  if (src.size() > cap) {
    const int tag = src.back();
    src.resize(cap - 2);
    src.push_back(SubwordVocab::kEosId);
    src.push_back(tag);
  }
  DecodeConfig eff = decode_cfg;
  eff.max_len = std::min(eff.max_len, model.config.max_positions - 1);
  const auto hyps = beam_search(model, src, eff, vocab.tag_id(tgt_lang));
  if (hyps.empty()) return {};
  return {decode(vocab, hyps.front().ids), hyps.front().raw_score,
          hyps.front().normalized_score};
}

std::string translate_line(const Seq2SeqModel<float>& model,
                           const SubwordVocab& vocab, const std::string& line,
                           const std::string& src_lang,
                           const std::string& tgt_lang,
                           const DecodeConfig& decode_cfg) {
  return translate_line_scored(model, vocab, line, src_lang, tgt_lang,
                               decode_cfg)
      .text;
}

std::vector<std::string> translate_lines(const Seq2SeqModel<float>& model,
                                         const SubwordVocab& vocab,
                                         const std::vector<std::string>& lines,
                                         const std::string& src_lang,
                                         const std::string& tgt_lang,
                                         const DecodeConfig& decode_cfg) {
  std::vector<std::string> out;
  out.reserve(lines.size());
  for (const auto& line : lines) {
    out.push_back(
        translate_line(model, vocab, line, src_lang, tgt_lang, decode_cfg));
  }
  return out;
}

BleuReport score_checkpoint(const Seq2SeqModel<float>& model,
                            const SubwordVocab& vocab,
                            const ParallelCorpus& test,
                            const DecodeConfig& decode_cfg,
                            BleuSmoothing smoothing) {
  if (test.pairs.empty()) {
    throw config_error("test corpus is empty");
  }
  std::vector<std::string> hyps, refs;
  hyps.reserve(test.pairs.size());
  refs.reserve(test.pairs.size());
  for (const auto& pair : test.pairs) {
    hyps.push_back(translate_line(model, vocab, pair.source, test.src_lang,
                                  test.tgt_lang, decode_cfg));
    refs.push_back(pair.target);
  }
  return corpus_bleu(hyps, refs, smoothing);
}

}  // namespace mt
