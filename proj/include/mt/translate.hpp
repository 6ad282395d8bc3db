#pragma once

#include <string>
#include <vector>

#include "mt/bleu.hpp"
#include "mt/corpus.hpp"
#include "mt/model.hpp"
#include "mt/tokenizer.hpp"

namespace mt {

struct ScoredTranslation {
  std::string text;
  double raw_score = 0.0;
  double normalized_score = 0.0;
};

// Beam-decodes one raw source line and returns detokenized target text with
// the winning hypothesis' scores. Over-long sources are truncated to the
// model's position budget the same way training batches are; the text can be
// empty if the model emits eos immediately.
ScoredTranslation translate_line_scored(const Seq2SeqModel<float>& model,
                                        const SubwordVocab& vocab,
                                        const std::string& line,
                                        const std::string& src_lang,
                                        const std::string& tgt_lang,
                                        const DecodeConfig& decode_cfg);

std::string translate_line(const Seq2SeqModel<float>& model,
                           const SubwordVocab& vocab, const std::string& line,
                           const std::string& src_lang,
                           const std::string& tgt_lang,
                           const DecodeConfig& decode_cfg);

std::vector<std::string> translate_lines(const Seq2SeqModel<float>& model,
                                         const SubwordVocab& vocab,
                                         const std::vector<std::string>& lines,
                                         const std::string& src_lang,
                                         const std::string& tgt_lang,
                                         const DecodeConfig& decode_cfg);

// Decodes every test source and scores the detokenized hypotheses against
// the raw test targets.
BleuReport score_checkpoint(const Seq2SeqModel<float>& model,
                            const SubwordVocab& vocab,
                            const ParallelCorpus& test,
                            const DecodeConfig& decode_cfg,
                            BleuSmoothing smoothing = BleuSmoothing::none);

}  // namespace mt
