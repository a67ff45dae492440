#pragma once

// Subword-granularity shuffling: sentences are encoded first, then token ids
// are reordered by the manifest permutation for the token count.

#include <wordorder/bpe.hpp>
#include <wordorder/manifest.hpp>

namespace wordorder {

inline TokenCorpus apply_shuffle(const TokenCorpus& tokens, const PermutationManifest& manifest) {
    return permute_sequences(tokens, manifest);
}

inline TokenCorpus invert_shuffle(const TokenCorpus& tokens, const PermutationManifest& manifest) {
    return unpermute_sequences(tokens, manifest);
}

/// Shuffle with an explicit tokenizer. Word manifests reorder words before
/// encoding; subword manifests reorder the encoded token ids.
inline TokenCorpus apply_shuffle(const Corpus& corpus, const PermutationManifest& manifest,
                                 const TokenizerModel& tokenizer) {
    if (manifest.granularity == Granularity::word) return encode_corpus(tokenizer, apply_shuffle(corpus, manifest));
    return permute_sequences(encode_corpus(tokenizer, corpus), manifest);
}

/// Longest encoded sentence, i.e. the max_len a subword manifest must cover.
inline std::size_t max_token_length(const TokenCorpus& tokens) {
    std::size_t n = 0;
    for (const auto& s : tokens) n = std::max(n, s.size());
    return n;
}

}  // namespace wordorder
