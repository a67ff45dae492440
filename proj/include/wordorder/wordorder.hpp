#pragma once

// Umbrella header for the wordorder library.

#include <wordorder/bpe.hpp>
#include <wordorder/config.hpp>
#include <wordorder/corpus.hpp>
#include <wordorder/errors.hpp>
#include <wordorder/mallows.hpp>
#include <wordorder/manifest.hpp>
#include <wordorder/ngram_lm.hpp>
#include <wordorder/pls.hpp>
#include <wordorder/report.hpp>
#include <wordorder/rng.hpp>
#include <wordorder/stats.hpp>
#include <wordorder/subword_shuffle.hpp>
#include <wordorder/surprisal.hpp>
#include <wordorder/sweep.hpp>
#include <wordorder/utf8.hpp>
#include <wordorder/vocab_stats.hpp>
