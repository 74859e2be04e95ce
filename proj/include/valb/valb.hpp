#pragma once

// Variable-aware log abstraction: IOB tagging of log tokens into ten
// dynamic-variable categories and template extraction that can keep the
// values of selected categories.

#include "valb/corpus.hpp"
#include "valb/crf.hpp"
#include "valb/embed.hpp"
#include "valb/errors.hpp"
#include "valb/eval.hpp"
#include "valb/model.hpp"
#include "valb/network.hpp"
#include "valb/parse.hpp"
#include "valb/serialize.hpp"
#include "valb/synthetic.hpp"
#include "valb/tagger.hpp"
#include "valb/taxonomy.hpp"
#include "valb/train.hpp"
#include "valb/util.hpp"
