#pragma once

// Everything except the command-line driver (which needs OpenSSL).

#include "stackptr/checkpoint.hpp"
#include "stackptr/config.hpp"
#include "stackptr/decoder.hpp"
#include "stackptr/encoder.hpp"
#include "stackptr/errors.hpp"
#include "stackptr/functional.hpp"
#include "stackptr/gradcheck.hpp"
#include "stackptr/graph.hpp"
#include "stackptr/metrics.hpp"
#include "stackptr/optim.hpp"
#include "stackptr/parameters.hpp"
#include "stackptr/parser.hpp"
#include "stackptr/rng.hpp"
#include "stackptr/synthetic.hpp"
#include "stackptr/tensor.hpp"
#include "stackptr/trainer.hpp"
#include "stackptr/transfer.hpp"
#include "stackptr/transition.hpp"
#include "stackptr/treebank.hpp"
#include "stackptr/utf8.hpp"
#include "stackptr/vocabulary.hpp"
