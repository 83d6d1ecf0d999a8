#pragma once

// Everything except the HTTP pieces (remote_client.hpp, review_http.hpp),
// which pull in cpp-httplib and are included separately.
#include "ironia/config.hpp"
#include "ironia/corpus.hpp"
#include "ironia/encoder.hpp"
#include "ironia/error.hpp"
#include "ironia/head.hpp"
#include "ironia/label.hpp"
#include "ironia/llm.hpp"
#include "ironia/metrics.hpp"
#include "ironia/phase.hpp"
#include "ironia/prompts.hpp"
#include "ironia/report.hpp"
#include "ironia/review.hpp"
#include "ironia/train.hpp"
