#pragma once

#include <string>
#include <utility>
#include <vector>

#include "metaspo/backend.hpp"
#include "metaspo/core.hpp"

namespace metaspo {

// How predictions are pulled out of raw model responses.
struct ExtractionRule {
  std::string tag = "answer";
  enum class Fallback { WholeResponseTrimmed, Empty };
  Fallback fallback = Fallback::WholeResponseTrimmed;
};

// Contents of the LAST well-formed <tag>...</tag> pair (case-insensitive),
// trimmed; applies the fallback when no pair exists. Total function.
std::string extract_answer(const std::string& raw, const ExtractionRule& rule = {});

// lowercase + trim + collapse internal whitespace
std::string normalize_label(const std::string& text);
// lowercase, strip punctuation, strip English articles (a/an/the), collapse
// whitespace; the usual reading-comprehension EM convention.
std::string normalize_em(const std::string& text);

int score_accuracy(const std::string& prediction, const std::string& gold);
int score_exact_match(const std::string& prediction, const std::string& gold);

// Corpus-level F1 of the positive class; 0 when 2TP+FP+FN == 0.
double score_binary_f1(const std::vector<std::pair<std::string, std::string>>& records,
                       const std::string& positive_label);

// One (system, user, query) -> response -> prediction -> judgment.
struct EvalRecord {
  std::string system_text;
  std::string user_text;  // user prompt with the query substituted in
  std::string example_id;
  std::string query;
  std::string gold;
  std::string raw_response;
  std::string prediction;
  double score = 0.0;
  bool correct = false;
};

struct EvalOptions {
  Metric metric = Metric::Accuracy;
  std::string positive_label = "yes";
  ExtractionRule rule;
  InputMode mode = InputMode::Separated;
  std::string model;
  double temperature = 0.0;
  int max_tokens = 1024;
  int concurrency = 4;
  std::string placeholder = kDefaultPlaceholder;
};

struct EvalResult {
  double mean_score = 0.0;
  std::vector<EvalRecord> records;  // same order as the input examples
};

// Queries the backend once per example (fanned out up to opts.concurrency,
// order preserving), extracts predictions and scores them. For Accuracy and
// ExactMatch the mean is the per-example average; for BinaryF1 it is the
// corpus F1 over the record set, while per-record `correct` stays the
// per-example label match.
EvalResult evaluate_prompt(const PromptText& system_prompt, const PromptText& user_prompt,
                           const std::vector<Example>& examples, Backend& backend,
                           const EvalOptions& opts);

}  // namespace metaspo
