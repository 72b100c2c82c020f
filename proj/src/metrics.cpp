#include "metaspo/metrics.hpp"

#include <cctype>

#include "metaspo/tags.hpp"

namespace metaspo {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string lowercase(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  return out;
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

std::string strip_punct(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (std::ispunct(static_cast<unsigned char>(c))) continue;
    out.push_back(c);
  }
  return out;
}

std::string strip_articles(std::string_view text) {
  std::string out;
  std::string word;
  auto flush = [&]() {
    if (word.empty()) return;
    if (word != "a" && word != "an" && word != "the") {
      if (!out.empty()) out.push_back(' ');
      out += word;
    }
    word.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else {
      word.push_back(c);
    }
  }
  flush();
  return out;
}

}  // namespace

std::string extract_answer(const std::string& raw, const ExtractionRule& rule) {
  if (auto content = last_tag_content(raw, rule.tag)) return trim(*content);
  if (rule.fallback == ExtractionRule::Fallback::WholeResponseTrimmed) return trim(raw);
  return "";
}

std::string normalize_label(const std::string& text) { return collapse_whitespace(lowercase(text)); }

std::string normalize_em(const std::string& text) {
  return collapse_whitespace(strip_articles(strip_punct(lowercase(text))));
}

int score_accuracy(const std::string& prediction, const std::string& gold) {
  return normalize_label(prediction) == normalize_label(gold) ? 1 : 0;
}

int score_exact_match(const std::string& prediction, const std::string& gold) {
  return normalize_em(prediction) == normalize_em(gold) ? 1 : 0;
}

double score_binary_f1(const std::vector<std::pair<std::string, std::string>>& records,
                       const std::string& positive_label) {
  if (records.empty()) throw EmptyRecordSet("score_binary_f1: no records");
  const std::string positive = normalize_label(positive_label);
  long tp = 0, fp = 0, fn = 0;
  for (const auto& [prediction, gold] : records) {
    const bool pred_pos = normalize_label(prediction) == positive;
    const bool gold_pos = normalize_label(gold) == positive;
    if (pred_pos && gold_pos) ++tp;
    else if (pred_pos && !gold_pos) ++fp;
    else if (!pred_pos && gold_pos) ++fn;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  if (denom == 0.0) return 0.0;
  return 2.0 * static_cast<double>(tp) / denom;
}

EvalResult evaluate_prompt(const PromptText& system_prompt, const PromptText& user_prompt,
                           const std::vector<Example>& examples, Backend& backend,
                           const EvalOptions& opts) {
  if (examples.empty()) throw EmptyRecordSet("evaluate_prompt: no examples");

  std::vector<ChatRequest> requests;
  requests.reserve(examples.size());
  for (const auto& example : examples) {
    ChatRequest request;
    request.model = opts.model;
    request.messages = render_input(system_prompt, user_prompt, example.query, opts.mode,
                                    opts.placeholder);
    request.temperature = opts.temperature;
    request.max_tokens = opts.max_tokens;
    requests.push_back(std::move(request));
  }

  const auto outcomes = complete_many(backend, requests, opts.concurrency);

  EvalResult result;
  result.records.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const ChatResponse& response = outcomes[i].value();  // rethrows per-request errors
    EvalRecord record;
    record.system_text = system_prompt.text;
    record.user_text = substitute_query(user_prompt.text, examples[i].query, opts.placeholder);
    record.example_id = examples[i].id;
    record.query = examples[i].query;
    record.gold = examples[i].answer;
    record.raw_response = response.content;
    record.prediction = extract_answer(response.content, opts.rule);
    switch (opts.metric) {
      case Metric::Accuracy:
        record.score = score_accuracy(record.prediction, record.gold);
        record.correct = record.score == 1.0;
        break;
      case Metric::ExactMatch:
        record.score = score_exact_match(record.prediction, record.gold);
        record.correct = record.score == 1.0;
        break;
      case Metric::BinaryF1:
        record.correct = score_accuracy(record.prediction, record.gold) == 1;
        record.score = record.correct ? 1.0 : 0.0;
        break;
    }
    result.records.push_back(std::move(record));
  }

  if (opts.metric == Metric::BinaryF1) {
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(result.records.size());
    for (const auto& record : result.records) pairs.emplace_back(record.prediction, record.gold);
    result.mean_score = score_binary_f1(pairs, opts.positive_label);
  } else {
    double sum = 0.0;
    for (const auto& record : result.records) sum += record.score;
    result.mean_score = sum / static_cast<double>(result.records.size());
  }
  return result;
}

}  // namespace metaspo
