#include "metaspo/synthetic.hpp"

#include <fstream>

#include <json.hpp>

#include "metaspo/meta_prompts.hpp"
#include "metaspo/tags.hpp"

namespace metaspo {

namespace {

using nlohmann::json;

std::vector<std::pair<std::string, std::string>> read_jsonl_pairs(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("synthetic spec references missing file " + path.string());
  std::vector<std::pair<std::string, std::string>> pairs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const json record = json::parse(line);
      pairs.emplace_back(record.at("query").get<std::string>(),
                         record.at("answer").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace

SyntheticSpec SyntheticSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("synthetic spec not found: " + path.string());
  json payload;
  try {
    in >> payload;
  } catch (const json::exception& e) {
    throw ParseError("synthetic spec " + path.string() + ": " + e.what());
  }
  const auto base_dir = path.parent_path();

  SyntheticSpec spec;
  spec.wrong_answer = payload.value("wrong_answer", spec.wrong_answer);
  spec.answer_tag = payload.value("answer_tag", spec.answer_tag);
  for (const auto& entry : payload.value("tasks", json::array())) {
    SyntheticTaskRule rule;
    rule.name = entry.at("name").get<std::string>();
    for (const auto& keyword : entry.value("keywords", json::array()))
      rule.keywords.push_back(keyword.get<std::string>());
    for (const auto& example : entry.value("examples", json::array()))
      rule.examples.emplace_back(example.at("query").get<std::string>(),
                                 example.at("answer").get<std::string>());
    for (const auto& rel : entry.value("jsonl", json::array())) {
      const auto pairs = read_jsonl_pairs(base_dir / rel.get<std::string>());
      rule.examples.insert(rule.examples.end(), pairs.begin(), pairs.end());
    }
    spec.tasks.push_back(std::move(rule));
  }
  if (payload.contains("pools")) {
    for (const auto& [kind, entries] : payload["pools"].items()) {
      auto& pool = spec.pools[kind];
      for (const auto& entry : entries) pool.push_back(entry.get<std::string>());
    }
  }
  return spec;
}

SyntheticBackend::SyntheticBackend(SyntheticSpec spec) : spec_(std::move(spec)) {}

std::string SyntheticBackend::draw(const std::string& kind) {
  std::lock_guard lock(mutex_);
  const auto it = spec_.pools.find(kind);
  const std::size_t cursor = cursors_[kind];
  if (it == spec_.pools.end() || cursor >= it->second.size())
    throw PoolExhausted("synthetic pool '" + kind + "' exhausted after " +
                        std::to_string(cursor) + " draws");
  cursors_[kind] = cursor + 1;
  return it->second[cursor];
}

ChatResponse SyntheticBackend::complete(const ChatRequest& request) {
  calls_.fetch_add(1);

  std::string text;
  for (const auto& message : request.messages) {
    text += message.content;
    text += '\n';
  }

  // Meta-prompt requests first: their rendered text may embed example
  // queries (wrong-example blocks, induction pairs), so marker checks must
  // win over the base-model lookup.
  static constexpr std::pair<const char*, const char*> kKinds[] = {
      {markers::kUserGeneration, "user_generation"},
      {markers::kSystemGeneration, "system_generation"},
      {markers::kUserAnalysis, "user_analysis"},
      {markers::kSystemAnalysis, "system_analysis"},
      {markers::kInduction, "induction"},
      {markers::kUserResample, "user_resample"},
      {markers::kSystemResample, "system_resample"},
      {markers::kUserCrossover, "user_crossover"},
      {markers::kSystemCrossover, "system_crossover"},
      {markers::kUserMutation, "user_mutation"},
      {markers::kSystemMutation, "system_mutation"},
  };
  for (const auto& [marker, kind] : kKinds) {
    if (text.find(marker) != std::string::npos) {
      ChatResponse response;
      response.content = draw(kind);
      return response;
    }
  }

  // Base-model rule: locate the example by query text, then require every
  // hidden keyword of its task to appear in the rendered input.
  for (const auto& rule : spec_.tasks) {
    for (const auto& [query, gold] : rule.examples) {
      if (text.find(query) == std::string::npos) continue;
      bool all_keywords = true;
      for (const auto& keyword : rule.keywords) {
        if (text.find(keyword) == std::string::npos) {
          all_keywords = false;
          break;
        }
      }
      ChatResponse response;
      const std::string& answer = all_keywords ? gold : spec_.wrong_answer;
      response.content = "<" + spec_.answer_tag + ">" + answer + "</" + spec_.answer_tag + ">";
      return response;
    }
  }

  throw MalformedResponse("synthetic backend cannot classify request (no marker or known query)");
}

}  // namespace metaspo
