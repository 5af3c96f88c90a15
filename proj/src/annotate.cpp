#include "aip/annotate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <regex>
#include <thread>

#include <nlohmann/json.hpp>

#include "aip/csv.hpp"

#define CPPHTTPLIB_NO_EXCEPTIONS 0
#include <httplib.h>

namespace aip {

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

constexpr const char* kOpen = "≪";   // ≪
constexpr const char* kClose = "≫";  // ≫

}  // namespace

const std::vector<CategoryBlock>& annotation_blocks() {
  static const std::vector<CategoryBlock> blocks = {
      {"ethnicity",
       "ETHNICITY:\nE1) White \nE2) Black\nE3) Hispanic\nE4) Asian\nE5) Other\n",
       {"E1", "E2", "E3", "E4", "E5"}},
      {"age",
       "AGE:\nA1) between 0 and 17 year old\nA2) 18 to 24 years old\n"
       "A3) 25 to 34 years old\nA4) 35 to 44 years old\nA5) 45 to 54 years old\n"
       "A6) 55 to 64 years old\nA7) 65 or older\n",
       {"A1", "A2", "A3", "A4", "A5", "A6", "A7"}},
      {"sex", "SEX:\nS1) Male\nS2) Female\n", {"S1", "S2"}},
      {"marital", "MARITAL STATUS:\nM1) Married\nM2) Not married\n", {"M1", "M2"}},
      {"education",
       "HIGHEST EDUCATIONAL QUALIFICATION:\nQ1) no formal education\n"
       "Q2) completed high-school but did not go to college\n"
       "Q3) obtained a Bachelor degree or higher\n",
       {"Q1", "Q2", "Q3"}},
      {"income",
       "HOUSEHOLD INCOME BRACKET:\nH1) up to 25000 USD per year\n"
       "H2) between 25000 and 50000 USD per year\n"
       "H3) between 50000 and 75000 USD per year\n"
       "H4) between 75000 and 100000 USD per year\n"
       "H5) more than 100000 USD per year\n",
       {"H1", "H2", "H3", "H4", "H5"}},
      {"registration",
       "THIS INDIVIDUAL IS REGISTERED AS:\nR2) a Democrat\nR3) a Republican\n"
       "R4) an Independent\n",
       {"R2", "R3", "R4"}},
      {"vote2016",
       "2016 US PRESIDENTIAL ELECTION VOTE:\nL1) did not vote\n"
       "L2) voted for Donald Trump, the Republican candidate\n"
       "L3) voted for Hillary Clinton, the Democrat candidate\n"
       "L4) voted for Gary Johnson, the Libertarian candidate\n"
       "L5) voted for Jill Stein, the Green Party candidate\n",
       {"L1", "L2", "L3", "L4", "L5"}},
      {"vote2018",
       "2018 MIDTERM ELECTION VOTE:\nT1) did not vote\n"
       "T2) voted for the Republican Party\nT3) voted for the Democratic Party\n"
       "T4) voted for a third party\n",
       {"T1", "T2", "T3", "T4"}},
      {"vote2020",
       "2020 US PRESIDENTIAL ELECTION VOTE:\nV1) did not vote\n"
       "V2) voted for Donald Trump, the Republican candidate\n"
       "V3) voted for Joe Biden, the Democrat candidate\n"
       "V4) voted for Jo Jorgensen, the Libertarian candidate\n"
       "V5) voted for Howie Hawkins, the Green Party candidate\n",
       {"V1", "V2", "V3", "V4", "V5"}},
  };
  return blocks;
}

const std::vector<std::string>& us_states() {
  static const std::vector<std::string> states = {
      "Alabama", "Alaska", "Arizona", "Arkansas", "California", "Colorado",
      "Connecticut", "Delaware", "District of Columbia", "Florida", "Georgia",
      "Hawaii", "Idaho", "Illinois", "Indiana", "Iowa", "Kansas", "Kentucky",
      "Louisiana", "Maine", "Maryland", "Massachusetts", "Michigan", "Minnesota",
      "Mississippi", "Missouri", "Montana", "Nebraska", "Nevada", "New Hampshire",
      "New Jersey", "New Mexico", "New York", "North Carolina", "North Dakota",
      "Ohio", "Oklahoma", "Oregon", "Pennsylvania", "Rhode Island",
      "South Carolina", "South Dakota", "Tennessee", "Texas", "Utah", "Vermont",
      "Virginia", "Washington", "West Virginia", "Wisconsin", "Wyoming"};
  return states;
}

std::string build_location_prompt(const UserRecord& user) {
  std::string p;
  p += "A person writes their location in their bio as follows:";
  p += kOpen;
  p += user.location;
  p += kClose;
  p += ".\n";
  p += "Which state in the US do they live in ?\n";
  p += "For this answer consider Washington DC and other Territories of the US as states.\n";
  p += "Write out just the full name of the state, and if not from US, write \"Not from US\".";
  return p;
}

std::string build_demo_prompt(const UserRecord& user, int context,
                              const std::vector<int>& order) {
  const auto& blocks = annotation_blocks();
  if (order.size() != blocks.size()) throw DataError("block order must list every block once");
  std::vector<bool> seen(blocks.size(), false);
  for (int b : order) {
    if (b < 0 || b >= static_cast<int>(blocks.size()) || seen[b])
      throw DataError("block order must list every block once");
    seen[b] = true;
  }
  if (context <= 0) throw DataError("context size must be positive");

  std::string tweets;
  const int take = std::min<int>(context, static_cast<int>(user.tweets.size()));
  for (int i = 0; i < take; ++i) {
    if (i > 0) tweets += "\n";
    tweets += user.tweets[i];
  }

  std::string p;
  p += "A person has in their Twitter bio the following information:\n";
  p += kOpen;
  p += user.bio;
  p += kClose;
  p += " ;\n";
  p += "Further, they have written the following tweets:\n";
  p += kOpen;
  p += tweets;
  p += kClose;
  p += ".\n";
  p += "I will now show you a number of categories to which this user may belong.\n";
  p += "The categories are preceded by a header (e.g. \"AGE:\" or \"SEX:\" etc.) and an "
       "identifier (e.g. \"A1\", \"A2\" or \"E2\" etc.). Please select, for each header, "
       "the most likely category to which this user belongs to.\n";
  p += "In your answer present, for each header, the selected identifier.\n";
  for (size_t i = 0; i < order.size(); ++i) {
    if (i > 0) p += "\n";
    p += blocks[order[i]].text;
  }
  return p;
}

std::string build_demo_prompt(const UserRecord& user, int context, Rng& rng) {
  std::vector<int> order(annotation_blocks().size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return build_demo_prompt(user, context, order);
}

LocationResult parse_location_answer(const std::string& text) {
  const std::string hay = lower(text);
  // Longest names first so "West Virginia" wins over "Virginia" and
  // "Washington DC" over "Washington".
  struct Alias {
    std::string needle;
    int state;
  };
  static const std::vector<Alias> aliases = [] {
    std::vector<Alias> out;
    const auto& states = us_states();
    for (size_t i = 0; i < states.size(); ++i)
      out.push_back({lower(states[i]), static_cast<int>(i)});
    const int dc = 8;  // District of Columbia
    out.push_back({"washington dc", dc});
    out.push_back({"washington, dc", dc});
    out.push_back({"washington d.c.", dc});
    out.push_back({"washington, d.c.", dc});
    std::stable_sort(out.begin(), out.end(), [](const Alias& a, const Alias& b) {
      return a.needle.size() > b.needle.size();
    });
    return out;
  }();
  for (const Alias& a : aliases) {
    if (hay.find(a.needle) != std::string::npos) return {LocationKind::State, a.state};
  }
  if (hay.find("not from us") != std::string::npos) return {LocationKind::NotFromUs, -1};
  return {LocationKind::Unresolved, -1};
}

Annotation parse_demo_answer(const std::string& text) {
  Annotation a;
  int parsed = 0;
  for (const CategoryBlock& block : annotation_blocks()) {
    std::string chosen;
    int hits = 0;
    for (const std::string& id : block.identifiers) {
      std::regex pat("\\b" + id + "\\b");
      if (std::regex_search(text, pat)) {
        ++hits;
        chosen = id;
      }
    }
    if (hits != 1) continue;  // ambiguous or absent: the block stays missing
    a.block_choice[block.key] = chosen;
    ++parsed;
    const int opt = chosen[1] - '0';
    if (block.key == "sex") {
      a.gender = opt - 1;
    } else if (block.key == "ethnicity") {
      a.ethnicity = opt - 1;
    } else if (block.key == "age") {
      if (opt == 1)
        a.under18 = true;
      else
        a.age = opt - 2;
    } else if (block.key == "education") {
      a.education = (opt == 3) ? 1 : 0;
    } else if (block.key == "income") {
      a.income = opt - 1;
    } else if (block.key == "vote2016") {
      if (opt == 2) a.vote2016 = 0;       // Republican
      else if (opt == 3) a.vote2016 = 1;  // Democrat
      else if (opt >= 4) a.vote2016 = 2;  // other
      else a.vote2016 = 3;                // stayed home
    } else if (block.key == "vote2020") {
      if (opt == 1) a.choice = 4;  // stayed home
      else a.choice = opt - 2;     // R, D, Libertarian, Green
    }
  }
  if (parsed == 0) throw DataError("no category identifiers parsed from reply");
  return a;
}

namespace {

class HttpTransport : public ChatTransport {
 public:
  HttpTransport(std::string base_url, std::string model, const std::string& api_key_env)
      : base_url_(std::move(base_url)), model_(std::move(model)) {
    const char* key = std::getenv(api_key_env.c_str());
    if (key == nullptr || *key == '\0')
      throw DataError("environment variable '" + api_key_env + "' is not set");
    api_key_ = key;
  }

  std::string complete(const std::string& prompt) override {
    nlohmann::json body = {
        {"model", model_},
        {"temperature", 0.0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw TransportError("request failed with status " + std::to_string(res->status));
    try {
      auto reply = nlohmann::json::parse(res->body);
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw TransportError(std::string("malformed response: ") + e.what());
    }
  }

 private:
  std::string base_url_, model_, api_key_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const std::string& base_url,
                                                   const std::string& model,
                                                   const std::string& api_key_env) {
  return std::make_unique<HttpTransport>(base_url, model, api_key_env);
}

namespace {

std::string request_with_retries(ChatTransport& transport, const std::string& prompt,
                                 const AnnotateConfig& config) {
  int backoff = config.backoff_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return transport.complete(prompt);
    } catch (const TransportError&) {
      if (attempt >= config.max_attempts) throw;
      if (backoff > 0) std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }
  }
}

}  // namespace

std::vector<Annotation> annotate_batch(const std::vector<UserRecord>& users,
                                       ChatTransport& transport,
                                       const AnnotateConfig& config) {
  if (config.max_attempts < 1) throw DataError("max_attempts must be at least 1");
  if (config.concurrency < 1) throw DataError("concurrency must be at least 1");
  std::vector<Annotation> out(users.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= users.size()) return;
      Annotation a;
      a.user_id = users[i].id;
      try {
        const std::string loc_reply =
            request_with_retries(transport, build_location_prompt(users[i]), config);
        Rng rng = make_stream(config.seed, static_cast<std::uint64_t>(i));
        const std::string demo_prompt = build_demo_prompt(users[i], config.context, rng);
        const std::string demo_reply = request_with_retries(transport, demo_prompt, config);
        const LocationResult loc = parse_location_answer(loc_reply);
        try {
          Annotation parsed = parse_demo_answer(demo_reply);
          parsed.user_id = users[i].id;
          parsed.location = loc;
          parsed.outcome = AnnotationOutcome::Success;
          a = std::move(parsed);
        } catch (const DataError&) {
          a.location = loc;
          a.outcome = AnnotationOutcome::ParseFailure;
        }
      } catch (const TransportError&) {
        a.outcome = AnnotationOutcome::TransportFailure;
      }
      out[i] = std::move(a);
    }
  };
  const int threads = std::min<int>(config.concurrency, static_cast<int>(users.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return out;
}

std::vector<UserRecord> load_users(const std::string& path) {
  const csv::Table t = csv::read_file(path);
  const int c_id = t.column("id");
  const int c_loc = t.column("location");
  const int c_bio = t.column("bio");
  const int c_tweets = t.column("tweets");
  std::vector<UserRecord> out;
  out.reserve(t.rows.size());
  for (size_t r = 0; r < t.rows.size(); ++r) {
    UserRecord u;
    u.id = t.rows[r][c_id];
    if (u.id.empty())
      throw DataError("'" + path + "': row " + std::to_string(r + 2) + " has an empty id");
    u.location = t.rows[r][c_loc];
    u.bio = t.rows[r][c_bio];
    const std::string& raw = t.rows[r][c_tweets];
    if (!raw.empty()) {
      nlohmann::json arr;
      try {
        arr = nlohmann::json::parse(raw);
      } catch (const nlohmann::json::exception&) {
        throw DataError("'" + path + "': row " + std::to_string(r + 2) +
                        " has a tweets field that is not a JSON array");
      }
      if (!arr.is_array())
        throw DataError("'" + path + "': row " + std::to_string(r + 2) +
                        " has a tweets field that is not a JSON array");
      for (const auto& item : arr) u.tweets.push_back(item.get<std::string>());
    }
    out.push_back(std::move(u));
  }
  return out;
}

namespace {

std::string outcome_name(AnnotationOutcome o) {
  switch (o) {
    case AnnotationOutcome::Success: return "success";
    case AnnotationOutcome::ParseFailure: return "parse-failure";
    default: return "transport-failure";
  }
}

std::string level_or_empty(int level) {
  return level < 0 ? std::string() : std::to_string(level + 1);
}

}  // namespace

void write_annotations(const std::string& path, const std::vector<Annotation>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "user,outcome,state,under18,gender,ethnicity,age,education,income,vote2016,choice";
  for (const CategoryBlock& b : annotation_blocks()) out << ",id_" << b.key;
  out << "\n";
  for (const Annotation& a : rows) {
    out << csv::quote(a.user_id) << ',' << outcome_name(a.outcome) << ','
        << (a.location.kind == LocationKind::State ? std::to_string(a.location.state + 1)
            : a.location.kind == LocationKind::NotFromUs ? std::string("not-from-US")
                                                         : std::string())
        << ',' << (a.under18 ? 1 : 0) << ',' << level_or_empty(a.gender) << ','
        << level_or_empty(a.ethnicity) << ',' << level_or_empty(a.age) << ','
        << level_or_empty(a.education) << ',' << level_or_empty(a.income) << ','
        << level_or_empty(a.vote2016) << ',' << level_or_empty(a.choice);
    for (const CategoryBlock& b : annotation_blocks()) {
      auto it = a.block_choice.find(b.key);
      out << ',' << (it == a.block_choice.end() ? std::string() : it->second);
    }
    out << "\n";
  }
}

SurveyDataset annotations_to_survey(const std::vector<Annotation>& rows,
                                    const Schema& schema) {
  SurveyDataset ds;
  ds.schema = schema;
  for (const Annotation& a : rows) {
    if (a.outcome == AnnotationOutcome::TransportFailure) {
      ++ds.dropped["transport failure"];
      continue;
    }
    if (a.outcome == AnnotationOutcome::ParseFailure) {
      ++ds.dropped["unparseable reply"];
      continue;
    }
    if (a.under18) {
      ++ds.dropped["under-18"];
      continue;
    }
    if (a.location.kind != LocationKind::State) {
      ++ds.dropped["state unresolved"];
      continue;
    }
    if (a.gender < 0 || a.ethnicity < 0 || a.age < 0 || a.education < 0 ||
        a.income < 0 || a.vote2016 < 0 || a.choice < 0) {
      ++ds.dropped["missing attribute"];
      continue;
    }
    SurveyRow row;
    row.levels = {a.location.state, a.gender, a.ethnicity, a.age,
                  a.education,      a.income, a.vote2016};
    row.choice = a.choice;
    ds.rows.push_back(std::move(row));
  }
  return ds;
}

}  // namespace aip
