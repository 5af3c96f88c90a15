#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "aip/error.hpp"
#include "aip/frame.hpp"
#include "aip/rng.hpp"
#include "aip/schema.hpp"

namespace aip {

struct UserRecord {
  std::string id;
  std::string location;
  std::string bio;  // self-reported description, screen name, location line
  std::vector<std::string> tweets;
};

// One survey-like category block: header line plus identifier/label options.
struct CategoryBlock {
  std::string key;     // stable machine name, e.g. "vote2020"
  std::string text;    // verbatim block text, newline-terminated options
  std::vector<std::string> identifiers;
};

// The ten classification blocks in canonical order (the registration block
// starts at R2; the source material has no R1).
const std::vector<CategoryBlock>& annotation_blocks();

// Alphabetical US state list, DC included (51 entries).
const std::vector<std::string>& us_states();

std::string build_location_prompt(const UserRecord& user);

// Splices bio and the first `context` tweets into the template and appends
// the category blocks in a uniformly random order.
std::string build_demo_prompt(const UserRecord& user, int context, Rng& rng);

// Same prompt with an explicit block order (a permutation of 0..9); the rng
// overload draws the order and delegates here.
std::string build_demo_prompt(const UserRecord& user, int context,
                              const std::vector<int>& order);

enum class LocationKind { State, NotFromUs, Unresolved };

struct LocationResult {
  LocationKind kind = LocationKind::Unresolved;
  int state = -1;  // index into us_states() when kind == State
};

// Case-insensitive scan for any state name (longest names first); the exact
// phrase "Not from US" maps to NotFromUs; anything else is Unresolved.
LocationResult parse_location_answer(const std::string& text);

enum class AnnotationOutcome { Success, ParseFailure, TransportFailure };

struct Annotation {
  std::string user_id;
  AnnotationOutcome outcome = AnnotationOutcome::ParseFailure;
  LocationResult location;
  // chosen identifier per block key; absent keys are missing
  std::map<std::string, std::string> block_choice;
  // mapped model levels, -1 when missing (0-based)
  int gender = -1;     // 2 levels
  int ethnicity = -1;  // 5 levels
  int age = -1;        // 6 levels
  int education = -1;  // 2 levels
  int income = -1;     // 5 levels
  int vote2016 = -1;   // 4 levels
  int choice = -1;     // 5 levels, the 2020 vote
  bool under18 = false;
};

// Parses block identifiers out of a reply. A block with two distinct
// identifiers is dropped; a reply with no parsed block at all throws.
Annotation parse_demo_answer(const std::string& text);

struct TransportError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chat-completion client at temperature 0.
class ChatTransport {
 public:
  virtual ~ChatTransport() = default;
  virtual std::string complete(const std::string& prompt) = 0;
};

// Scripted transport for tests: the handler sees each prompt verbatim.
class MockTransport : public ChatTransport {
 public:
  explicit MockTransport(std::function<std::string(const std::string&)> handler)
      : handler_(std::move(handler)) {}
  std::string complete(const std::string& prompt) override { return handler_(prompt); }

 private:
  std::function<std::string(const std::string&)> handler_;
};

// OpenAI-style chat endpoint over HTTP; reads the API key from the
// environment. Never exercised by tests.
std::unique_ptr<ChatTransport> make_http_transport(const std::string& base_url,
                                                   const std::string& model,
                                                   const std::string& api_key_env);

struct AnnotateConfig {
  int context = 10;        // tweets per prompt
  int max_attempts = 3;    // per request
  int backoff_ms = 250;    // doubles per retry
  int concurrency = 4;
  std::uint64_t seed = 1;  // drives the per-user block order
};

// Two requests per user (location, then demographics). Transport failures
// after retries and unparseable replies are recorded per user; the batch
// always completes. Results are ordered as the input users.
std::vector<Annotation> annotate_batch(const std::vector<UserRecord>& users,
                                       ChatTransport& transport,
                                       const AnnotateConfig& config);

// users.csv: id,location,bio,tweets with tweets as a JSON array string.
std::vector<UserRecord> load_users(const std::string& path);

// annotations.csv: user, outcome, mapped levels (1-based, empty when missing)
// and the chosen identifier per block.
void write_annotations(const std::string& path, const std::vector<Annotation>& rows);

// Converts successful annotations to survey rows against the election schema.
// Rows without a state, under-18 rows and rows missing any model field are
// dropped with reasons.
SurveyDataset annotations_to_survey(const std::vector<Annotation>& rows,
                                    const Schema& schema);

}  // namespace aip
