#include <gtest/gtest.h>

#include "factscope/session.hpp"
#include "fixtures.hpp"

using namespace factscope;

namespace {

struct Recorded {
  std::string blob;
  std::vector<TranscriptEntry> entries;
};

// Same steps as data/fixtures/regenerate.sh, in process.
Recorded regenerate() {
  const auto dir = fixtures::temp_dir("regen");
  const auto path = dir / fixtures::transcript_path().filename();
  auto rt = fixtures::scripted_runtime(TranscriptChoice{path, TranscriptMode::record});
  SessionOptions o;
  o.transcript_ref = path.filename().string();
  o.config_digest = config_digest(rt->config);
  auto s = Session::create("s1", fixtures::kStatement, *rt->agent, o);
  follow_recommendations(*s, 2);
  return {s->save(), read_transcript(path)};
}

}  // namespace

TEST(Fixtures, CommittedFixturesAreFresh) {
  auto fresh = regenerate();
  EXPECT_EQ(fresh.blob, fixtures::read_file(fixtures::session_path()))
      << "rerun data/fixtures/regenerate.sh after changing the pipeline or the script";
  auto committed = read_transcript(fixtures::transcript_path());
  ASSERT_EQ(fresh.entries.size(), committed.size());
  for (std::size_t i = 0; i < committed.size(); ++i) {
    EXPECT_EQ(fresh.entries[i].kind, committed[i].kind) << i;
    EXPECT_EQ(fresh.entries[i].input_hash, committed[i].input_hash) << i;
    EXPECT_EQ(fresh.entries[i].response, committed[i].response) << i;
  }
}

TEST(Fixtures, SessionReplaysFromTranscriptOnly) {
  auto rt = fixtures::scripted_runtime(TranscriptChoice{fixtures::transcript_path(), TranscriptMode::replay});
  const auto original = load_session(fixtures::read_file(fixtures::session_path()));
  auto rebuilt = replay_session(original, *rt->agent);
  EXPECT_EQ(save_session(rebuilt), save_session(original));
  EXPECT_EQ(rt->transcript->misses(), 0u);
  EXPECT_GT(rt->transcript->hits(), 0u);
}
