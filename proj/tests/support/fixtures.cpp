#include "fixtures.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;

namespace fixtures {

fs::path source_dir() { return FACTSCOPE_SOURCE_DIR; }
fs::path data_dir() { return source_dir() / "data"; }

std::vector<fs::path> sample_csvs() {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(data_dir() / "sample")) {
    if (e.path().extension() == ".csv") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

fs::path script_path() { return data_dir() / "fixtures" / "income_inequality_script.json"; }
fs::path transcript_path() { return data_dir() / "fixtures" / "income_inequality_transcript.jsonl"; }
fs::path session_path() { return data_dir() / "fixtures" / "income_inequality_session.json"; }

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("factscope_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::unique_ptr<factscope::Runtime> scripted_runtime(std::optional<factscope::TranscriptChoice> transcript) {
  auto rt = factscope::Runtime::build(factscope::load_config(data_dir() / "config" / "scripted.json"), transcript);
  for (const auto& csv : sample_csvs()) rt->store->ingest_csv_file(csv);
  return rt;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace fixtures
