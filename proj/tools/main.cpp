#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "factscope/config.hpp"
#include "factscope/service.hpp"
#include "factscope/session.hpp"

namespace fs = std::filesystem;
using namespace factscope;

namespace {

struct Common {
  std::string config_path;
  std::string store_dir;
  std::vector<std::string> data;
  std::string script;
  std::string replay;
  std::string record;
};

void add_common(CLI::App* app, Common& c, bool llm) {
  app->add_option("--config", c.config_path, "JSON config file");
  app->add_option("--store", c.store_dir, "Dataset store directory");
  app->add_option("--data", c.data, "CSV files to ingest into the store before running");
  if (!llm) return;
  app->add_option("--script", c.script, "Use a scripted LLM backend from this JSON file");
  auto* replay = app->add_option("--replay", c.replay, "Answer LLM calls from this transcript only");
  auto* record = app->add_option("--record", c.record, "Append LLM calls to this transcript");
  replay->excludes(record);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IO_ERROR, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IO_ERROR, "cannot write " + p.string());
  out << text;
}

std::unique_ptr<Runtime> make_runtime(const Common& c) {
  Config config = c.config_path.empty() ? Config{} : load_config(c.config_path);
  if (!c.store_dir.empty()) config.store_dir = c.store_dir;
  if (!c.script.empty()) {
    config.llm_provider = "scripted";
    config.script = c.script;
  }
  std::optional<TranscriptChoice> transcript;
  if (!c.replay.empty()) transcript = TranscriptChoice{c.replay, TranscriptMode::replay};
  if (!c.record.empty()) transcript = TranscriptChoice{c.record, TranscriptMode::record};
  auto rt = Runtime::build(std::move(config), transcript);
  for (const auto& path : c.data) rt->store->ingest_csv_file(path);
  return rt;
}

SessionOptions session_options(const Runtime& rt, std::optional<Stance> plan_stance) {
  SessionOptions o;
  o.root_plan_stance = plan_stance;
  if (rt.transcript) o.transcript_ref = rt.transcript->path().filename().string();
  o.config_digest = config_digest(rt.config);
  return o;
}

int cmd_ingest(const Common& c, const std::string& path, bool wide_wdi) {
  auto rt = make_runtime(c);
  IngestOptions opts;
  opts.wide_wdi = wide_wdi;
  auto d = rt->store->ingest_csv_file(path, std::nullopt, opts);
  nlohmann::json out = {{"ingested", d->id}, {"catalog", nlohmann::json::array()}};
  for (const auto& f : rt->store->list_fields()) out["catalog"].push_back(to_json(f));
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_retrieve(const Common& c, const std::string& statement, const std::string& stance, int depth,
                 const std::string& out_path) {
  auto rt = make_runtime(c);
  std::optional<Stance> plan_stance;
  if (stance != "both") plan_stance = stance_from_string(stance);
  auto session = Session::create("s1", statement, *rt->agent, session_options(*rt, plan_stance));
  follow_recommendations(*session, depth);
  const std::string blob = session->save();
  write_file(out_path, blob);
  const RetrievalTree t = session->snapshot();
  nlohmann::json summary = {{"session_id", t.session_id},
                            {"nodes", t.nodes.size()},
                            {"recommended_node", t.recommended_node ? nlohmann::json(*t.recommended_node) : nlohmann::json()},
                            {"reward", session_reward(t, rt->config.relevance_threshold)},
                            {"out", out_path}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_replay(Common c, const std::string& blob_path, const std::string& transcript_path) {
  c.record.clear();
  c.replay = transcript_path;
  const std::string blob = read_file(blob_path);
  const RetrievalTree original = load_session(blob);
  auto rt = make_runtime(c);
  const RetrievalTree rebuilt = replay_session(original, *rt->agent);
  const std::string again = save_session(rebuilt);
  const bool identical = again == blob;
  nlohmann::json report = {{"status", identical ? "identical" : "different"},
                           {"nodes", rebuilt.nodes.size()},
                           {"transcript_hits", rt->transcript->hits()},
                           {"bytes", again.size()}};
  if (!identical) {
    std::size_t i = 0;
    while (i < again.size() && i < blob.size() && again[i] == blob[i]) ++i;
    report["first_difference"] = i;
  }
  std::cout << report.dump(2) << "\n";
  return identical ? 0 : 3;
}

int cmd_facts(const std::string& tree_path, const std::string& node_id, const std::string& chart_dir) {
  const RetrievalTree tree = load_session(read_file(tree_path));
  const RetrievalNode& node = tree.at(node_id);
  nlohmann::json listing = nlohmann::json::array();
  for (std::size_t k = 0; k < node.facts.size(); ++k) {
    nlohmann::json fact = to_json(node.facts[k], node);
    if (!chart_dir.empty()) {
      const fs::path p = fs::path(chart_dir) / (node.id + "_fact" + std::to_string(k) + ".json");
      write_file(p, fact["chart"].dump(2) + "\n");
      fact["chart_file"] = p.string();
    }
    listing.push_back({{"index", k},
                       {"description", node.facts[k].fact.description},
                       {"relevance", node.facts[k].relevance},
                       {"label", to_string(node.facts[k].evaluation.predicted_label)},
                       {"chart_file", fact.value("chart_file", "")}});
  }
  std::cout << nlohmann::json{{"node", node.id}, {"query", node.query}, {"facts", listing}}.dump(2) << "\n";
  return 0;
}

int cmd_serve(const Common& c, int port_override, const std::string& host_override) {
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  auto rt = make_runtime(c);
  const std::string host = host_override.empty() ? rt->config.host : host_override;
  const int port = port_override >= 0 ? port_override : rt->config.port;
  Service service(*rt);
  if (!service.bind(host, port)) throw Error(ErrorCode::IO_ERROR, "cannot bind " + host + ":" + std::to_string(port));
  std::cerr << "listening on http://" << host << ":" << service.port() << "/v1\n";

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.stop();
  });
  service.serve();
  // serve() can also return on its own (listen failure); wake the waiter.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stance-based data fact retrieval"};
  app.require_subcommand(1);
  Common common;

  std::string path;
  bool wide_wdi = false;
  auto* ingest = app.add_subcommand("ingest", "Ingest a CSV file and print the field catalog");
  ingest->add_option("path", path, "CSV file")->required();
  ingest->add_flag("--wide-wdi", wide_wdi, "Force the wide WDI year-column pivot");
  add_common(ingest, common, false);

  int port = -1;
  std::string host;
  auto* serve = app.add_subcommand("serve", "Run the /v1 HTTP API");
  serve->add_option("--port", port, "Port (0 picks a free one)");
  serve->add_option("--host", host, "Bind address");
  add_common(serve, common, true);

  std::string statement, stance = "both", out;
  int depth = 0;
  auto* retrieve = app.add_subcommand("retrieve", "Build a retrieval tree, always expanding the recommended node");
  retrieve->add_option("--statement", statement, "Statement to retrieve facts for")->required();
  retrieve->add_option("--stance", stance, "Stance used for planning")
      ->check(CLI::IsMember({"both", "support", "oppose"}));
  retrieve->add_option("--depth", depth, "Expansions after the initial one")->check(CLI::NonNegativeNumber);
  retrieve->add_option("--out", out, "Session blob output path")->required();
  add_common(retrieve, common, true);

  std::string blob, transcript;
  auto* replay = app.add_subcommand("replay", "Rebuild a saved session from its transcript and compare bytes");
  replay->add_option("blob", blob, "Session blob")->required();
  replay->add_option("transcript", transcript, "Transcript JSONL")->required();
  add_common(replay, common, false);

  std::string tree_path, node, chart_dir;
  auto* facts = app.add_subcommand("facts", "List a node's facts and write their chart specs");
  facts->add_option("tree", tree_path, "Session blob written by retrieve")->required();
  facts->add_option("--node", node, "Node id")->required();
  facts->add_option("--emit-charts", chart_dir, "Directory for chart JSON files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << Error(ErrorCode::BAD_REQUEST, e.what()).to_json().dump() << "\n";
    return 2;
  }

  try {
    if (*ingest) return cmd_ingest(common, path, wide_wdi);
    if (*serve) return cmd_serve(common, port, host);
    if (*retrieve) return cmd_retrieve(common, statement, stance, depth, out);
    if (*replay) return cmd_replay(common, blob, transcript);
    if (*facts) return cmd_facts(tree_path, node, chart_dir);
  } catch (const Error& e) {
    std::cerr << e.to_json().dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << Error(ErrorCode::INTERNAL, e.what()).to_json().dump() << "\n";
    return 1;
  }
  return 0;
}
