#include "factscope/service.hpp"

#include <regex>

#include <httplib.h>

#include "factscope/csv.hpp"
#include "factscope/text_util.hpp"

namespace factscope {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NOT_FOUND:
    case ErrorCode::UNKNOWN_NODE:
    case ErrorCode::UNKNOWN_SESSION:
    case ErrorCode::UNKNOWN_DATASET:
      return 404;
    case ErrorCode::NODE_BUSY:
      return 409;
    case ErrorCode::LLM_UNAVAILABLE:
    case ErrorCode::PROVIDER_UNAVAILABLE:
    case ErrorCode::MALFORMED_RESPONSE:
    case ErrorCode::EMPTY_RESPONSE:
    case ErrorCode::REPLAY_MISS:
    case ErrorCode::DIMENSION_MISMATCH:
      return 502;
    case ErrorCode::INTERNAL:
    case ErrorCode::IO_ERROR:
      return 500;
    default:
      return 400;
  }
}

struct Service::Server {
  httplib::Server http;
};

Service::Service(Runtime& runtime)
    : runtime_(runtime),
      sessions_(*runtime.agent, SessionOptions{std::nullopt,
                                               runtime.transcript ? runtime.transcript->path().filename().string() : "",
                                               config_digest(runtime.config)}),
      server_(std::make_unique<Server>()) {
  const int threads = std::max(1, runtime_.config.server_threads);
  server_->http.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ApiResponse r = dispatch(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  const std::string any = R"(/.*)";
  server_->http.Get(any, handler);
  server_->http.Post(any, handler);
  server_->http.Put(any, handler);
  server_->http.Delete(any, handler);
}

Service::~Service() { stop(); }

bool Service::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->http.bind_to_any_port(host);
    if (p <= 0) return false;
    port_ = p;
    return true;
  }
  if (!server_->http.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void Service::serve() { server_->http.listen_after_bind(); }

void Service::listen(const std::string& host, int port) {
  if (!bind(host, port)) throw Error(ErrorCode::IO_ERROR, "cannot bind " + host + ":" + std::to_string(port));
  serve();
}

void Service::stop() {
  if (server_ && server_->http.is_running()) server_->http.stop();
}

ApiResponse Service::dispatch(std::string_view method, std::string_view path, std::string_view body) {
  try {
    nlohmann::json parsed = nlohmann::json::object();
    if (!text::trim(body).empty()) {
      parsed = nlohmann::json::parse(body, nullptr, false);
      if (parsed.is_discarded()) throw Error(ErrorCode::BAD_REQUEST, "request body is not valid JSON");
    }
    return route(method, path, parsed);
  } catch (const Error& e) {
    return {http_status(e.code()), e.to_json()};
  } catch (const nlohmann::json::exception& e) {
    return {400, Error(ErrorCode::BAD_REQUEST, std::string("bad request field: ") + e.what()).to_json()};
  } catch (const std::exception& e) {
    return {500, Error(ErrorCode::INTERNAL, e.what()).to_json()};
  }
}

namespace {

const std::string& require_string(const nlohmann::json& body, const char* key) {
  if (!body.is_object() || !body.contains(key) || !body[key].is_string()) {
    throw Error(ErrorCode::BAD_REQUEST, std::string("request needs a string field \"") + key + "\"");
  }
  return body[key].get_ref<const std::string&>();
}

Stance require_stance(const nlohmann::json& body) {
  auto s = stance_from_string(require_string(body, "stance"));
  if (!s) throw Error(ErrorCode::BAD_REQUEST, "stance must be \"support\" or \"oppose\"");
  return *s;
}

nlohmann::json story_json(const std::vector<StoryRef>& story) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : story) out.push_back({{"node_id", s.node_id}, {"fact_index", s.fact_index}, {"fact", s.snapshot}});
  return {{"story", out}};
}

nlohmann::json dataset_json(const Dataset& d) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : d.fields) fields.push_back(to_json(f));
  return {{"id", d.id}, {"name", d.name}, {"provenance", d.provenance}, {"rows", d.rows.size()}, {"fields", fields}};
}

}  // namespace

ApiResponse Service::route(std::string_view method, std::string_view path_view, const nlohmann::json& body) {
  static const std::regex session_re(R"(^/v1/sessions/([^/]+)(/.*)?$)");
  static const std::regex node_re(R"(^/nodes/([^/]+)/(expand|query|facts)(?:/(\d+))?$)");
  const std::string path(path_view);
  const std::string m(method);
  auto not_found = [&]() -> ApiResponse {
    throw Error(ErrorCode::NOT_FOUND, "no route for " + m + " " + path);
  };

  if (path == "/v1/health" && m == "GET") return {200, {{"status", "ok"}}};
  if (path == "/v1/datasets") {
    if (m == "GET") {
      nlohmann::json out = nlohmann::json::array();
      for (const auto& d : runtime_.store->datasets()) out.push_back(dataset_json(*d));
      return {200, {{"datasets", out}}};
    }
    if (m == "POST") {
      const std::string& name = require_string(body, "name");
      const std::string& csv_text = require_string(body, "csv");
      auto records = csv::parse(csv_text);
      if (records.empty()) throw Error(ErrorCode::EMPTY_SOURCE, "uploaded CSV is empty");
      RawTable raw{records.front(), {records.begin() + 1, records.end()}};
      IngestOptions opts;
      opts.wide_wdi = body.value("wide_wdi", false);
      auto d = runtime_.store->ingest(raw, name, body.value("provenance", "upload:" + name), opts);
      return {201, dataset_json(*d)};
    }
    return not_found();
  }
  if (path == "/v1/sessions") {
    if (m == "POST") {
      Session& s = sessions_.create(require_string(body, "statement"));
      return {201, s.tree_json()};
    }
    if (m == "GET") return {200, {{"sessions", sessions_.ids()}}};
    return not_found();
  }

  std::smatch sm;
  if (!std::regex_match(path, sm, session_re)) return not_found();
  Session& session = sessions_.get(sm[1].str());
  const std::string rest = sm[2].matched ? sm[2].str() : "";

  if (rest == "/tree" && m == "GET") return {200, session.tree_json()};
  if (rest == "/story") {
    if (m == "GET") return {200, story_json(session.story())};
    if (m == "POST") {
      if (!body.contains("refs") || !body["refs"].is_array()) {
        throw Error(ErrorCode::BAD_REQUEST, "request needs a \"refs\" array");
      }
      std::vector<std::pair<std::string, std::size_t>> refs;
      for (const auto& r : body["refs"]) refs.emplace_back(r.at("node_id").get<std::string>(), r.at("fact_index").get<std::size_t>());
      return {200, story_json(session.add_to_story(refs))};
    }
    return not_found();
  }
  if (rest == "/reward" && m == "GET") {
    const double t = runtime_.config.relevance_threshold;
    return {200, {{"threshold", t}, {"reward", session.reward(t)}}};
  }
  if (rest == "/blob" && m == "GET") return {200, nlohmann::json::parse(session.save())};

  std::smatch nm;
  if (!std::regex_match(rest, nm, node_re)) return not_found();
  const std::string node_id = nm[1].str();
  const std::string action = nm[2].str();
  const bool indexed = nm[3].matched;
  if (action == "expand" && !indexed && m == "POST") {
    return {200, to_json(session.expand(node_id, require_stance(body)))};
  }
  if (action == "query" && !indexed && m == "PUT") {
    session.re_retrieve(node_id, require_string(body, "query"));
    return {200, session.node_json(node_id)};
  }
  if (action == "facts" && !indexed && m == "GET") return {200, session.facts_json(node_id)};
  if (action == "facts" && indexed && m == "PUT") {
    const nlohmann::json& edits = body.contains("fact") ? body["fact"] : body;
    return {200, session.edit_fact(node_id, std::stoul(nm[3].str()), edits)};
  }
  return not_found();
}

}  // namespace factscope
