// Deterministic stand-in for a remote classification/translation service.
// Speaks one JSON object per line on stdin/stdout, or HTTP with --http.

#include <atomic>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "wsi/classify.hpp"
#include "wsi/synthetic.hpp"

using nlohmann::json;

namespace {

struct Behaviour {
  std::unique_ptr<wsi::KeywordMockClassifier> classifier;
  int fail_first = 0;
  std::string fail_model;
  std::string translate_prefix;
  std::atomic<int> served{0};
};

json handle(Behaviour& b, const json& request) {
  const int n = b.served.fetch_add(1);
  if (n < b.fail_first) return {{"error", "injected failure"}};
  if (request.contains("texts")) {
    json out = json::array();
    for (const auto& t : request.at("texts")) out.push_back(b.translate_prefix + t.get<std::string>());
    return {{"translations", out}};
  }
  const auto model = request.value("model", std::string());
  if (!b.fail_model.empty() && model == b.fail_model) return {{"error", "model unavailable"}};
  json probs = json::array();
  json unrelated = json::array();
  for (const auto& c : request.at("comments")) {
    auto p = b.classifier->classify_one(c.get<std::string>());
    probs.push_back({p.u, p.v, p.w});
    unrelated.push_back(p.is_unrelated());
  }
  return {{"probabilities", probs}, {"unrelated", unrelated}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock classification and translation backend"};
  std::string rules_path;
  int port = -1;
  Behaviour b;
  app.add_option("--rules", rules_path, "Keyword rules file (default: synthetic vocabulary)");
  app.add_option("--http", port, "Serve HTTP on this port (0 picks a free port) instead of stdio");
  app.add_option("--fail-first", b.fail_first, "Answer the first N requests with an error");
  app.add_option("--fail-model", b.fail_model, "Answer every request for this model with an error");
  app.add_option("--translate-prefix", b.translate_prefix, "Prefix added to translated texts");
  CLI11_PARSE(app, argc, argv);

  try {
    b.classifier = wsi::mock_keyword_classifier(rules_path.empty() ? wsi::synthetic_keyword_rules()
                                                                   : wsi::load_keyword_rules(rules_path));
  } catch (const std::exception& e) {
    std::cerr << "wsi_mock_backend: " << e.what() << "\n";
    return 1;
  }

  if (port >= 0) {
    httplib::Server server;
    server.Post(".*", [&](const httplib::Request& req, httplib::Response& res) {
      try {
        auto reply = handle(b, json::parse(req.body));
        res.status = reply.contains("error") ? 503 : 200;
        res.set_content(reply.dump(), "application/json");
      } catch (const std::exception& e) {
        res.status = 400;
        res.set_content(json{{"error", e.what()}}.dump(), "application/json");
      }
    });
    if (port == 0) port = server.bind_to_any_port("127.0.0.1");
    else if (!server.bind_to_port("127.0.0.1", port)) port = -1;
    if (port < 0) {
      std::cerr << "wsi_mock_backend: cannot bind\n";
      return 1;
    }
    std::cout << "listening on http://127.0.0.1:" << port << "/" << std::endl;
    server.listen_after_bind();
    return 0;
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    json reply;
    try {
      reply = handle(b, json::parse(line));
    } catch (const std::exception& e) {
      reply = {{"error", e.what()}};
    }
    std::cout << reply.dump() << std::endl;
  }
  return 0;
}
