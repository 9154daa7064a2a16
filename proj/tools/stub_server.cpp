// tfw-stub-server: serves a deterministic simulated model on an
// OpenAI-compatible /chat/completions endpoint, for recording cassettes offline.

#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "stub_model.hpp"
#include "tfw/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Simulated chat-completions server"};
  std::vector<std::string> corpora;
  std::string host = "127.0.0.1";
  int port = 8089;
  tfw::stub::SimulatedModel::Options options;
  app.add_option("--corpus", corpora, "TASK=path.jsonl (repeatable)")->required();
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  app.add_option("--error-rate", options.error_rate, "Probability of each simulated mistake")
      ->check(CLI::Range(0.0, 1.0));
  app.add_flag("!--no-chatter", options.chatter, "Answer without conversational filler");
  CLI11_PARSE(app, argc, argv);

  try {
    std::vector<std::pair<tfw::TaskSchema, std::vector<tfw::MixedSample>>> loaded;
    for (const auto& spec : corpora) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw tfw::ConfigError("--corpus expects TASK=path");
      const auto& schema = tfw::SchemaRegistry::builtin().get(tfw::parse_task_id(spec.substr(0, eq)));
      loaded.emplace_back(schema, tfw::load_corpus(spec.substr(eq + 1), schema));
    }
    const tfw::stub::SimulatedModel model(std::move(loaded), options);

    httplib::Server server;
    auto handler = [&](const httplib::Request& request, httplib::Response& response) {
      const auto body = nlohmann::json::parse(request.body, nullptr, false);
      if (body.is_discarded() || !body.contains("messages")) {
        response.status = 400;
        response.set_content(R"({"error":{"message":"bad request"}})", "application/json");
        return;
      }
      tfw::ChatRequest chat;
      for (const auto& message : body["messages"]) {
        chat.messages.push_back({message.value("role", ""), message.value("content", "")});
      }
      if (body.contains("seed")) chat.seed = body["seed"].get<std::int64_t>();
      response.set_content(tfw::stub::chat_response_body(model.answer(chat)), "application/json");
    };
    server.Post("/v1/chat/completions", handler);
    server.Post("/chat/completions", handler);
    std::cerr << "listening on http://" << host << ":" << port << "/v1\n";
    if (!server.listen(host, port)) throw tfw::Error("cannot listen on port " + std::to_string(port));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
