#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "veriloop/gateway.hpp"
#include "test_util.hpp"

using namespace veriloop;

namespace {

std::vector<ChatMessage> small_conversation() {
    return {{Role::System, system_prompt()}, {Role::User, "design a thing with module keyword"}};
}

ModelConfig scripted_model() {
    ModelConfig m;
    m.name = "scripted:test";
    m.backend = BackendKind::Scripted;
    m.max_tokens = 1 << 20;
    return m;
}

// Test server wrapper: binds an ephemeral port, serves one handler.
class LocalServer {
public:
    explicit LocalServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", std::move(handler));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
    }

private:
    httplib::Server server_;
    int port_;
    std::thread thread_;
};

ModelConfig http_model(const std::string& endpoint) {
    ModelConfig m;
    m.name = "gpt-test";
    m.backend = BackendKind::HttpChat;
    m.endpoint = endpoint;
    m.max_tokens = 8192;
    m.input_rate = 0.03;
    m.output_rate = 0.06;
    return m;
}

} // namespace

TEST_CASE("token estimate is ceil(chars / 4)") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("12345678") == 2);
    CHECK(estimate_tokens("123456789") == 3);
    CHECK(estimate_tokens("1") == 1);
}

TEST_CASE("scripted backend pops responses in order then exhausts") {
    CostLedger ledger;
    ScriptedBackend backend({"module m(); endmodule", "second"}, &ledger);
    auto msgs = small_conversation();
    auto model = scripted_model();

    auto r1 = backend.complete(msgs, model);
    CHECK(r1.text == "module m(); endmodule");
    CHECK(r1.token_source == TokenSource::Approximated);
    CHECK(r1.input_tokens == estimate_prompt_tokens(msgs));
    CHECK(r1.output_tokens == estimate_tokens(r1.text));

    auto r2 = backend.complete(msgs, model);
    CHECK(r2.text == "second");
    CHECK_THROWS_AS(backend.complete(msgs, model), script_exhausted_error);

    auto entry = ledger.get(model.name);
    CHECK(entry.calls == 2);
}

TEST_CASE("scripted backend loads directories and separator files") {
    testutil::TempDir dir("scripts");
    dir.write("byfile/000.txt", "first response");
    dir.write("byfile/001.txt", "second response");
    auto from_dir = ScriptedBackend::from_path(dir / "byfile");
    CHECK(from_dir.remaining() == 2);

    dir.write("single.txt", "one\n===RESPONSE===\ntwo\n===RESPONSE===\nthree");
    auto from_file = ScriptedBackend::from_path(dir / "single.txt");
    REQUIRE(from_file.remaining() == 3);
    auto msgs = small_conversation();
    auto model = scripted_model();
    CHECK(from_file.complete(msgs, model).text == "one");
    CHECK(from_file.complete(msgs, model).text == "two");
    CHECK(from_file.complete(msgs, model).text == "three");
}

TEST_CASE("context overflow is reported before any call") {
    ModelConfig model = scripted_model();
    model.max_tokens = 8192;
    ScriptedBackend backend({"never used"});
    std::vector<ChatMessage> msgs = {{Role::System, "s"},
                                     {Role::User, std::string(9000 * 4, 'x')}};
    CHECK_THROWS_AS(backend.complete(msgs, model), context_overflow_error);
    CHECK(backend.remaining() == 1);
}

TEST_CASE("missing credentials fail before any request") {
    ModelConfig model = http_model("http://127.0.0.1:1/v1/chat/completions");
    model.api_key_env = "VERILOOP_TEST_KEY_THAT_IS_UNSET";
    unsetenv(model.api_key_env.c_str());
    HttpChatBackend backend;
    CHECK_THROWS_AS(backend.complete(small_conversation(), model), auth_missing_error);
}

TEST_CASE("ledger arithmetic is exact") {
    CostLedger ledger;
    ModelConfig gpt4;
    gpt4.name = "gpt-4";
    gpt4.input_rate = 0.03;
    gpt4.output_rate = 0.06;
    gpt4.max_tokens = 8192;

    CHECK(ledger_cost(ledger, gpt4) == 0.0);
    ledger.add("gpt-4", 1500, 500);
    CHECK_THAT(ledger_cost(ledger, gpt4), Catch::Matchers::WithinAbs(0.075, 1e-12));

    ModelConfig free_model;
    free_model.name = "codellama";
    free_model.max_tokens = 16384;
    ledger.add("codellama", 123456, 654321);
    CHECK(ledger_cost(ledger, free_model) == 0.0);
}

TEST_CASE("ledger only grows") {
    CostLedger ledger;
    long last_in = 0, last_out = 0, last_calls = 0;
    for (int i = 0; i < 20; i++) {
        ledger.add("m", i * 7 % 50, i * 3 % 40);
        auto e = ledger.get("m");
        CHECK(e.calls > last_calls);
        CHECK(e.input_tokens >= last_in);
        CHECK(e.output_tokens >= last_out);
        last_calls = e.calls;
        last_in = e.input_tokens;
        last_out = e.output_tokens;
    }
}

TEST_CASE("role mapping merges system into first user for bare providers") {
    auto msgs = small_conversation();
    msgs.push_back({Role::Assistant, "module a(); endmodule"});
    msgs.push_back({Role::User, "fix it"});

    ModelConfig native = scripted_model();
    CHECK(map_roles(msgs, native) == msgs);

    ModelConfig bare = scripted_model();
    bare.merge_system_into_user = true;
    auto mapped = map_roles(msgs, bare);
    REQUIRE(mapped.size() == msgs.size() - 1);
    CHECK(mapped[0].role == Role::User);
    CHECK(mapped[0].content.find(system_prompt()) == 0);
    CHECK(mapped[0].content.find("design a thing") != std::string::npos);
    CHECK(mapped[1].role == Role::Assistant);
    CHECK(mapped[2].content == "fix it");
}

TEST_CASE("completion adapter concatenates the conversation") {
    auto msgs = small_conversation();
    auto prompt = concat_completion_prompt(msgs);
    CHECK(prompt.find(system_prompt()) == 0);
    CHECK(prompt.find("design a thing") != std::string::npos);
}

TEST_CASE("http backend parses provider usage") {
    LocalServer server([](const httplib::Request& req, httplib::Response& res) {
        auto body = nlohmann::json::parse(req.body);
        REQUIRE(body["model"] == "gpt-test");
        REQUIRE(body["messages"].size() == 2);
        REQUIRE(body["messages"][0]["role"] == "system");
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "module m(); endmodule"}}}}}},
            {"usage", {{"prompt_tokens", 42}, {"completion_tokens", 7}}}};
        res.set_content(reply.dump(), "application/json");
    });

    CostLedger ledger;
    HttpChatBackend backend(&ledger, [](std::chrono::milliseconds) {});
    auto model = http_model(server.endpoint());
    auto r = backend.complete(small_conversation(), model);
    CHECK(r.text == "module m(); endmodule");
    CHECK(r.input_tokens == 42);
    CHECK(r.output_tokens == 7);
    CHECK(r.token_source == TokenSource::ProviderReported);
    CHECK(ledger.get("gpt-test").input_tokens == 42);
}

TEST_CASE("http backend approximates tokens when usage is missing") {
    LocalServer server([](const httplib::Request&, httplib::Response& res) {
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "12345678"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    HttpChatBackend backend(nullptr, [](std::chrono::milliseconds) {});
    auto r = backend.complete(small_conversation(), http_model(server.endpoint()));
    CHECK(r.token_source == TokenSource::Approximated);
    CHECK(r.output_tokens == 2);
}

TEST_CASE("http backend retries transient failures with backoff") {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) < 2) {
            res.status = 500;
            res.set_content("boom", "text/plain");
            return;
        }
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });

    std::vector<long> delays;
    HttpChatBackend backend(nullptr, [&](std::chrono::milliseconds d) { delays.push_back(d.count()); });
    auto r = backend.complete(small_conversation(), http_model(server.endpoint()));
    CHECK(r.text == "ok");
    CHECK(hits.load() == 3);
    CHECK(delays == std::vector<long>{1000, 2000});
}

TEST_CASE("http backend gives up after three retries") {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 429;
        res.set_content("slow down", "text/plain");
    });

    std::vector<long> delays;
    HttpChatBackend backend(nullptr, [&](std::chrono::milliseconds d) { delays.push_back(d.count()); });
    try {
        backend.complete(small_conversation(), http_model(server.endpoint()));
        FAIL("expected provider_error");
    } catch (const provider_error& e) {
        CHECK(e.status == 429);
        CHECK(e.body == "slow down");
    }
    CHECK(hits.load() == 4); // initial try + 3 retries
    CHECK(delays == std::vector<long>{1000, 2000, 4000});
}

TEST_CASE("http backend treats other 4xx as fatal immediately") {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    HttpChatBackend backend(nullptr, [](std::chrono::milliseconds) {});
    CHECK_THROWS_AS(backend.complete(small_conversation(), http_model(server.endpoint())),
                    provider_error);
    CHECK(hits.load() == 1);
}

TEST_CASE("sampling map passes through with native JSON types") {
    nlohmann::json seen;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    auto model = http_model(server.endpoint());
    model.sampling = {{"temperature", "0.2"}, {"max_tokens", "512"}, {"stream", "false"}};
    HttpChatBackend backend(nullptr, [](std::chrono::milliseconds) {});
    backend.complete(small_conversation(), model);
    CHECK(seen["temperature"] == 0.2);
    CHECK(seen["max_tokens"] == 512);
    CHECK(seen["stream"] == false);
}

TEST_CASE("completion-only models send one concatenated prompt") {
    nlohmann::json seen;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen = nlohmann::json::parse(req.body);
        nlohmann::json reply = {{"choices", {{{"text", "module m(); endmodule"}}}}};
        res.set_content(reply.dump(), "application/json");
    });
    auto model = http_model(server.endpoint());
    model.completion_only = true;
    HttpChatBackend backend(nullptr, [](std::chrono::milliseconds) {});
    auto r = backend.complete(small_conversation(), model);
    CHECK(r.text == "module m(); endmodule");
    CHECK(seen.contains("prompt"));
    CHECK_FALSE(seen.contains("messages"));
}

TEST_CASE("model config file round trips") {
    testutil::TempDir dir("models");
    dir.write("models.conf",
              "# comment\n"
              "[gpt-4]\n"
              "endpoint = https://api.openai.com/v1/chat/completions\n"
              "api_key_env = OPENAI_API_KEY\n"
              "max_tokens = 8192\n"
              "input_rate = 0.03\n"
              "output_rate = 0.06\n"
              "sampling.temperature = 0.7\n"
              "\n"
              "[local]\n"
              "endpoint = http://127.0.0.1:8080/v1/chat/completions\n"
              "max_tokens = 4096\n"
              "merge_system_into_user = true\n");
    auto models = load_model_configs(dir / "models.conf");
    REQUIRE(models.size() == 2);
    CHECK(models.at("gpt-4").api_key_env == "OPENAI_API_KEY");
    CHECK(models.at("gpt-4").max_tokens == 8192);
    CHECK(models.at("gpt-4").input_rate == 0.03);
    CHECK(models.at("gpt-4").sampling.at("temperature") == "0.7");
    CHECK(models.at("local").merge_system_into_user);
    CHECK(models.at("local").api_key_env.empty());
}

TEST_CASE("model config file rejects bad input") {
    testutil::TempDir dir("models");
    dir.write("nolimit.conf", "[m]\nendpoint = http://x/y\n");
    CHECK_THROWS_AS(load_model_configs(dir / "nolimit.conf"), gateway_error);
    dir.write("junk.conf", "[m]\nwhatisthis\n");
    CHECK_THROWS_AS(load_model_configs(dir / "junk.conf"), gateway_error);
    dir.write("unknown.conf", "[m]\nmax_tokens = 10\nbogus_key = 1\n");
    CHECK_THROWS_AS(load_model_configs(dir / "unknown.conf"), gateway_error);
}
