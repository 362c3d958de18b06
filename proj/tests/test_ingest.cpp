#include "doctest.h"

#include "csd/ingest.hpp"
#include "support/synth.hpp"

#include "httplib.h"

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

using namespace csd;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() / ("csd_ingest_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path operator/(const std::string& name) const { return path / name; }
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

CorpusFile parse(const std::string& text) {
    std::istringstream in(text);
    return parse_corpus(in, "inline");
}

// Stub /embed provider on an ephemeral port.  The handler decides the reply.
struct StubProvider {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    std::mutex mu;
    std::vector<std::string> bodies;

    explicit StubProvider(std::function<void(const nlohmann::json&, httplib::Response&)> reply) {
        server.Post("/embed", [this, reply](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            {
                std::lock_guard lock(mu);
                bodies.push_back(req.body);
            }
            reply(nlohmann::json::parse(req.body), res);
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubProvider() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

// Deterministic unit vector per text, so equal texts embed identically.
std::vector<double> text_vector(const std::string& text, std::size_t dim) {
    std::seed_seq seq(text.begin(), text.end());
    synth::Rng rng(seq);
    return synth::random_unit(dim, rng);
}

void reply_vectors(const nlohmann::json& req, httplib::Response& res, std::size_t dim, std::size_t drop = 0) {
    nlohmann::json out;
    out["model"] = "stub-model";
    out["dim"] = dim;
    out["embeddings"] = nlohmann::json::array();
    const auto& texts = req.at("texts");
    for (std::size_t i = 0; i + drop < texts.size(); ++i) out["embeddings"].push_back(text_vector(texts[i], dim));
    res.set_content(out.dump(), "application/json");
}

}  // namespace

TEST_CASE("corpus parsing") {
    auto c = parse(R"({"id": "a", "sentences": ["One.", "Two.", "Three."]})"
                   "\n"
                   R"({"id": "b", "text": "A. B? C!", "scores": [3, 4], "label": 3.5})"
                   "\n\n");
    REQUIRE(c.articles.size() == 2);
    CHECK(c.articles[0].size() == 3);
    CHECK(c.articles[1].sentences() == std::vector<std::string>{"A.", "B?", "C!"});
    CHECK(c.scores[1] == std::vector<double>{3, 4});
    CHECK(c.labels[1] == std::optional<double>(3.5));
    CHECK_FALSE(c.labels[0].has_value());
    CHECK(c.find("b").id() == "b");
    CHECK_THROWS_AS(c.find("zzz"), DataError);
}

TEST_CASE("sentence splitter") {
    CHECK(split_sentences("A. B? C!") == std::vector<std::string>{"A.", "B?", "C!"});
    CHECK(split_sentences("  Version 2.5 shipped.  Next one soon") ==
          std::vector<std::string>{"Version 2.5 shipped.", "Next one soon"});
    CHECK(split_sentences("Wait... really?!\nYes.") == std::vector<std::string>{"Wait...", "really?!", "Yes."});
    CHECK(split_sentences("   ").empty());
}

TEST_CASE("corpus errors") {
    CHECK_THROWS_AS(parse(""), DomainError);
    CHECK_THROWS_WITH(parse("{\"id\":\"a\",\"sentences\":[\"x\"]}\n{not json"), doctest::Contains("inline:2:"));
    CHECK_THROWS_WITH(parse("{\"id\":\"a\",\"sentences\":[\"x\"]}\n{\"id\":\"a\",\"sentences\":[\"y\"]}"),
                      doctest::Contains("duplicate"));
    CHECK_THROWS_AS(parse("{\"sentences\":[\"x\"]}"), DataError);
    CHECK_THROWS_AS(parse("{\"id\":\"a\",\"sentences\":[\"x\", \"  \"]}"), DataError);
    CHECK_THROWS_AS(load_corpus("/nonexistent/corpus.jsonl"), DataError);
}

TEST_CASE("corpus save and reload") {
    TempDir dir;
    auto c = parse(R"({"id": "a", "sentences": ["One.", "Two."], "scores": [2, 3], "label": 2.5})");
    save_corpus(c, dir / "c.jsonl");
    auto back = load_corpus(dir / "c.jsonl");
    CHECK(back.articles[0].sentences() == c.articles[0].sentences());
    CHECK(back.scores[0] == c.scores[0]);
    CHECK(back.labels[0] == c.labels[0]);
}

TEST_CASE("binary embedding layout") {
    TempDir dir;
    EmbeddingStore store;
    store.put(EmbeddingMatrix("a", 4, {0.5, 0.5, 0.5, 0.5}));
    save_embeddings(store, dir / "e.bin", EmbeddingFormat::binary);
    auto bytes = slurp(dir / "e.bin");
    REQUIRE(bytes.size() == 16 + 16);
    CHECK(bytes.substr(0, 4) == "CSDE");
    auto u32 = [&](std::size_t off) {
        return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off])) |
               static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 1])) << 8 |
               static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 2])) << 16 |
               static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[off + 3])) << 24;
    };
    CHECK(u32(4) == 1);
    CHECK(u32(8) == 4);
    CHECK(u32(12) == 1);
    CHECK(u32(16) == 0x3f000000u);  // 0.5f
}

TEST_CASE("binary round trip is bit-exact") {
    TempDir dir;
    synth::Rng rng(51);
    EmbeddingStore store;
    std::vector<std::vector<double>> originals;
    for (int a = 0; a < 3; ++a) {
        std::vector<double> data;
        for (int r = 0; r < 4 + a; ++r) {
            auto v = synth::random_unit(16, rng);
            for (double& x : v) x = static_cast<float>(x);
            data.insert(data.end(), v.begin(), v.end());
        }
        originals.push_back(data);
        store.put(EmbeddingMatrix("art" + std::to_string(a), 16, data));
    }
    save_embeddings(store, dir / "a.bin", EmbeddingFormat::binary);
    auto loaded = load_embeddings(dir / "a.bin");
    REQUIRE(loaded.size() == 3);
    CHECK(loaded.ids() == std::vector<std::string>{"#0", "#1", "#2"});
    for (int a = 0; a < 3; ++a) {
        const auto& m = loaded.get("#" + std::to_string(a));
        CHECK(std::memcmp(m.data().data(), originals[a].data(), originals[a].size() * sizeof(double)) == 0);
    }
    save_embeddings(loaded, dir / "b.bin", EmbeddingFormat::binary);
    CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));

    // Bound to a corpus by position.
    std::string corpus_text;
    for (int a = 0; a < 3; ++a) {
        nlohmann::json j{{"id", "doc" + std::to_string(a)}, {"sentences", std::vector<std::string>(4 + a, "s.")}};
        corpus_text += j.dump() + "\n";
    }
    auto corpus = parse(corpus_text);
    auto bound = load_embeddings(dir / "a.bin", &corpus);
    CHECK(bound.ids() == std::vector<std::string>{"doc0", "doc1", "doc2"});
    CHECK_NOTHROW(check_store_covers(bound, corpus));

    auto short_corpus = parse(R"({"id": "only", "sentences": ["s."]})");
    CHECK_THROWS_AS(load_embeddings(dir / "a.bin", &short_corpus), DataError);
}

TEST_CASE("text round trip uses shortest round-trip decimals") {
    TempDir dir;
    synth::Rng rng(52);
    EmbeddingStore store;
    store.model = "m1";
    std::vector<double> data;
    for (int r = 0; r < 3; ++r) {
        auto v = synth::random_unit(8, rng);
        data.insert(data.end(), v.begin(), v.end());
    }
    store.put(EmbeddingMatrix("x", 8, data), "abc");
    save_embeddings(store, dir / "e.jsonl", EmbeddingFormat::text);
    auto back = load_embeddings(dir / "e.jsonl");
    CHECK(back.model == "m1");
    CHECK(back.get("x").data() == data);
    CHECK(back.fingerprint("x") == "abc");
}

TEST_CASE("norm validation") {
    TempDir dir;
    spit(dir / "bad.jsonl", R"({"id": "essay-7", "model": "m", "dim": 2, "vectors": [[1, 0], [0.3, 0.4]]})" "\n");
    CHECK_THROWS_WITH_AS(load_embeddings(dir / "bad.jsonl"), doctest::Contains("essay-7"), DataError);
    CHECK_THROWS_WITH_AS(load_embeddings(dir / "bad.jsonl"), doctest::Contains("row 1"), DataError);

    std::vector<double> near{1.0005, 0.0};
    normalize_rows(near, 2, "n");
    CHECK(near[0] == 1.0);

    std::vector<double> tiny{0.6, 0.8 + 1e-9};
    auto copy = tiny;
    normalize_rows(tiny, 2, "t");
    CHECK(tiny == copy);

    spit(dir / "dim.jsonl", R"({"id": "a", "model": "m", "dim": 2, "vectors": [[1, 0]]})" "\n"
                            R"({"id": "b", "model": "m", "dim": 3, "vectors": [[1, 0, 0]]})" "\n");
    CHECK_THROWS_AS(load_embeddings(dir / "dim.jsonl"), DataError);

    auto corpus = parse(R"({"id": "a", "sentences": ["x.", "y."]})");
    EmbeddingStore store;
    store.put(EmbeddingMatrix("a", 2, {1, 0}));
    CHECK_THROWS_AS(check_store_covers(store, corpus), DataError);
}

TEST_CASE("provider protocol and caching") {
    StubProvider stub([](const nlohmann::json& req, httplib::Response& res) { reply_vectors(req, res, 6); });
    auto corpus = parse(R"({"id": "a", "sentences": ["Alpha.", "Beta.", "Gamma."]})"
                        "\n"
                        R"({"id": "b", "sentences": ["Alpha.", "Delta."]})");
    ProviderOptions opts;
    opts.url = stub.url();

    auto one = fetch_embeddings(opts, corpus.articles[0]);
    CHECK(one.model == "stub-model");
    CHECK(one.matrix.rows() == 3);
    CHECK(one.matrix.dim() == 6);
    REQUIRE(stub.bodies.size() == 1);
    CHECK(nlohmann::json::parse(stub.bodies[0]) == nlohmann::json{{"texts", {"Alpha.", "Beta.", "Gamma."}}});

    EmbeddingStore store;
    CHECK(fetch_missing(opts, corpus.articles, store, 2) == 2);
    CHECK(stub.requests == 3);
    CHECK(store.model == "stub-model");
    // Cached rows equal a fresh fetch.
    CHECK(store.get("a").data() == one.matrix.data());
    auto a_row = store.get("a").row(0), b_row = store.get("b").row(0);
    CHECK(std::equal(a_row.begin(), a_row.end(), b_row.begin()));

    CHECK(fetch_missing(opts, corpus.articles, store, 2) == 0);
    CHECK(stub.requests == 3);

    // Warm cache survives a save/load cycle; edited text invalidates its entry.
    TempDir dir;
    save_embeddings(store, dir / "cache.jsonl", EmbeddingFormat::text);
    auto reloaded = load_embeddings(dir / "cache.jsonl");
    CHECK(fetch_missing(opts, corpus.articles, reloaded, 1) == 0);
    auto edited = parse(R"({"id": "a", "sentences": ["Alpha.", "Beta.", "Omega."]})");
    CHECK(fetch_missing(opts, edited.articles, reloaded, 1) == 1);
    CHECK(stub.requests == 4);
}

TEST_CASE("provider failures map to distinct error kinds") {
    auto article = parse(R"({"id": "a", "sentences": ["x.", "y.", "z."]})").articles[0];
    auto kind_of = [&](const ProviderOptions& opts) {
        try {
            fetch_embeddings(opts, article);
        } catch (const FetchError& e) {
            return std::string(to_string(e.kind()));
        }
        return std::string("none");
    };

    StubProvider short_reply([](const nlohmann::json& req, httplib::Response& res) { reply_vectors(req, res, 4, 1); });
    CHECK(kind_of({short_reply.url()}) == "count_mismatch");

    StubProvider ragged([](const nlohmann::json&, httplib::Response& res) {
        res.set_content(R"({"model":"m","dim":2,"embeddings":[[1,0],[0,1],[1,0,0]]})", "application/json");
    });
    CHECK(kind_of({ragged.url()}) == "dim_mismatch");

    StubProvider garbage([](const nlohmann::json&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
    CHECK(kind_of({garbage.url()}) == "malformed");

    StubProvider missing([](const nlohmann::json&, httplib::Response& res) {
        res.set_content(R"({"model":"m"})", "application/json");
    });
    CHECK(kind_of({missing.url()}) == "malformed");

    StubProvider rejecting([](const nlohmann::json&, httplib::Response& res) { res.status = 400; });
    CHECK(kind_of({rejecting.url()}) == "status");
    CHECK(rejecting.requests == 1);  // client errors are not retried

    StubProvider failing([](const nlohmann::json&, httplib::Response& res) { res.status = 503; });
    CHECK(kind_of({failing.url(), 2}) == "status");
    CHECK(failing.requests == 3);  // one try plus two retries

    int closed_port = 0;
    {
        httplib::Server probe;
        closed_port = probe.bind_to_any_port("127.0.0.1");
    }
    CHECK(kind_of({"http://127.0.0.1:" + std::to_string(closed_port), 0, 2}) == "transport");
    CHECK(kind_of({""}) == "transport");
}

TEST_CASE("curve files") {
    TempDir dir;
    CsdCurve c;
    c.xs = {1.0 / 3.0, 2.0 / 3.0, 1.0};
    c.ys = {0.9, 0.7, 0.1};
    c.k = 2;
    c.n = 3;
    c.mode = CurveMode::approx;
    c.sample_count = 3;
    c.seed = 77;
    c.article_id = "art";
    write_curve(c, dir / "c.csv", CurveFormat::csv);
    auto csv = slurp(dir / "c.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.rfind("x,y\n", 0) == 0);
    CHECK(csv.find("0.33333333333333331,0.90000000000000002") != std::string::npos);

    write_curve(c, dir / "c.json", curve_format_from_path(dir / "c.json"));
    auto back = read_curve(dir / "c.json");
    CHECK(back.xs == c.xs);
    CHECK(back.ys == c.ys);
    CHECK(back.k == 2);
    CHECK(back.n == 3);
    CHECK(back.mode == CurveMode::approx);
    CHECK(back.seed == std::optional<std::uint64_t>(77));
    CHECK(back.sample_count == 3);
    CHECK(back.article_id == "art");

    auto agg = aggregate_curves({c, c}, Statistic::mean);
    write_curve(agg, dir / "agg.json", CurveFormat::json);
    CHECK(read_curve(dir / "agg.json").members == 2);
    CHECK(read_json_file(dir / "agg.json")["members"] == 2);

    Csd2Curve c2;
    c2.n = 3;
    c2.t = 1;
    c2.values = {0.0, 0.8, 0.0};
    c2.article_id = "z";
    write_csd2(c2, dir / "c2.json", CurveFormat::json);
    auto b2 = read_csd2(dir / "c2.json");
    CHECK(b2.values == c2.values);
    CHECK(b2.t == 1);

    write_metrics(evaluate({1, 2}, {1, 2}), 2, dir / "m.json");
    auto m = read_json_file(dir / "m.json");
    CHECK(m.dump().find("hit_rate") != std::string::npos);

    write_text_file(dir / "nested" / "deeper" / "f.txt", "ok");
    CHECK(slurp(dir / "nested" / "deeper" / "f.txt") == "ok");
    CHECK_THROWS_AS(read_curve(dir / "absent.json"), DataError);
}

TEST_CASE("fingerprints") {
    Article a("a", {"One.", "Two."}), b("b", {"One.", "Two."}), c("c", {"One.Two."});
    CHECK(article_fingerprint(a) == article_fingerprint(b));
    CHECK(article_fingerprint(a) != article_fingerprint(c));
    CHECK(article_fingerprint(a).size() == 16);
}
