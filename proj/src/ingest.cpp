#include "csd/ingest.hpp"

#include "csd/common.hpp"

#include "httplib.h"

#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace csd {

namespace {

std::string trim(const std::string& s) {
    auto first = s.find_first_not_of(" \t\r\n\f\v");
    if (first == std::string::npos) return {};
    auto last = s.find_last_not_of(" \t\r\n\f\v");
    return s.substr(first, last - first + 1);
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
    return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, mode | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
    return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

EmbeddingMatrix matrix_from_vectors(const std::string& id, std::size_t dim, const nlohmann::json& vectors) {
    std::vector<double> data;
    std::size_t row = 0;
    for (const auto& v : vectors) {
        if (!v.is_array() || v.size() != dim) {
            throw DataError("article '" + id + "' row " + std::to_string(row) + " has dimension " +
                            std::to_string(v.is_array() ? v.size() : 0) + ", expected " + std::to_string(dim));
        }
        for (const auto& x : v) {
            if (!x.is_number()) throw DataError("article '" + id + "' row " + std::to_string(row) + " is not numeric");
            data.push_back(x.get<double>());
        }
        ++row;
    }
    normalize_rows(data, dim, id);
    return EmbeddingMatrix(id, dim, std::move(data));
}

}  // namespace

// --- corpus ----------------------------------------------------------------

const Article& CorpusFile::find(const std::string& id) const {
    for (const auto& a : articles)
        if (a.id() == id) return a;
    throw DataError("article '" + id + "' not found in corpus");
}

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::string current;
    for (std::size_t i = 0; i < text.size(); ++i) {
        current.push_back(text[i]);
        const char c = text[i];
        const bool terminator = c == '.' || c == '!' || c == '?';
        const bool boundary = i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]));
        if (terminator && boundary) {
            auto s = trim(current);
            if (!s.empty()) out.push_back(std::move(s));
            current.clear();
        }
    }
    auto s = trim(current);
    if (!s.empty()) out.push_back(std::move(s));
    return out;
}

CorpusFile parse_corpus(std::istream& in, const std::string& source) {
    CorpusFile corpus;
    corpus.path = source;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto where = source + ":" + std::to_string(line_no);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": malformed JSON (" + e.what() + ")");
        }
        if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
            throw DataError(where + ": entry needs a string \"id\"");
        }
        std::string id = j["id"].get<std::string>();
        if (!seen.insert(id).second) throw DataError(where + ": duplicate article id '" + id + "'");

        std::vector<std::string> sentences;
        if (j.contains("sentences")) {
            if (!j["sentences"].is_array()) throw DataError(where + ": \"sentences\" must be an array");
            for (const auto& s : j["sentences"]) {
                if (!s.is_string()) throw DataError(where + ": sentences must be strings");
                auto t = trim(s.get<std::string>());
                if (t.empty()) throw DataError(where + ": empty sentence in article '" + id + "'");
                sentences.push_back(std::move(t));
            }
        } else if (j.contains("text")) {
            if (!j["text"].is_string()) throw DataError(where + ": \"text\" must be a string");
            sentences = split_sentences(j["text"].get<std::string>());
        } else {
            throw DataError(where + ": entry needs \"sentences\" or \"text\"");
        }
        if (sentences.empty()) throw DataError(where + ": article '" + id + "' has no sentences");

        std::vector<double> scores;
        if (j.contains("scores")) {
            try {
                scores = j["scores"].get<std::vector<double>>();
            } catch (const nlohmann::json::exception&) {
                throw DataError(where + ": \"scores\" must be an array of numbers");
            }
        }
        std::optional<double> label;
        if (j.contains("label")) {
            if (!j["label"].is_number()) throw DataError(where + ": \"label\" must be a number");
            label = j["label"].get<double>();
        }
        corpus.articles.emplace_back(std::move(id), std::move(sentences));
        corpus.scores.push_back(std::move(scores));
        corpus.labels.push_back(label);
    }
    if (corpus.articles.empty()) throw DomainError(source + ": corpus is empty");
    return corpus;
}

CorpusFile load_corpus(const std::filesystem::path& path) {
    auto in = open_in(path);
    return parse_corpus(in, path.string());
}

void save_corpus(const CorpusFile& corpus, const std::filesystem::path& path) {
    std::string out;
    for (std::size_t i = 0; i < corpus.articles.size(); ++i) {
        nlohmann::json j;
        j["id"] = corpus.articles[i].id();
        j["sentences"] = corpus.articles[i].sentences();
        if (i < corpus.scores.size() && !corpus.scores[i].empty()) j["scores"] = corpus.scores[i];
        if (i < corpus.labels.size() && corpus.labels[i]) j["label"] = *corpus.labels[i];
        out += j.dump() + "\n";
    }
    write_text_file(path, out);
}

// --- embeddings ------------------------------------------------------------

const EmbeddingMatrix& EmbeddingStore::get(const std::string& id) const {
    auto it = matrices_.find(id);
    if (it == matrices_.end()) throw DataError("no embeddings for article '" + id + "'");
    return it->second;
}

void EmbeddingStore::put(EmbeddingMatrix matrix, std::string fingerprint) {
    if (dim_ == 0) dim_ = matrix.dim();
    if (matrix.dim() != dim_) {
        throw DataError("article '" + matrix.article_id() + "' has dimension " + std::to_string(matrix.dim()) +
                        " but the store holds dimension " + std::to_string(dim_));
    }
    const std::string id = matrix.article_id();
    if (!matrices_.count(id)) order_.push_back(id);
    matrices_.insert_or_assign(id, std::move(matrix));
    fingerprints_[id] = std::move(fingerprint);
}

const std::string& EmbeddingStore::fingerprint(const std::string& id) const {
    static const std::string none;
    auto it = fingerprints_.find(id);
    return it == fingerprints_.end() ? none : it->second;
}

void normalize_rows(std::vector<double>& data, std::size_t dim, const std::string& article_id) {
    const std::size_t rows = data.size() / dim;
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = data.data() + r * dim;
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) sq += row[d] * row[d];
        const double norm = std::sqrt(sq);
        if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-3) {
            throw DataError("article '" + article_id + "' row " + std::to_string(r) + " has norm " + format_double(norm) +
                            "; embeddings must be unit-normalized");
        }
        if (std::abs(norm - 1.0) > 1e-6) {
            for (std::size_t d = 0; d < dim; ++d) row[d] /= norm;
        }
    }
}

EmbeddingStore load_embeddings(const std::filesystem::path& path, const CorpusFile* corpus) {
    auto in = open_in(path, std::ios::in | std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty()) throw DataError(path.string() + ": embedding file is empty");
    EmbeddingStore store;

    if (bytes.size() >= 4 && bytes.compare(0, 4, "CSDE") == 0) {
        const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
        std::size_t off = 0, record = 0;
        while (off < bytes.size()) {
            const std::string where = path.string() + " record " + std::to_string(record);
            if (bytes.size() - off < 16 || bytes.compare(off, 4, "CSDE") != 0) throw DataError(where + ": bad header");
            const std::uint32_t version = get_u32(p + off + 4), dim = get_u32(p + off + 8), count = get_u32(p + off + 12);
            if (version != kEmbeddingBinaryVersion) {
                throw DataError(where + ": unsupported version " + std::to_string(version));
            }
            if (dim == 0) throw DataError(where + ": zero dimension");
            off += 16;
            const std::size_t payload = static_cast<std::size_t>(dim) * count * 4;
            if (bytes.size() - off < payload) throw DataError(where + ": truncated payload");
            std::vector<double> data(static_cast<std::size_t>(dim) * count);
            for (std::size_t v = 0; v < data.size(); ++v) {
                data[v] = static_cast<double>(std::bit_cast<float>(get_u32(p + off + 4 * v)));
            }
            off += payload;
            std::string id = "#" + std::to_string(record);
            if (corpus) {
                if (record >= corpus->articles.size()) throw DataError(path.string() + ": more records than corpus articles");
                const Article& a = corpus->articles[record];
                id = a.id();
                if (count != a.size()) {
                    throw DataError(where + ": " + std::to_string(count) + " vectors for article '" + id + "' with " +
                                    std::to_string(a.size()) + " sentences");
                }
            }
            normalize_rows(data, dim, id);
            store.put(EmbeddingMatrix(id, dim, std::move(data)));
            ++record;
        }
        if (corpus && record != corpus->articles.size()) {
            throw DataError(path.string() + ": " + std::to_string(record) + " records for " +
                            std::to_string(corpus->articles.size()) + " corpus articles");
        }
        return store;
    }

    std::istringstream lines(bytes);
    std::string line;
    std::size_t line_no = 0;
    bool model_set = false;
    while (std::getline(lines, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        try {
            auto j = nlohmann::json::parse(line);
            const std::string id = j.at("id").get<std::string>();
            const std::string model = j.value("model", std::string("unknown"));
            const auto dim = j.at("dim").get<std::size_t>();
            if (model_set && model != store.model) throw DataError(where + ": mixed models in one store");
            store.model = model;
            model_set = true;
            if (dim == 0) throw DataError(where + ": zero dimension");
            if (store.size() > 0 && dim != store.dim()) {
                throw DataError(where + ": dimension " + std::to_string(dim) + " differs from store dimension " +
                                std::to_string(store.dim()));
            }
            store.put(matrix_from_vectors(id, dim, j.at("vectors")), j.value("fingerprint", std::string()));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where + ": malformed embedding record (" + e.what() + ")");
        }
    }
    if (store.size() == 0) throw DataError(path.string() + ": no embedding records");
    if (corpus) check_store_covers(store, *corpus);
    return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path, EmbeddingFormat format) {
    std::string out;
    for (const auto& id : store.ids()) {
        const EmbeddingMatrix& m = store.get(id);
        if (format == EmbeddingFormat::binary) {
            out.append("CSDE");
            put_u32(out, kEmbeddingBinaryVersion);
            put_u32(out, static_cast<std::uint32_t>(m.dim()));
            put_u32(out, static_cast<std::uint32_t>(m.rows()));
            for (double v : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        } else {
            nlohmann::json j;
            j["id"] = id;
            j["model"] = store.model;
            j["dim"] = m.dim();
            auto& vectors = j["vectors"] = nlohmann::json::array();
            for (std::size_t r = 0; r < m.rows(); ++r) {
                auto row = m.row(r);
                vectors.push_back(std::vector<double>(row.begin(), row.end()));
            }
            if (!store.fingerprint(id).empty()) j["fingerprint"] = store.fingerprint(id);
            out += j.dump() + "\n";
        }
    }
    write_text_file(path, out);
}

void check_store_covers(const EmbeddingStore& store, const CorpusFile& corpus) {
    for (const auto& a : corpus.articles) {
        if (!store.contains(a.id())) throw DataError("no embeddings for article '" + a.id() + "'");
        const auto& m = store.get(a.id());
        if (m.rows() != a.size()) {
            throw DataError("article '" + a.id() + "' has " + std::to_string(a.size()) + " sentences but " +
                            std::to_string(m.rows()) + " embedding rows");
        }
    }
}

std::string article_fingerprint(const Article& article) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](unsigned char c) {
        h ^= c;
        h *= 1099511628211ull;
    };
    for (const auto& s : article.sentences()) {
        for (char c : s) mix(static_cast<unsigned char>(c));
        mix(0x1f);
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// --- provider client ---------------------------------------------------------

const char* to_string(FetchErrorKind kind) {
    switch (kind) {
        case FetchErrorKind::transport: return "transport";
        case FetchErrorKind::status: return "status";
        case FetchErrorKind::malformed: return "malformed";
        case FetchErrorKind::count_mismatch: return "count_mismatch";
        case FetchErrorKind::dim_mismatch: return "dim_mismatch";
    }
    return "unknown";
}

FetchedEmbeddings fetch_embeddings(const ProviderOptions& provider, const Article& article) {
    if (provider.url.empty()) throw FetchError(FetchErrorKind::transport, "no embedding provider URL configured");
    httplib::Client client(provider.url);
    client.set_connection_timeout(provider.timeout_seconds, 0);
    client.set_read_timeout(provider.timeout_seconds, 0);
    client.set_write_timeout(provider.timeout_seconds, 0);

    const std::string body = nlohmann::json{{"texts", article.sentences()}}.dump();
    httplib::Result res{nullptr, httplib::Error::Unknown};
    for (unsigned attempt = 0; attempt <= provider.retries; ++attempt) {
        res = client.Post("/embed", body, "application/json");
        // Retry transport failures and server errors only.
        if (res && res->status < 500) break;
    }
    if (!res) {
        throw FetchError(FetchErrorKind::transport,
                         "embedding provider " + provider.url + " unreachable: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw FetchError(FetchErrorKind::status,
                         "embedding provider returned HTTP " + std::to_string(res->status) + " for '" + article.id() + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
        throw FetchError(FetchErrorKind::malformed, std::string("embedding response is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("embeddings") || !j["embeddings"].is_array() || !j.contains("dim") ||
        !j["dim"].is_number_unsigned() || j["dim"].get<std::size_t>() == 0) {
        throw FetchError(FetchErrorKind::malformed, "embedding response lacks \"dim\" or \"embeddings\"");
    }
    const auto& emb = j["embeddings"];
    const auto dim = j["dim"].get<std::size_t>();
    if (emb.size() != article.size()) {
        throw FetchError(FetchErrorKind::count_mismatch, "provider returned " + std::to_string(emb.size()) +
                                                             " vectors for " + std::to_string(article.size()) +
                                                             " sentences of '" + article.id() + "'");
    }
    for (const auto& v : emb) {
        if (!v.is_array()) throw FetchError(FetchErrorKind::malformed, "embedding rows must be arrays");
        if (v.size() != dim) {
            throw FetchError(FetchErrorKind::dim_mismatch, "provider row of dimension " + std::to_string(v.size()) +
                                                               " in a response declaring dim " + std::to_string(dim));
        }
    }
    FetchedEmbeddings out;
    out.model = j.value("model", std::string("unknown"));
    try {
        out.matrix = matrix_from_vectors(article.id(), dim, emb);
    } catch (const DataError& e) {
        throw FetchError(FetchErrorKind::malformed, e.what());
    }
    return out;
}

std::size_t fetch_missing(const ProviderOptions& provider, const std::vector<Article>& articles, EmbeddingStore& store,
                          unsigned jobs) {
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < articles.size(); ++i) {
        const Article& a = articles[i];
        bool cached = store.contains(a.id()) && store.get(a.id()).rows() == a.size() &&
                      store.fingerprint(a.id()) == article_fingerprint(a);
        if (!cached) todo.push_back(i);
    }
    std::vector<FetchedEmbeddings> fetched(todo.size());
    parallel_for(todo.size(), jobs, [&](std::size_t t) { fetched[t] = fetch_embeddings(provider, articles[todo[t]]); });
    for (std::size_t t = 0; t < todo.size(); ++t) {
        if (store.size() > 0 && fetched[t].matrix.dim() != store.dim()) {
            throw FetchError(FetchErrorKind::dim_mismatch, "provider dimension " + std::to_string(fetched[t].matrix.dim()) +
                                                               " differs from cached dimension " +
                                                               std::to_string(store.dim()));
        }
        if (store.size() == 0 || store.model == "unknown") store.model = fetched[t].model;
        store.put(std::move(fetched[t].matrix), article_fingerprint(articles[todo[t]]));
    }
    return todo.size();
}

// --- results -----------------------------------------------------------------

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CurveFormat curve_format_from_path(const std::filesystem::path& path) {
    return path.extension() == ".json" ? CurveFormat::json : CurveFormat::csv;
}

nlohmann::json curve_to_json(const CsdCurve& curve) {
    nlohmann::json j;
    j["format"] = "csd-curve";
    j["version"] = kCurveFormatVersion;
    j["kind"] = "csd1";
    j["article_id"] = curve.article_id;
    j["mode"] = to_string(curve.mode);
    j["k"] = curve.k;
    j["n"] = curve.n;
    j["sample_count"] = curve.sample_count;
    j["members"] = curve.members;
    j["seed"] = curve.seed ? nlohmann::json(*curve.seed) : nlohmann::json(nullptr);
    j["xs"] = curve.xs;
    j["ys"] = curve.ys;
    return j;
}

CsdCurve curve_from_json(const nlohmann::json& j) {
    try {
        if (j.value("kind", std::string("csd1")) != "csd1") throw DataError("not a CSD-1 curve document");
        CsdCurve c;
        c.article_id = j.value("article_id", std::string());
        c.mode = curve_mode_from_string(j.at("mode").get<std::string>());
        c.k = j.at("k").get<std::size_t>();
        c.n = j.at("n").get<std::size_t>();
        c.sample_count = j.at("sample_count").get<std::size_t>();
        c.members = j.value("members", std::size_t{1});
        if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
        c.xs = j.at("xs").get<std::vector<double>>();
        c.ys = j.at("ys").get<std::vector<double>>();
        if (c.xs.size() != c.ys.size() || c.xs.empty()) throw DataError("curve xs and ys differ in length");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed curve document: ") + e.what());
    } catch (const DomainError& e) {
        throw DataError(std::string("malformed curve document: ") + e.what());
    }
}

void write_curve(const CsdCurve& curve, const std::filesystem::path& path, CurveFormat format) {
    if (format == CurveFormat::json) {
        write_text_file(path, curve_to_json(curve).dump() + "\n");
        return;
    }
    std::string out = "x,y\n";
    for (std::size_t j = 0; j < curve.xs.size(); ++j) out += format_double(curve.xs[j]) + "," + format_double(curve.ys[j]) + "\n";
    write_text_file(path, out);
}

namespace {

std::vector<std::pair<double, double>> read_xy_csv(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    std::vector<std::pair<double, double>> rows;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || (line_no == 1 && line == "x,y")) continue;
        auto comma = line.find(',');
        try {
            if (comma == std::string::npos) throw std::invalid_argument("missing comma");
            std::size_t used = 0;
            double x = std::stod(line.substr(0, comma), &used);
            double y = std::stod(line.substr(comma + 1));
            rows.emplace_back(x, y);
        } catch (const std::exception&) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected \"x,y\"");
        }
    }
    if (rows.empty()) throw DataError(path.string() + ": no curve points");
    return rows;
}

}  // namespace

CsdCurve read_curve(const std::filesystem::path& path) {
    if (curve_format_from_path(path) == CurveFormat::json) return curve_from_json(read_json_file(path));
    CsdCurve c;
    for (auto [x, y] : read_xy_csv(path)) {
        c.xs.push_back(x);
        c.ys.push_back(y);
    }
    c.sample_count = c.xs.size();
    return c;
}

nlohmann::json csd2_to_json(const Csd2Curve& curve) {
    nlohmann::json j;
    j["format"] = "csd-curve";
    j["version"] = kCurveFormatVersion;
    j["kind"] = "csd2";
    j["article_id"] = curve.article_id;
    j["n"] = curve.n;
    j["t"] = curve.t;
    j["values"] = curve.values;
    return j;
}

Csd2Curve csd2_from_json(const nlohmann::json& j) {
    try {
        if (j.value("kind", std::string()) != "csd2") throw DataError("not a CSD-2 curve document");
        Csd2Curve c;
        c.article_id = j.value("article_id", std::string());
        c.n = j.at("n").get<std::size_t>();
        c.t = j.at("t").get<std::size_t>();
        c.values = j.at("values").get<std::vector<double>>();
        if (c.values.size() != c.n || c.n == 0) throw DataError("CSD-2 value count does not match n");
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed CSD-2 document: ") + e.what());
    }
}

void write_csd2(const Csd2Curve& curve, const std::filesystem::path& path, CurveFormat format) {
    if (format == CurveFormat::json) {
        write_text_file(path, csd2_to_json(curve).dump() + "\n");
        return;
    }
    std::string out = "x,y\n";
    for (std::size_t i = 1; i <= curve.n; ++i) out += format_double(curve.x(i)) + "," + format_double(curve.values[i - 1]) + "\n";
    write_text_file(path, out);
}

Csd2Curve read_csd2(const std::filesystem::path& path) {
    if (curve_format_from_path(path) == CurveFormat::json) return csd2_from_json(read_json_file(path));
    Csd2Curve c;
    for (auto [x, y] : read_xy_csv(path)) c.values.push_back(y);
    c.n = c.values.size();
    for (double v : c.values)
        if (v != 0.0) ++c.t;
    return c;
}

void write_csd2_grid(const Csd2Grid& grid, const std::filesystem::path& path, CurveFormat format) {
    if (format == CurveFormat::json) {
        nlohmann::json j{{"format", "csd-curve"}, {"version", kCurveFormatVersion}, {"kind", "csd2-aggregate"},
                         {"members", grid.members}, {"xs", grid.xs}, {"ys", grid.ys}};
        write_text_file(path, j.dump() + "\n");
        return;
    }
    std::string out = "x,y\n";
    for (std::size_t j = 0; j < grid.xs.size(); ++j) out += format_double(grid.xs[j]) + "," + format_double(grid.ys[j]) + "\n";
    write_text_file(path, out);
}

void write_metrics(const std::vector<ToleranceMetrics>& metrics, std::size_t count, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "csd-metrics";
    j["version"] = 1;
    j["count"] = count;
    auto& rows = j["tolerances"] = nlohmann::json::array();
    for (const auto& m : metrics) {
        rows.push_back({{"tolerance", m.tolerance}, {"hit_rate", m.hit_rate}, {"macro_f1", m.macro_f1}});
    }
    write_text_file(path, j.dump(2) + "\n");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed JSON (" + e.what() + ")");
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    auto out = open_out(path, std::ios::out | std::ios::binary);
    out << contents;
    if (!out) throw DataError("failed writing '" + path.string() + "'");
}

}  // namespace csd
