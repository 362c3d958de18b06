#pragma once

// Corpus and embedding I/O, the embedding-provider client, and result
// serialization.
//
// Corpus: UTF-8 JSON Lines, one article per line:
//   {"id": "...", "sentences": ["...", ...]}  or  {"id": "...", "text": "..."}
// optionally with "scores": [..] (rater scores) and/or "label": x.
//
// Embeddings, text form: JSON Lines {"id", "model", "dim", "vectors": [[...]]}
// Embeddings, binary form: one record per article in corpus order, each
//   "CSDE" | u32 version | u32 dim | u32 count | count*dim f32, little-endian.

#include "csd/assess.hpp"
#include "csd/common.hpp"
#include "csd/csd1.hpp"
#include "csd/csd2.hpp"
#include "csd/textmodel.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace csd {

constexpr std::uint32_t kEmbeddingBinaryVersion = 1;
constexpr int kCurveFormatVersion = 1;

struct CorpusFile {
    std::filesystem::path path;
    std::vector<Article> articles;
    std::vector<std::vector<double>> scores;   // per article; empty when absent
    std::vector<std::optional<double>> labels;  // per article

    const Article& find(const std::string& id) const;
};

// Splits on '.', '!' or '?' followed by whitespace (or end of text) and
// drops empty pieces.  Terminators stay attached to their sentence.
std::vector<std::string> split_sentences(const std::string& text);

CorpusFile parse_corpus(std::istream& in, const std::string& source);
CorpusFile load_corpus(const std::filesystem::path& path);
void save_corpus(const CorpusFile& corpus, const std::filesystem::path& path);

enum class EmbeddingFormat { text, binary };

class EmbeddingStore {
public:
    std::string model = "unknown";

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return order_.size(); }
    bool contains(const std::string& id) const { return matrices_.count(id) != 0; }
    const EmbeddingMatrix& get(const std::string& id) const;
    // Ids in insertion order.
    const std::vector<std::string>& ids() const { return order_; }

    // Replaces any existing entry; throws DataError on a dim mismatch.
    void put(EmbeddingMatrix matrix, std::string fingerprint = {});
    const std::string& fingerprint(const std::string& id) const;

private:
    std::size_t dim_ = 0;
    std::vector<std::string> order_;
    std::map<std::string, EmbeddingMatrix> matrices_;
    std::map<std::string, std::string> fingerprints_;
};

// Checks unit L2 norm: rows within 1e-6 are kept bit-for-bit, rows within
// 1e-3 are renormalized, anything else throws DataError naming the row.
void normalize_rows(std::vector<double>& data, std::size_t dim, const std::string& article_id);

// Binary records carry no ids; with a corpus they are bound to its articles
// by position (counts must match), otherwise ids are "#0", "#1", ...
EmbeddingStore load_embeddings(const std::filesystem::path& path, const CorpusFile* corpus = nullptr);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path, EmbeddingFormat format);

// Throws DataError unless every article has a matching matrix.
void check_store_covers(const EmbeddingStore& store, const CorpusFile& corpus);

// Stable content hash of an article's sentences (hex FNV-1a 64).
std::string article_fingerprint(const Article& article);

// --- embedding provider client --------------------------------------------

enum class FetchErrorKind { transport, status, malformed, count_mismatch, dim_mismatch };
const char* to_string(FetchErrorKind kind);

class FetchError : public DataError {
public:
    FetchError(FetchErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
    FetchErrorKind kind() const { return kind_; }

private:
    FetchErrorKind kind_;
};

struct ProviderOptions {
    std::string url;  // e.g. http://127.0.0.1:8000
    unsigned retries = 2;
    int timeout_seconds = 60;
};

struct FetchedEmbeddings {
    std::string model;
    EmbeddingMatrix matrix;
};

// One POST /embed per article: {"texts": [...]}.
FetchedEmbeddings fetch_embeddings(const ProviderOptions& provider, const Article& article);

// Fills `store` for every article not already cached with a matching
// fingerprint.  Fetches run on up to `jobs` threads; the store is written on
// the calling thread only.  Returns the number of provider requests made.
std::size_t fetch_missing(const ProviderOptions& provider, const std::vector<Article>& articles, EmbeddingStore& store,
                          unsigned jobs);

// --- results ---------------------------------------------------------------

enum class CurveFormat { csv, json };
CurveFormat curve_format_from_path(const std::filesystem::path& path);

nlohmann::json curve_to_json(const CsdCurve& curve);
CsdCurve curve_from_json(const nlohmann::json& j);
void write_curve(const CsdCurve& curve, const std::filesystem::path& path, CurveFormat format);
// JSON curves restore metadata; CSV curves restore xs / ys only.
CsdCurve read_curve(const std::filesystem::path& path);

nlohmann::json csd2_to_json(const Csd2Curve& curve);
Csd2Curve csd2_from_json(const nlohmann::json& j);
void write_csd2(const Csd2Curve& curve, const std::filesystem::path& path, CurveFormat format);
Csd2Curve read_csd2(const std::filesystem::path& path);
void write_csd2_grid(const Csd2Grid& grid, const std::filesystem::path& path, CurveFormat format);

void write_metrics(const std::vector<ToleranceMetrics>& metrics, std::size_t count, const std::filesystem::path& path);

// printf %.17g: 17 significant digits, round-trips any double.
std::string format_double(double v);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace csd
